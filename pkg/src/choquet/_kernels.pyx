# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled maxout-layer kernels.

Same contract as ``choquet._kernels_py``; see that module for the shapes.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()


def maxout_forward(const double[:, ::1] H, const double[:, :, ::1] W, double scale):
    cdef Py_ssize_t n = H.shape[0], m_in = H.shape[1]
    cdef Py_ssize_t m_out = W.shape[0], k = W.shape[1]
    if W.shape[2] != m_in + 1:
        raise ValueError("weight fan-in does not match input width")
    out_arr = np.empty((n, m_out), dtype=np.float64)
    idx_arr = np.empty((n, m_out), dtype=np.intp)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t[:, ::1] idx = idx_arr
    cdef Py_ssize_t s, i, j, d, best_j
    cdef double acc, best
    with nogil:
        for s in range(n):
            for i in range(m_out):
                best = 0.0
                best_j = 0
                for j in range(k):
                    acc = W[i, j, m_in]
                    for d in range(m_in):
                        acc = acc + W[i, j, d] * H[s, d]
                    # strict comparison keeps the lowest index on ties
                    if j == 0 or acc > best:
                        best = acc
                        best_j = j
                out[s, i] = scale * best
                idx[s, i] = best_j
    return out_arr, idx_arr


def maxout_backward(const double[:, ::1] H, const double[:, :, ::1] W,
                    const Py_ssize_t[:, ::1] idx, const double[:, ::1] G, double scale):
    cdef Py_ssize_t n = H.shape[0], m_in = H.shape[1]
    cdef Py_ssize_t m_out = W.shape[0], k = W.shape[1]
    dW_arr = np.zeros((m_out, k, m_in + 1), dtype=np.float64)
    dH_arr = np.zeros((n, m_in), dtype=np.float64)
    cdef double[:, :, ::1] dW = dW_arr
    cdef double[:, ::1] dH = dH_arr
    cdef Py_ssize_t s, i, j, d
    cdef double g
    with nogil:
        for s in range(n):
            for i in range(m_out):
                g = G[s, i] * scale
                if g == 0.0:
                    continue
                j = idx[s, i]
                for d in range(m_in):
                    dW[i, j, d] += g * H[s, d]
                    dH[s, d] += g * W[i, j, d]
                dW[i, j, m_in] += g
    return dW_arr, dH_arr
