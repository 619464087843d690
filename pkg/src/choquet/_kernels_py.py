"""Numpy implementation of the maxout-layer kernels.

Shapes used throughout:

* ``H``   -- (n, m_in) layer input, one row per sample
* ``W``   -- (m_out, k, m_in + 1) piece weights, last coordinate is the bias
* ``idx`` -- (n, m_out) selected piece per unit
* ``G``   -- (n, m_out) upstream gradient on the layer output
"""
import numpy as np


def maxout_forward(H, W, scale):
    n, m_in = H.shape
    m_out, k, fan = W.shape
    if fan != m_in + 1:
        raise ValueError("weight fan-in does not match input width")
    pre = H @ W[:, :, :-1].reshape(m_out * k, m_in).T
    pre += W[:, :, -1].reshape(-1)
    pre = pre.reshape(n, m_out, k)
    idx = pre.argmax(axis=2)  # first maximal index on ties
    out = np.take_along_axis(pre, idx[..., None], axis=2)[..., 0]
    out *= scale
    return out, idx.astype(np.intp, copy=False)


def maxout_backward(H, W, idx, G, scale):
    n, m_in = H.shape
    m_out, k, _ = W.shape
    sel = (idx[..., None] == np.arange(k)) * (G * scale)[..., None]
    sel = sel.reshape(n, m_out * k)
    dW = np.empty_like(W)
    dW[:, :, :-1] = (sel.T @ H).reshape(m_out, k, m_in)
    dW[:, :, -1] = sel.sum(axis=0).reshape(m_out, k)
    dH = sel @ W[:, :, :-1].reshape(m_out * k, m_in)
    return dW, dH
