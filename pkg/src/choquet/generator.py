"""Residual maxout generator for the 2D experiments.

``n_layers`` counts linear maps: one latent-to-hidden maxout layer,
``n_layers - 2`` hidden maxout layers each receiving a linear residual from
the latent input, and a final affine read-out.  No sign or norm
constraints apply; the generator is not input convex.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .net import _rng


@dataclass
class GenTrace:
    latent: np.ndarray
    hidden: list[np.ndarray]
    selected: list[np.ndarray]


@dataclass
class ResidualGenerator:
    latent: int
    out_dim: int
    maxout: list[np.ndarray]     # (hidden, k, fan + 1)
    residual: list[np.ndarray]   # (latent, hidden), one per maxout layer after the first
    readout: np.ndarray          # (hidden + 1, out_dim), last row is the bias

    @property
    def params(self) -> list[np.ndarray]:
        return [*self.maxout, *self.residual, self.readout]

    def with_params(self, params) -> "ResidualGenerator":
        params = [np.array(p, dtype=np.float64, order="C") for p in params]
        n = len(self.maxout)
        return ResidualGenerator(
            self.latent, self.out_dim, params[:n], params[n:2 * n - 1], params[-1]
        )

    def copy(self) -> "ResidualGenerator":
        return self.with_params(self.params)

    def forward(self, Z) -> tuple[np.ndarray, GenTrace]:
        Z = np.ascontiguousarray(Z, dtype=np.float64)
        if Z.ndim != 2 or Z.shape[1] != self.latent:
            raise ValueError(f"latent dimension mismatch: expected {self.latent}, got {Z.shape}")
        H, idx = kernels.maxout_forward(Z, self.maxout[0], 1.0)
        hidden, sel = [H], [idx]
        for W, R in zip(self.maxout[1:], self.residual):
            H, idx = kernels.maxout_forward(H, W, 1.0)
            H += Z @ R
            hidden.append(H)
            sel.append(idx)
        X = H @ self.readout[:-1] + self.readout[-1]
        return X, GenTrace(Z, hidden, sel)

    def __call__(self, Z) -> np.ndarray:
        return self.forward(Z)[0]

    def backward(self, trace: GenTrace, dX) -> list[np.ndarray]:
        """Parameter gradient of ``sum_n <dX[n], g(z_n)>``."""
        dX = np.asarray(dX, dtype=np.float64)
        H = trace.hidden[-1]
        d_read = np.empty_like(self.readout)
        d_read[:-1] = H.T @ dX
        d_read[-1] = dX.sum(axis=0)
        G = np.ascontiguousarray(dX @ self.readout[:-1].T)
        n = len(self.maxout)
        d_max = [None] * n
        d_res = [None] * (n - 1)
        for l in range(n - 1, 0, -1):
            d_res[l - 1] = trace.latent.T @ G
            d_max[l], G = kernels.maxout_backward(trace.hidden[l - 1], self.maxout[l], trace.selected[l], G, 1.0)
        d_max[0], _ = kernels.maxout_backward(trace.latent, self.maxout[0], trace.selected[0], G, 1.0)
        return [*d_max, *d_res, d_read]


def init_generator(latent: int = 32, hidden: int = 32, out_dim: int = 2,
                   n_layers: int = 10, k: int = 2, seed=0) -> ResidualGenerator:
    if n_layers < 2:
        raise ValueError("generator needs at least 2 linear layers")
    rng = _rng(seed)

    def unif(fan, size):
        b = 1.0 / math.sqrt(fan)
        return rng.uniform(-b, b, size=size)

    maxout = [unif(latent, (hidden, k, latent + 1))]
    residual = []
    for _ in range(n_layers - 2):
        maxout.append(unif(hidden, (hidden, k, hidden + 1)))
        residual.append(unif(latent, (latent, hidden)) * 0.5)
    readout = unif(hidden, (hidden + 1, out_dim))
    return ResidualGenerator(latent, out_dim, maxout, residual, readout)
