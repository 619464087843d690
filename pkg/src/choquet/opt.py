"""Adam with bias correction, projected updates and the scalar box clamp."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .net import project


@dataclass(frozen=True)
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: tuple = field(default=(), repr=False)
    v: tuple = field(default=(), repr=False)


def adam_init(params, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> AdamState:
    zeros = tuple(np.zeros_like(np.asarray(p, dtype=np.float64)) for p in params)
    return AdamState(lr, beta1, beta2, eps, 0, zeros, tuple(z.copy() for z in zeros))


def adam_step(state: AdamState, params, grads):
    """One descent step; returns ``(new_state, new_params)`` without mutating inputs."""
    params = [np.asarray(p, dtype=np.float64) for p in params]
    grads = [np.asarray(g, dtype=np.float64) for g in grads]
    if not state.m:
        state = adam_init(params, state.lr, state.beta1, state.beta2, state.eps)
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("parameter, gradient and moment lists differ in length")
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch: param {p.shape}, grad {g.shape}, moment {m.shape}")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        new_p.append(p - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return replace(state, t=t, m=tuple(new_m), v=tuple(new_v)), new_p


def projected_update(net, state: AdamState, grads):
    """Adam descent step on ``net.params`` followed by projection onto its profile."""
    state, params = adam_step(state, net.params, grads)
    return project(net.with_params(params)), state


def clamp_scalar(z: float, lo: float, hi: float) -> float:
    if lo > hi:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    return min(max(z, lo), hi)
