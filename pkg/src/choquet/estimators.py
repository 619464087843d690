"""Surrogate VDC and Choquet-Toland distance estimators.

``estimate_vdc(plus, minus, cfg)`` maximizes

    J(u) = E_minus[u] - E_plus[u]

over input convex maxout critics with projected Adam.  The surrogate VDC is
zero exactly when ``plus`` dominates ``minus`` in the convex order (up to the
capacity of the critic class), and the CT distance is the sum of the two
directed criteria.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .measures import EmpiricalMeasure, child_seeds, moments
from .net import (
    ConstraintProfile,
    MaxoutNet,
    NetShape,
    backward_batch,
    forward_batch,
    init_params,
    input_gradient_batch,
    zero_net,
)
from .opt import adam_init, projected_update


@dataclass(frozen=True)
class CriticConfig:
    shape: NetShape
    profile: ConstraintProfile = field(default_factory=ConstraintProfile)
    lr: float = 3e-2
    inner_steps: int = 1000
    batch_size: int | None = None
    eval_every: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.profile.convex:
            raise ValueError("critic profile must be input_convex or input_convex_decreasing")
        if self.inner_steps < 1:
            raise ValueError("inner_steps must be >= 1")

    @classmethod
    def default(cls, d: int, **kw) -> "CriticConfig":
        """Depth-3 hard(1) ICMN with 8 units and kernel 4 per layer."""
        shape = kw.pop("shape", NetShape.uniform(d, 8, 3, 4))
        return cls(shape=shape, **kw)


@dataclass
class VdcEstimate:
    value: float
    critic: MaxoutNet
    trace: np.ndarray  # rows of (step, objective, regularizer)

    def write_trace(self, path) -> None:
        write_trace_csv(self.trace, path)


@dataclass
class CtEstimate:
    value: float
    plus_minus: VdcEstimate  # VDC(plus || minus)
    minus_plus: VdcEstimate  # VDC(minus || plus)

    @property
    def critics(self) -> tuple[MaxoutNet, MaxoutNet]:
        return self.plus_minus.critic, self.minus_plus.critic


def write_trace_csv(trace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "objective", "regularizer"])
        for step, obj, reg in trace:
            w.writerow([int(step), repr(float(obj)), repr(float(reg))])


def _check_dims(critic_d: int, *measures: EmpiricalMeasure) -> None:
    for m in measures:
        if m.d != critic_d:
            raise ValueError(f"dimension mismatch: critic expects d={critic_d}, measure has d={m.d}")


def vdc_loss(critic: MaxoutNet, plus: EmpiricalMeasure, minus: EmpiricalMeasure) -> float:
    """``E_minus[u] - E_plus[u]`` under the measures' weights."""
    if plus.d != minus.d:
        raise ValueError(f"dimension mismatch: {plus.d} vs {minus.d}")
    _check_dims(critic.shape.d, plus, minus)
    return minus.expect(critic(minus.points)) - plus.expect(critic(plus.points))


def linear_critic(shape: NetShape, profile: ConstraintProfile, w) -> MaxoutNet:
    """Exact network of ``shape`` computing ``u(x) = <w, x>``.

    Every piece of every unit carries the same weights, so the maxout layers
    pass the linear function through unchanged.  Feasible for a hard
    profile when ``|w| <= radius`` (and ``w <= 0`` in the decreasing mode).
    """
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.shape[0] != shape.d:
        raise ValueError(f"dimension mismatch: shape expects d={shape.d}, got {w.shape[0]}")
    r = float(np.linalg.norm(w))
    net = zero_net(shape, profile)
    if r == 0.0:
        return net
    net.weights[0][:, :, :-1] = w / r
    for l, W in enumerate(net.weights[1:], start=1):
        W[:, :, :-1] = 1.0 / np.sqrt(shape.widths[l])
    net.a[:] = r / np.sqrt(shape.widths[-1])
    return net


def best_linear_critic(shape: NetShape, profile: ConstraintProfile, plus: EmpiricalMeasure,
                       minus: EmpiricalMeasure) -> MaxoutNet:
    """The linear member of a hard-mode class maximizing ``E_minus[u] - E_plus[u]``."""
    gap = minus.weights @ minus.points - plus.weights @ plus.points
    if profile.mode == "input_convex_decreasing":
        gap = np.minimum(gap, 0.0)
    n = float(np.linalg.norm(gap))
    return linear_critic(shape, profile, gap * (profile.radius / n) if n > 0 else gap)


def _objective_and_grads(critic, Xp, wp, Xm, wm, reg):
    vp, tp = forward_batch(critic, Xp)
    vm, tm = forward_batch(critic, Xm)
    obj = float(wm @ vm) - float(wp @ vp)
    penalty = reg * (float(wm @ (vm * vm)) + float(wp @ (vp * vp))) if reg else 0.0
    # descent direction for  -J + reg * (E_m[u^2] + E_p[u^2])
    up_m = -wm + 2.0 * reg * wm * vm if reg else -wm
    up_p = wp + 2.0 * reg * wp * vp if reg else wp
    gm, _ = backward_batch(critic, tm, up_m)
    gp, _ = backward_batch(critic, tp, up_p)
    return obj, penalty, [a + b for a, b in zip(gm, gp)]


def estimate_vdc(plus: EmpiricalMeasure, minus: EmpiricalMeasure, cfg: CriticConfig,
                 warm_start: MaxoutNet | None = None, trace_path=None) -> VdcEstimate:
    """Surrogate ``VDC(plus || minus)`` by projected Adam ascent on a fresh critic.

    The reported value is the best full-measure objective seen during the
    run.  The zero critic (always feasible) seeds the running best, so the
    estimate is never negative.  In hard mode the best linear critic, a
    member of the class with a closed form, is also a candidate: ascent
    from a random start can collapse to the zero function when ``plus`` is
    far more spread than ``minus``, hiding a mean gap.
    """
    if plus.d != minus.d:
        raise ValueError(f"dimension mismatch: {plus.d} vs {minus.d}")
    _check_dims(cfg.shape.d, plus, minus)
    if not cfg.profile.convex:
        raise ValueError("critic profile must be convex")
    reg = cfg.profile.reg_weight if cfg.profile.lipschitz == "soft" else 0.0
    critic = warm_start.copy() if warm_start is not None else init_params(cfg.shape, cfg.profile, cfg.seed)
    state = adam_init(critic.params, lr=cfg.lr)
    rng = np.random.Generator(np.random.Philox(cfg.seed + 1))
    full = cfg.batch_size is None or cfg.batch_size >= max(plus.n, minus.n)

    best_val, best_net = 0.0, zero_net(cfg.shape, cfg.profile)
    rows = []

    def consider(value, net):
        nonlocal best_val, best_net
        if value > best_val:
            best_val, best_net = value, net

    if cfg.profile.lipschitz == "hard":
        lin = best_linear_critic(cfg.shape, cfg.profile, plus, minus)
        consider(vdc_loss(lin, plus, minus), lin)

    for step in range(cfg.inner_steps):
        if full:
            Xp, wp, Xm, wm = plus.points, plus.weights, minus.points, minus.weights
        else:
            B = cfg.batch_size
            ip = rng.choice(plus.n, size=B, p=plus.weights)
            im = rng.choice(minus.n, size=B, p=minus.weights)
            Xp, Xm = plus.points[ip], minus.points[im]
            wp = wm = np.full(B, 1.0 / B)
        obj, pen, grads = _objective_and_grads(critic, Xp, wp, Xm, wm, reg)
        if full:
            consider(obj, critic)
        elif step % cfg.eval_every == 0:
            consider(vdc_loss(critic, plus, minus), critic)
        rows.append((step, obj, pen))
        critic, state = projected_update(critic, state, grads)
    final = vdc_loss(critic, plus, minus)
    consider(final, critic)
    rows.append((cfg.inner_steps, final, 0.0))
    trace = np.asarray(rows, dtype=np.float64)
    if trace_path is not None:
        write_trace_csv(trace, trace_path)
    return VdcEstimate(best_val, best_net, trace)


def estimate_ct(plus: EmpiricalMeasure, minus: EmpiricalMeasure, cfg: CriticConfig) -> CtEstimate:
    """Surrogate CT distance: two independent VDC runs with arguments swapped."""
    s1, s2 = child_seeds(cfg.seed, 2)
    pm = estimate_vdc(plus, minus, replace(cfg, seed=s1 % 2**31))
    mp = estimate_vdc(minus, plus, replace(cfg, seed=s2 % 2**31))
    return CtEstimate(d_ct_from_vdc(pm.value, mp.value), pm, mp)


def d_ct_from_vdc(vdc_pm: float, vdc_mp: float) -> float:
    return vdc_pm + vdc_mp


def d_ct_discrepancy(vdc: float, plus: EmpiricalMeasure, minus: EmpiricalMeasure) -> float:
    """CT discrepancy ``D(plus || minus)`` from its VDC term and second moments."""
    return vdc + 0.5 * (moments(plus)[1] - moments(minus)[1])


def gradient_pushforward(critic: MaxoutNet, m: EmpiricalMeasure) -> EmpiricalMeasure:
    _check_dims(critic.shape.d, m)
    return EmpiricalMeasure(input_gradient_batch(critic, m.points), m.weights)
