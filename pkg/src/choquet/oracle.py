"""Exact reference values: 1D bump closed forms and a discrete VDC linear program.

The LP works on finitely supported 1D measures.  A table of values ``f_i``
and subgradients ``g_i`` at the support points extends to a convex function
with slopes in ``[-C, C]`` iff ``f_j >= f_i + g_i (x_j - x_i)`` for all pairs
and ``|g_i| <= C``, so maximizing ``sum (p_i - q_i) f_i`` under those
constraints gives the VDC over the full class, not a surrogate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .measures import EmpiricalMeasure


def epanechnikov(x):
    x = np.asarray(x, dtype=np.float64)
    return 0.75 * np.clip(1.0 - x * x, 0.0, None)


@dataclass(frozen=True)
class BumpSpec:
    """Symmetric unimodal density supported on ``[-1, 1]``."""

    density: Callable[[np.ndarray], np.ndarray] = epanechnikov
    grid_points: int = 2**16 + 1

    def __post_init__(self):
        if self.grid_points < 3 or self.grid_points % 2 == 0:
            raise ValueError("grid_points must be odd and >= 3 so that 0 is a node")

    def _grid(self, half_width: float) -> np.ndarray:
        return np.linspace(-half_width, half_width, self.grid_points)

    def mass(self) -> float:
        x = self._grid(1.0)
        return _simpson(self.density(x), x)

    def second_moment(self) -> float:
        x = self._grid(1.0)
        return _simpson(x * x * self.density(x), x)


def _simpson(y: np.ndarray, x: np.ndarray) -> float:
    """Composite Simpson rule on an odd-sized uniform grid."""
    h = x[1] - x[0]
    return float(h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum()))


def _cumtrapz(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x))
    return out


def _bump_tables(spec: BumpSpec, mode: str, a: float):
    if a <= 0:
        raise ValueError("a must be positive")
    eta = spec.density
    if mode == "shift":
        x = spec._grid(1.0 + a)
        F = _cumtrapz(eta(x + a) - eta(x - a), x)
        G = _cumtrapz(F, x)
        G = G - G[len(x) // 2]  # lower limit 0
    elif mode == "scale":
        x = spec._grid(max(1.0, a))
        F = _cumtrapz(eta(x) - eta(x / a) / a, x)
        G = _cumtrapz(F, x)  # lower limit -infinity
    else:
        raise ValueError(f"mode must be 'shift' or 'scale', got {mode!r}")
    return x, F, G


def bump_F_G(spec: BumpSpec, mode: str, a: float, x) -> tuple[float, float]:
    """``F`` and ``G`` of the 1D bump pair at ``x`` (``x`` may be +-inf).

    ``shift`` compares densities ``eta(y + a)`` and ``eta(y - a)`` and takes
    ``G`` from 0; ``scale`` compares ``eta(y)`` with ``eta(y / a) / a`` and
    takes ``G`` from minus infinity.  The grid covers both supports, so
    beyond it ``F`` is exactly zero (equal masses) and ``G`` is constant.
    """
    grid, F, G = _bump_tables(spec, mode, a)
    x = float(x)
    lo, hi = grid[0], grid[-1]
    if x >= hi:
        return 0.0, float(G[-1])
    if x <= lo:
        return 0.0, float(G[0])
    return float(np.interp(x, grid, F)), float(np.interp(x, grid, G))


def analytic_same_variance(spec: BumpSpec, a: float, C: float) -> tuple[float, float]:
    """``(VDC, d_CT)`` for two copies of the bump shifted by ``+a`` and ``-a``."""
    if C <= 0:
        raise ValueError("C must be positive")
    if a == 0:
        return 0.0, 0.0
    g_inf = bump_F_G(spec, "shift", a, math.inf)[1]
    return 2.0 * C * g_inf, 4.0 * C * g_inf


class SameMean(NamedTuple):
    vdc_pm: float
    dct_pm: float
    d_ct: float
    degenerate: bool = False


def analytic_same_mean(spec: BumpSpec, a: float, C: float) -> SameMean:
    """Bump ``eta`` (minus) against its rescaling by ``a`` (plus).

    ``a < 1``: the narrow plus measure is dominated, ``VDC(plus||minus) = 2 C G(0)``.
    ``a > 1``: plus dominates and its VDC vanishes.  The distance is
    ``2 C |G(0)|`` in both cases (``G(0)`` is negative when ``a > 1``).
    """
    if a <= 0 or C <= 0:
        raise ValueError("a and C must be positive")
    if a == 1:
        return SameMean(0.0, 0.0, 0.0, True)
    g0 = bump_F_G(spec, "scale", a, 0.0)[1]
    var = spec.second_moment()
    if a < 1:
        vdc = 2.0 * C * g0
        return SameMean(vdc, vdc - 0.5 * (1.0 - a * a) * var, vdc)
    return SameMean(0.0, 0.5 * (a * a - 1.0) * var, 2.0 * C * abs(g0))


# -- dense simplex --------------------------------------------------------------

class LPResult(NamedTuple):
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    value: float | None
    dual: np.ndarray | None
    gap: float | None
    iterations: int


def _pivot(T: np.ndarray, r: int, c: int) -> None:
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _run_phase(T: np.ndarray, basis: list[int], n_cols: int, tol: float, max_iter: int,
               pivot_tol: float = 1e-9):
    """Maximize with objective in the last row (reduced costs ``z_j - c_j``).

    Bland's rule: the lowest-index improving column enters; ratio ties
    go to the lowest-index basic variable.
    """
    it = 0
    while True:
        red = T[-1, :n_cols]
        cand = np.flatnonzero(red < -tol)
        if cand.size == 0:
            return "optimal", it
        c = int(cand[0])
        col = T[:-1, c]
        rows = np.flatnonzero(col > pivot_tol)
        if rows.size == 0:
            return "unbounded", it
        ratios = np.maximum(T[rows, -1], 0.0) / col[rows]
        best = ratios.min()
        tied = rows[ratios <= best + tol * max(1.0, best)]
        r = int(min(tied, key=lambda i: basis[i]))
        _pivot(T, r, c)
        basis[r] = c
        # round-off must not push a basic variable negative
        np.maximum(T[:-1, -1], 0.0, out=T[:-1, -1])
        it += 1
        if it > max_iter:
            raise RuntimeError("simplex iteration limit reached")


def simplex_solve(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, tol: float = 1e-10,
                  max_iter: int = 100_000) -> LPResult:
    """Maximize ``c @ x`` s.t. ``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``x >= 0``.

    Two-phase dense tableau simplex with Bland's anti-cycling rule.  The
    dual vector is recovered from the final basis and the reported gap is
    ``|b @ y - c @ x|``.
    """
    c = np.asarray(c, dtype=np.float64)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=np.float64).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=np.float64).reshape(-1)
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=np.float64).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=np.float64).reshape(-1)
    m_ub, m_eq = len(b_ub), len(b_eq)
    m = m_ub + m_eq

    # standard form: [A | slack] x = b with b >= 0; slack columns after the originals
    A = np.zeros((m, n + m_ub))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    flip = b < 0
    A[flip] *= -1.0
    b = np.abs(b)
    n_std = n + m_ub
    c_std = np.concatenate([c, np.zeros(m_ub)])

    # a slack with +1 in a non-flipped row is a ready basic column; others need artificials
    basis = [-1] * m
    for i in range(m_ub):
        if not flip[i]:
            basis[i] = n + i
    art_rows = [i for i in range(m) if basis[i] < 0]
    n_art = len(art_rows)
    T = np.zeros((m + 1, n_std + n_art + 1))
    T[:m, :n_std] = A
    T[:m, -1] = b
    for k, i in enumerate(art_rows):
        T[i, n_std + k] = 1.0
        basis[i] = n_std + k

    iters = 0
    if n_art:
        # phase 1: maximize -sum(artificials)
        T[-1, n_std:n_std + n_art] = 1.0
        for i in art_rows:
            T[-1] -= T[i]
        status, it = _run_phase(T, basis, n_std + n_art, tol, max_iter)
        iters += it
        if -T[-1, -1] > tol * max(1.0, np.abs(b).max(initial=0.0)) * 10:
            return LPResult("infeasible", None, None, None, None, iters)
        # drive remaining artificials out of the basis; drop redundant rows
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if basis[r] >= n_std:
                j = int(np.argmax(np.abs(T[r, :n_std])))
                if abs(T[r, j]) > 1e-9:
                    _pivot(T, r, j)
                    basis[r] = j
                else:
                    keep[r] = False
        rows = np.flatnonzero(keep)
        T = np.vstack([T[rows], T[-1:]])
        T = np.delete(T, np.s_[n_std:n_std + n_art], axis=1)
        basis = [basis[r] for r in rows]
        A, b = A[rows], b[rows]
    # phase 2 objective row: z_j - c_j
    T[-1] = 0.0
    T[-1, :n_std] = -c_std
    for r, j in enumerate(basis):
        if c_std[j] != 0.0:
            T[-1] += c_std[j] * T[r]
    status, it = _run_phase(T, basis, n_std, tol, max_iter)
    iters += it
    if status == "unbounded":
        return LPResult("unbounded", None, None, None, None, iters)
    x_std = np.zeros(n_std)
    for r, j in enumerate(basis):
        x_std[j] = T[r, -1]
    x = x_std[:n]
    value = float(c @ x)
    y = np.linalg.lstsq(A[:, basis].T, c_std[basis], rcond=None)[0]
    gap = abs(float(b @ y) - value)
    # express duals for the caller's row signs
    dual = np.zeros(m)
    dual[np.flatnonzero(keep) if n_art else np.arange(m)] = y
    dual[flip] *= -1.0
    return LPResult("optimal", x, value, dual, gap, iters)


# -- discrete VDC ---------------------------------------------------------------

class DiscreteVdc(NamedTuple):
    value: float
    support: np.ndarray
    f: np.ndarray  # values at the support, shifted so min f = 0
    g: np.ndarray  # subgradients at the support
    gap: float


def _merge_1d(minus: EmpiricalMeasure, plus: EmpiricalMeasure):
    if minus.d != 1 or plus.d != 1:
        raise ValueError("the discrete VDC oracle is exact only in dimension 1")
    xs, inv = np.unique(np.concatenate([minus.points[:, 0], plus.points[:, 0]]), return_inverse=True)
    p = np.bincount(inv[:minus.n], weights=minus.weights, minlength=len(xs))
    q = np.bincount(inv[minus.n:], weights=plus.weights, minlength=len(xs))
    return xs, p, q


def lp_vdc_discrete(minus: EmpiricalMeasure, plus: EmpiricalMeasure, C: float,
                    max_atoms: int = 64) -> DiscreteVdc:
    """Exact ``VDC(plus || minus) = sup E_minus[u] - E_plus[u]`` over convex
    ``u`` with slopes in ``[-C, C]``, for 1D discrete measures.
    """
    if C <= 0:
        raise ValueError("C must be positive")
    xs, p, q = _merge_1d(minus, plus)
    N = len(xs)
    if N > max_atoms:
        raise ValueError(f"{N} support points exceed the cap of {max_atoms}")
    if N == 1:
        return DiscreteVdc(0.0, xs, np.zeros(1), np.zeros(1), 0.0)
    # In 1D the all-pairs interpolation constraints reduce to adjacent ones:
    # values/subgradients extend to a convex C-Lipschitz function iff the
    # chord slopes s_j between consecutive atoms are nondecreasing in [-C, C].
    # Variables h_j = s_j + C >= 0; constraints h_j - h_{j+1} <= 0, h_last <= 2C.
    dx = np.diff(xs)
    tail = np.cumsum((p - q)[::-1])[::-1][1:]  # signed mass strictly right of each gap
    M = N - 1
    A = np.zeros((M, M))
    b = np.zeros(M)
    for j in range(M - 1):
        A[j, j], A[j, j + 1] = 1.0, -1.0
    A[M - 1, M - 1] = 1.0
    b[M - 1] = 2.0 * C
    coef = dx * tail
    res = simplex_solve(coef, A, b)
    assert res.status == "optimal", f"VDC LP returned {res.status}"
    s = res.x - C
    value = res.value - C * float(coef.sum())
    f = np.concatenate([[0.0], np.cumsum(s * dx)])
    f -= f.min()
    g = np.concatenate([[-C], s])  # any point of [s_{j-1}, s_j] is a subgradient
    return DiscreteVdc(max(value, 0.0), xs, f, g, res.gap)  # zero function is feasible


def lp_ct_distance(a: EmpiricalMeasure, b: EmpiricalMeasure, C: float) -> float:
    return lp_vdc_discrete(a, b, C).value + lp_vdc_discrete(b, a, C).value
