"""Independent reference implementations used by the tests.

These are written from the mathematical definitions with plain loops and
share no code with the package.
"""
import itertools
import math

import numpy as np


def maxout_value(weights, a, x):
    """Loop evaluation of a maxout network; returns the value and selections."""
    h = [float(v) for v in x]
    selected = []
    for W in weights:
        m_out, k, _ = W.shape
        nxt, sel = [], []
        for i in range(m_out):
            best, arg = -math.inf, -1
            for j in range(k):
                s = sum(W[i, j, q] * h[q] for q in range(len(h))) + W[i, j, -1]
                if s > best:
                    best, arg = s, j
            nxt.append(best / math.sqrt(m_out))
            sel.append(arg)
        h = nxt
        selected.append(sel)
    return sum(ai * hi for ai, hi in zip(a, h)), selected


def central_diff(fun, x, h=1e-5):
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (fun(xp) - fun(xm)) / (2 * h)
    return g


def adam_reference(theta, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    """Scalar Adam iterates for a list of gradients."""
    m = v = 0.0
    out = []
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta = theta - lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + eps)
        out.append(theta)
    return out


def knot_grid_vdc(xs, p, q, C, steps=50):
    """Brute-force VDC over convex piecewise-linear functions with knots at the atoms.

    Chord slopes between consecutive atoms are restricted to the grid
    ``{-C + 2C i / (2 * steps)}`` and must be nondecreasing.  Returns the best
    value of ``sum (p - q) u``.
    """
    grid = np.linspace(-C, C, 2 * steps + 1)
    dx = np.diff(xs)
    w = np.asarray(p) - np.asarray(q)
    tail = np.cumsum(w[::-1])[::-1][1:]
    coef = dx * tail
    # dynamic program over gaps: best[s] = best partial objective with current slope index s
    best = coef[0] * grid
    for c in coef[1:]:
        best = np.maximum.accumulate(best) + c * grid
    return float(max(best.max(), 0.0))


def two_point_convex_functions(C, n=201):
    """A dictionary of convex C-Lipschitz test functions (for sanity bounds)."""
    fns = [lambda x, s=s: s * x for s in (-C, C)]
    for t in np.linspace(-2, 2, n):
        fns.append(lambda x, t=t: C * np.abs(x - t))
    return fns


def brute_force_lp(c, A, b):
    """Maximize c.x over {A x <= b, x >= 0} by enumerating vertices (tiny problems)."""
    n = len(c)
    rows = np.vstack([A, -np.eye(n)])
    rhs = np.concatenate([b, np.zeros(n)])
    best = None
    for idx in itertools.combinations(range(len(rows)), n):
        M = rows[list(idx)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, rhs[list(idx)])
        if (rows @ x <= rhs + 1e-9).all():
            val = float(c @ x)
            best = val if best is None else max(best, val)
    return best


def epanechnikov_sample(rng, n):
    """Draws from the density 3/4 (1 - x^2) on [-1, 1]: the median of three uniforms."""
    return np.median(rng.uniform(-1.0, 1.0, size=(n, 3)), axis=1)
