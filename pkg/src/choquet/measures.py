"""Empirical measures, samplers, CSV ingestion and evaluation statistics.

Random streams use numpy's counter-based Philox bit generator.  Seeds are
plain integers; independent child streams come from
``numpy.random.SeedSequence(seed).spawn``, so a given seed produces the same
draws on every platform numpy supports.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Weighted point set in ``R^d`` with a per-axis support box.

    ``bounds`` has shape ``(d, 2)`` (lower, upper); when omitted it is the
    per-axis min/max of the points.
    """

    points: np.ndarray
    weights: np.ndarray
    bounds: np.ndarray = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        if np.asarray(self.points).ndim == 1:
            pts = pts.reshape(-1, 1)
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if len(pts) == 0:
            raise ValueError("empirical measure needs at least one point")
        if w.shape[0] != pts.shape[0]:
            raise ValueError(f"{pts.shape[0]} points but {w.shape[0]} weights")
        if (w < 0).any() or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be non-negative and sum to 1")
        if self.bounds is None:
            b = np.stack([pts.min(axis=0), pts.max(axis=0)], axis=1)
        else:
            b = np.asarray(self.bounds, dtype=np.float64).reshape(pts.shape[1], 2)
            if (pts < b[:, 0]).any() or (pts > b[:, 1]).any():
                raise ValueError("points fall outside the support box")
        for name, val in (("points", pts), ("weights", w), ("bounds", b)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @classmethod
    def uniform(cls, points, bounds=None) -> "EmpiricalMeasure":
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        return cls(pts, np.full(len(pts), 1.0 / len(pts)), bounds)

    @classmethod
    def atoms(cls, locations, weights) -> "EmpiricalMeasure":
        """Discrete 1D measure; weights are normalized to sum to one."""
        w = np.asarray(weights, dtype=np.float64)
        return cls(np.asarray(locations, dtype=np.float64).reshape(-1, 1), w / w.sum())

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def expect(self, values) -> float:
        return float(self.weights @ values)


# -- samplers ---------------------------------------------------------------

SAMPLER_KINDS = ("uniform", "gaussian", "gaussian_mixture", "swiss_roll", "point_cloud", "pushforward")


@dataclass
class Sampler:
    """Seeded source of i.i.d. draws.  Owns its RNG; use one per thread."""

    kind: str
    params: dict[str, Any]
    seed: int = 0
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in SAMPLER_KINDS:
            raise ValueError(f"unknown sampler kind {self.kind!r}")
        self.rng = np.random.Generator(np.random.Philox(self.seed))
        if self.kind == "point_cloud" and "cloud" not in self.params:
            self.params["cloud"] = from_csv(self.params["path"]).points

    @property
    def d(self) -> int:
        p = self.params
        if self.kind == "uniform":
            return len(np.atleast_1d(p["low"]))
        if self.kind == "gaussian":
            return int(p["dim"])
        if self.kind == "gaussian_mixture":
            return np.asarray(p["means"]).shape[1]
        if self.kind == "swiss_roll":
            return 2
        if self.kind == "point_cloud":
            return p["cloud"].shape[1]
        return p["generator"].out_dim

    def draw(self, n: int) -> np.ndarray:
        p, rng = self.params, self.rng
        if self.kind == "uniform":
            low, high = np.atleast_1d(p["low"]), np.atleast_1d(p["high"])
            return rng.uniform(low, high, size=(n, len(low)))
        if self.kind == "gaussian":
            return rng.standard_normal((n, int(p["dim"])))
        if self.kind == "gaussian_mixture":
            means = np.asarray(p["means"], dtype=np.float64)
            comp = rng.integers(len(means), size=n)
            return means[comp] + p["sigma"] * rng.standard_normal((n, means.shape[1]))
        if self.kind == "swiss_roll":
            t = 1.5 * math.pi * (1.0 + 2.0 * rng.uniform(size=n))
            pts = np.stack([t * np.cos(t), t * np.sin(t)], axis=1)
            pts *= 2.0 / (4.5 * math.pi)  # radius 4.5*pi maps onto the [-2, 2] box
            return pts + p.get("noise", 0.1) * rng.standard_normal((n, 2))
        if self.kind == "point_cloud":
            cloud = p["cloud"]
            return cloud[rng.integers(len(cloud), size=n)]
        base = p["base"]
        return p["generator"](base.draw(n))


def uniform_box(low, high, seed: int = 0) -> Sampler:
    return Sampler("uniform", {"low": low, "high": high}, seed)


def eight_gaussians(radius: float = 2.0, sigma: float = 0.02, seed: int = 0) -> Sampler:
    ang = 2.0 * math.pi * np.arange(8) / 8
    means = radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return Sampler("gaussian_mixture", {"means": means, "sigma": sigma}, seed)


def swiss_roll(noise: float = 0.1, seed: int = 0) -> Sampler:
    return Sampler("swiss_roll", {"noise": noise}, seed)


def latent_gaussian(dim: int, seed: int = 0) -> Sampler:
    return Sampler("gaussian", {"dim": dim}, seed)


def point_cloud(path, seed: int = 0) -> Sampler:
    return Sampler("point_cloud", {"path": str(path)}, seed)


def pushforward(generator, base: Sampler) -> Sampler:
    return Sampler("pushforward", {"generator": generator, "base": base}, base.seed)


def sample_batch(s: Sampler, n: int) -> EmpiricalMeasure:
    if n < 1:
        raise ValueError("batch size must be >= 1")
    return EmpiricalMeasure.uniform(s.draw(n))


def child_seeds(seed: int, n: int) -> list[int]:
    """Deterministic, independent integer seeds derived from ``seed``."""
    return [int(c.generate_state(1)[0]) for c in np.random.SeedSequence(seed).spawn(n)]


# -- CSV ----------------------------------------------------------------------

def _parse_float(cell: str):
    try:
        return float(cell)
    except ValueError:
        return None


def from_csv(path) -> EmpiricalMeasure:
    """Read one point per row; a first row with no numeric cell is a header."""
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row]
            if not any(cells):
                continue
            vals = [_parse_float(c) for c in cells]
            if not rows and width is None and all(v is None for v in vals):
                width = len(cells)
                continue
            if any(v is None for v in vals):
                bad = cells[vals.index(None)]
                raise ValueError(f"{path}: line {lineno}: non-numeric cell {bad!r}")
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise ValueError(f"{path}: line {lineno}: expected {width} columns, got {len(vals)}")
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return EmpiricalMeasure.uniform(np.asarray(rows, dtype=np.float64))


def to_csv(m: EmpiricalMeasure | np.ndarray, path) -> None:
    pts = m.points if isinstance(m, EmpiricalMeasure) else np.asarray(m)
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        for row in pts:
            w.writerow([repr(float(v)) for v in row])


# -- portfolio benchmark and statistics ---------------------------------------

def benchmark_staircase(xi):
    """Staircase benchmark return: ``i/20`` on ``[0.05 i, 0.05 (i+1))``, 1 at 1.

    Accepts a scalar or an array.
    """
    arr = np.asarray(xi, dtype=np.float64)
    if ((arr < 0) | (arr > 1) | np.isnan(arr)).any():
        raise ValueError("benchmark is defined on [0, 1]")
    out = np.where(arr >= 1.0, 1.0, np.minimum(np.floor(arr * 20.0), 19.0) / 20.0)
    return float(out) if out.ndim == 0 else out


def moments(m: EmpiricalMeasure) -> tuple[np.ndarray, float]:
    """Weighted mean vector and weighted mean squared norm."""
    mean = m.weights @ m.points
    second = float(m.weights @ np.einsum("ij,ij->i", m.points, m.points))
    return mean, second


def _weighted_dist_sum(X, wx, Y, wy, block: int = 256) -> float:
    total = 0.0
    for s in range(0, len(X), block):
        D = np.sqrt(((X[s:s + block, None, :] - Y[None, :, :]) ** 2).sum(axis=2))
        total += float(wx[s:s + block] @ (D @ wy))
    return total


def energy_distance(a: EmpiricalMeasure, b: EmpiricalMeasure) -> float:
    """``2E|X-Y| - E|X-X'| - E|Y-Y'|`` over all weighted pairs (V-statistic)."""
    if a.d != b.d:
        raise ValueError(f"dimension mismatch: {a.d} vs {b.d}")
    xy = _weighted_dist_sum(a.points, a.weights, b.points, b.weights)
    yx = _weighted_dist_sum(b.points, b.weights, a.points, a.weights)
    xx = _weighted_dist_sum(a.points, a.weights, a.points, a.weights)
    yy = _weighted_dist_sum(b.points, b.weights, b.points, b.weights)
    return xy + yx - xx - yy
