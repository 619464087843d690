"""Maxout networks and input convex maxout networks (ICMNs).

A network of depth ``L`` with widths ``(m_1, ..., m_L)`` and kernel ``k``
stores ``L - 1`` hidden weight tensors.  Tensor ``l`` has shape
``(m_{l+1}, k, m_l + 1)``: one row per output unit and maxout piece, with the
bias as last coordinate.  Layer outputs are

    x^{(l+1)}_i = max_j <w^{(l)}_{i,j}, (x^{(l)}, 1)> / sqrt(m_{l+1})

and the network value is ``a . x^{(L)}``.

Batched routines take ``X`` of shape ``(n, d)``; the single-point functions
``forward``, ``input_gradient`` and ``param_gradient`` are thin wrappers.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels

MODES = ("unconstrained", "input_convex", "input_convex_decreasing")
LIPSCHITZ = ("soft", "hard")

FORMAT_TAG = "choquet.maxout/1"


@dataclass(frozen=True)
class NetShape:
    """Depth, widths and maxout kernel size; ``widths[0]`` is the input dimension."""

    depth: int
    widths: tuple[int, ...]
    k: int

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(m) for m in self.widths))
        if self.depth < 2:
            raise ValueError(f"depth must be >= 2, got {self.depth}")
        if len(self.widths) != self.depth:
            raise ValueError(
                f"expected {self.depth} widths, got {len(self.widths)}"
            )
        if any(m < 1 for m in self.widths):
            raise ValueError(f"widths must be positive, got {self.widths}")
        if self.k < 1:
            raise ValueError(f"kernel size must be >= 1, got {self.k}")

    @property
    def d(self) -> int:
        return self.widths[0]

    @classmethod
    def uniform(cls, d: int, hidden: int, depth: int, k: int) -> "NetShape":
        """Shape with input ``d`` and ``depth - 1`` hidden layers of width ``hidden``."""
        return cls(depth, (d,) + (hidden,) * (depth - 1), k)


@dataclass(frozen=True)
class ConstraintProfile:
    """Sign constraints plus the Lipschitz handling.

    ``lipschitz="hard"`` keeps every hidden weight vector in the unit ball
    and ``a`` in the ball of radius ``radius``; ``"soft"`` leaves norms free
    and carries the output-square penalty weight ``reg_weight`` for the
    training loops.
    """

    mode: str = "input_convex"
    lipschitz: str = "hard"
    radius: float = 1.0
    reg_weight: float = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.lipschitz not in LIPSCHITZ:
            raise ValueError(f"unknown lipschitz handling {self.lipschitz!r}")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.reg_weight < 0:
            raise ValueError("reg_weight must be non-negative")

    @classmethod
    def hard(cls, C: float = 1.0, mode: str = "input_convex") -> "ConstraintProfile":
        return cls(mode=mode, lipschitz="hard", radius=C)

    @classmethod
    def soft(cls, reg_weight: float, mode: str = "input_convex") -> "ConstraintProfile":
        return cls(mode=mode, lipschitz="soft", reg_weight=reg_weight)

    @property
    def convex(self) -> bool:
        return self.mode != "unconstrained"


@dataclass
class MaxoutNet:
    shape: NetShape
    profile: ConstraintProfile
    weights: list[np.ndarray]
    a: np.ndarray

    def __post_init__(self):
        w = self.shape.widths
        if len(self.weights) != self.shape.depth - 1:
            raise ValueError("wrong number of hidden weight tensors")
        for l, W in enumerate(self.weights):
            expected = (w[l + 1], self.shape.k, w[l] + 1)
            if W.shape != expected:
                raise ValueError(f"layer {l + 1}: shape {W.shape}, expected {expected}")
        if self.a.shape != (w[-1],):
            raise ValueError(f"output vector has shape {self.a.shape}, expected {(w[-1],)}")

    @property
    def params(self) -> list[np.ndarray]:
        return [*self.weights, self.a]

    def with_params(self, params) -> "MaxoutNet":
        params = [np.array(p, dtype=np.float64, order="C") for p in params]
        return MaxoutNet(self.shape, self.profile, params[:-1], params[-1])

    def copy(self) -> "MaxoutNet":
        return self.with_params(self.params)

    def __call__(self, X) -> np.ndarray:
        return forward_batch(self, X)[0]


@dataclass
class BatchTrace:
    """Activations ``x^{(1)}..x^{(L)}`` and selected pieces for a batch."""

    activations: list[np.ndarray]
    selected: list[np.ndarray]


@dataclass
class ForwardTrace:
    """Single-point trace: activations, argmax selections and the output value."""

    activations: list[np.ndarray]
    selected: list[np.ndarray]
    value: float = field(default=0.0)


def _layer_scale(W: np.ndarray) -> float:
    return 1.0 / math.sqrt(W.shape[0])


def _as_batch(net: MaxoutNet, X) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != net.shape.d:
        raise ValueError(
            f"input dimension mismatch: net expects d={net.shape.d}, got shape {X.shape}"
        )
    return X


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


def init_params(shape: NetShape, profile: ConstraintProfile | None = None, seed=0) -> MaxoutNet:
    """Fan-in uniform initialization followed by projection onto the profile's set."""
    profile = profile or ConstraintProfile()
    rng = _rng(seed)
    w = shape.widths
    weights = []
    for l in range(shape.depth - 1):
        bound = 1.0 / math.sqrt(w[l])
        weights.append(rng.uniform(-bound, bound, size=(w[l + 1], shape.k, w[l] + 1)))
    bound = 1.0 / math.sqrt(w[-1])
    a = rng.uniform(-bound, bound, size=w[-1])
    return project(MaxoutNet(shape, profile, weights, a))


def zero_net(shape: NetShape, profile: ConstraintProfile | None = None) -> MaxoutNet:
    w = shape.widths
    weights = [np.zeros((w[l + 1], shape.k, w[l] + 1)) for l in range(shape.depth - 1)]
    return MaxoutNet(shape, profile or ConstraintProfile(), weights, np.zeros(w[-1]))


def project(net: MaxoutNet) -> MaxoutNet:
    """Return a copy of ``net`` clamped onto its constraint profile.

    Sign clamps never touch biases.  In hard mode, hidden weight vectors
    (bias included) are rescaled to norm at most 1 and ``a`` to norm at
    most ``radius``.
    """
    prof = net.profile
    weights = [W.copy() for W in net.weights]
    a = net.a.copy()
    if prof.convex:
        for W in weights[1:]:
            np.maximum(W[:, :, :-1], 0.0, out=W[:, :, :-1])
        np.maximum(a, 0.0, out=a)
        if prof.mode == "input_convex_decreasing":
            W = weights[0]
            np.minimum(W[:, :, :-1], 0.0, out=W[:, :, :-1])
    if prof.lipschitz == "hard":
        for W in weights:
            norms = np.linalg.norm(W, axis=2, keepdims=True)
            np.divide(W, norms, out=W, where=norms > 1.0)
        na = np.linalg.norm(a)
        if na > prof.radius:
            a *= prof.radius / na
    return MaxoutNet(net.shape, prof, weights, a)


def is_feasible(net: MaxoutNet, tol: float = 1e-12) -> bool:
    prof = net.profile
    if prof.convex:
        if any((W[:, :, :-1] < 0).any() for W in net.weights[1:]) or (net.a < 0).any():
            return False
        if prof.mode == "input_convex_decreasing" and (net.weights[0][:, :, :-1] > 0).any():
            return False
    if prof.lipschitz == "hard":
        if any((np.linalg.norm(W, axis=2) > 1.0 + tol).any() for W in net.weights):
            return False
        if np.linalg.norm(net.a) > prof.radius * (1.0 + tol):
            return False
    return True


def forward_batch(net: MaxoutNet, X) -> tuple[np.ndarray, BatchTrace]:
    H = _as_batch(net, X)
    acts, sel = [H], []
    for W in net.weights:
        H, idx = kernels.maxout_forward(H, W, _layer_scale(W))
        acts.append(H)
        sel.append(idx)
    return H @ net.a, BatchTrace(acts, sel)


def backward_batch(net: MaxoutNet, trace: BatchTrace, upstream, need_params: bool = True):
    """Backpropagate per-sample weights ``upstream`` (shape ``(n,)``).

    Returns ``(param_grads, input_grads)`` where ``param_grads`` is the
    gradient of ``sum_n upstream[n] * f(x_n)`` in the layout of
    ``net.params`` (``None`` when ``need_params`` is false) and
    ``input_grads[n] = upstream[n] * grad f(x_n)``.
    """
    upstream = np.asarray(upstream, dtype=np.float64)
    G = np.ascontiguousarray(np.outer(upstream, net.a))
    grads = [None] * len(net.weights)
    for l in range(len(net.weights) - 1, -1, -1):
        W = net.weights[l]
        dW, G = kernels.maxout_backward(trace.activations[l], W, trace.selected[l], G, _layer_scale(W))
        grads[l] = dW
    if not need_params:
        return None, G
    da = trace.activations[-1].T @ upstream
    return [*grads, da], G


def input_gradient_batch(net: MaxoutNet, X) -> np.ndarray:
    X = _as_batch(net, X)
    _, trace = forward_batch(net, X)
    return backward_batch(net, trace, np.ones(len(X)), need_params=False)[1]


def forward(net: MaxoutNet, x) -> tuple[float, ForwardTrace]:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != net.shape.d:
        raise ValueError(f"input dimension mismatch: expected {net.shape.d}, got {x.shape[0]}")
    vals, tr = forward_batch(net, x[None, :])
    value = float(vals[0])
    return value, ForwardTrace(
        [h[0].copy() for h in tr.activations], [s[0].copy() for s in tr.selected], value
    )


def input_gradient(net: MaxoutNet, x) -> np.ndarray:
    """Gradient of the affine piece selected at ``x`` (lowest-index tie rule)."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != net.shape.d:
        raise ValueError(f"input dimension mismatch: expected {net.shape.d}, got {x.shape[0]}")
    return input_gradient_batch(net, x[None, :])[0]


def param_gradient(net: MaxoutNet, x, upstream: float = 1.0) -> list[np.ndarray]:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != net.shape.d:
        raise ValueError(f"input dimension mismatch: expected {net.shape.d}, got {x.shape[0]}")
    _, trace = forward_batch(net, x[None, :])
    return backward_batch(net, trace, np.array([upstream]))[0]


def _selected_linear(W: np.ndarray, idx: np.ndarray, S: np.ndarray) -> np.ndarray:
    m_out, k, fan = W.shape
    pre = (S @ W[:, :, :-1].reshape(m_out * k, fan - 1).T).reshape(len(S), m_out, k)
    return np.take_along_axis(pre, idx[..., None], axis=2)[..., 0] * _layer_scale(W)


def input_gradient_param_grad(net: MaxoutNet, trace: BatchTrace, V) -> list[np.ndarray]:
    """Gradient w.r.t. parameters of ``sum_n <V[n], grad_x f(x_n)>``.

    On a fixed selection the input gradient is ``W*_1^T ... W*_{L-1}^T a``,
    multilinear in the selected weights, so each factor's gradient is an
    outer product of the vector pushed forward from ``V`` and the vector
    pulled back from ``a``.  Biases get zero.
    """
    S = [np.ascontiguousarray(V, dtype=np.float64)]
    for W, idx in zip(net.weights, trace.selected):
        S.append(np.ascontiguousarray(_selected_linear(W, idx, S[-1])))
    R = np.ascontiguousarray(np.broadcast_to(net.a, S[-1].shape))
    grads = [None] * len(net.weights)
    for l in range(len(net.weights) - 1, -1, -1):
        W = net.weights[l]
        dW, R = kernels.maxout_backward(S[l], W, trace.selected[l], R, _layer_scale(W))
        dW[:, :, -1] = 0.0
        grads[l] = dW
    return [*grads, S[-1].sum(axis=0)]


def to_dict(net: MaxoutNet) -> dict:
    p = net.profile
    return {
        "format": FORMAT_TAG,
        "depth": net.shape.depth,
        "widths": list(net.shape.widths),
        "k": net.shape.k,
        "profile": {
            "mode": p.mode,
            "lipschitz": p.lipschitz,
            "radius": p.radius,
            "reg_weight": p.reg_weight,
        },
        "weights": [{"shape": list(W.shape), "data": W.ravel().tolist()} for W in net.weights],
        "a": net.a.tolist(),
    }


def from_dict(doc: dict) -> MaxoutNet:
    if doc.get("format") != FORMAT_TAG:
        raise ValueError(f"not a {FORMAT_TAG} document")
    shape = NetShape(doc["depth"], tuple(doc["widths"]), doc["k"])
    weights = [
        np.asarray(w["data"], dtype=np.float64).reshape(w["shape"]) for w in doc["weights"]
    ]
    return MaxoutNet(
        shape, ConstraintProfile(**doc["profile"]), weights, np.asarray(doc["a"], dtype=np.float64)
    )


def save(net: MaxoutNet, path) -> None:
    Path(path).write_text(json.dumps(to_dict(net)))


def load(path) -> MaxoutNet:
    return from_dict(json.loads(Path(path).read_text()))
