"""Featureless GCN that maps a conflict graph to per-link threshold multipliers."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graphs import ConflictGraph, normalized_laplacian_apply

__all__ = [
    "GcnModel",
    "GcnCache",
    "gcn_forward",
    "gcn_forward_local",
    "gcn_backward",
    "save_model",
    "load_model",
]

DEFAULT_LEAKY_SLOPE = 0.01


@dataclass
class GcnModel:
    """``L`` layers ``X^l = act(X^{l-1} Θ0 + ℒ X^{l-1} Θ1)`` with ``X^0 = 1``.

    Hidden layers use leaky ReLU, the output layer ReLU, so ``z >= 0``.
    """

    dims: list[int]
    theta0: list[np.ndarray]
    theta1: list[np.ndarray]
    leaky_slope: float = DEFAULT_LEAKY_SLOPE
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.dims = [int(d) for d in self.dims]
        if len(self.dims) < 2:
            raise ValueError("need at least one layer")
        if self.dims[0] != 1 or self.dims[-1] != 1:
            raise ValueError("input and output widths must both be 1")
        if not (0.0 < self.leaky_slope < 1.0):
            raise ValueError("leaky slope must lie in (0, 1)")
        self.theta0 = [np.array(t, dtype=np.float64).reshape(a, b) for t, a, b in self._shapes(self.theta0)]
        self.theta1 = [np.array(t, dtype=np.float64).reshape(a, b) for t, a, b in self._shapes(self.theta1)]

    def _shapes(self, mats):
        if len(mats) != self.layer_count:
            raise ValueError(f"expected {self.layer_count} parameter matrices, got {len(mats)}")
        for l, t in enumerate(mats):
            a, b = self.dims[l], self.dims[l + 1]
            if np.size(t) != a * b:
                raise ValueError(f"layer {l + 1}: expected {a}x{b} matrix")
            yield t, a, b

    @property
    def layer_count(self) -> int:
        return len(self.dims) - 1

    @classmethod
    def random(cls, layer_count: int = 1, hidden: int = 8, seed=None, leaky_slope=DEFAULT_LEAKY_SLOPE):
        """Uniform ``[-0.5, 0.5] / sqrt(fan_in)`` initialization."""
        dims = _dims(layer_count, hidden)
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        t0, t1 = [], []
        for a, b in zip(dims[:-1], dims[1:]):
            t0.append(rng.uniform(-0.5, 0.5, size=(a, b)) / np.sqrt(a))
            t1.append(rng.uniform(-0.5, 0.5, size=(a, b)) / np.sqrt(a))
        return cls(dims, t0, t1, leaky_slope)

    @classmethod
    def identity(cls, layer_count: int = 1, hidden: int = 8, leaky_slope=DEFAULT_LEAKY_SLOPE):
        """Parameters giving ``z ≡ 1`` on every graph (the statistical baseline)."""
        dims = _dims(layer_count, hidden)
        t0 = []
        for a, b in zip(dims[:-1], dims[1:]):
            m = np.zeros((a, b))
            m[0, 0] = 1.0
            t0.append(m)
        t1 = [np.zeros((a, b)) for a, b in zip(dims[:-1], dims[1:])]
        return cls(dims, t0, t1, leaky_slope)

    def parameters(self) -> list[np.ndarray]:
        out = []
        for a, b in zip(self.theta0, self.theta1):
            out += [a, b]
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def with_flat(self, vec) -> GcnModel:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.parameter_count:
            raise ValueError("parameter vector has the wrong length")
        t0, t1, pos = [], [], 0
        for a, b in zip(self.dims[:-1], self.dims[1:]):
            t0.append(vec[pos : pos + a * b].reshape(a, b))
            pos += a * b
            t1.append(vec[pos : pos + a * b].reshape(a, b))
            pos += a * b
        return GcnModel(self.dims, t0, t1, self.leaky_slope, dict(self.metadata))

    @property
    def parameter_count(self) -> int:
        return sum(2 * a * b for a, b in zip(self.dims[:-1], self.dims[1:]))

    def copy(self) -> GcnModel:
        return self.with_flat(self.flat())


def _dims(layer_count: int, hidden: int) -> list[int]:
    if layer_count < 1:
        raise ValueError("layer_count must be >= 1")
    return [1] + [hidden] * (layer_count - 1) + [1]


@dataclass
class GcnCache:
    graph: ConflictGraph
    inputs: list[np.ndarray]  # X^{l-1}
    smoothed: list[np.ndarray]  # ℒ X^{l-1}
    pre: list[np.ndarray]  # pre-activations


def _activate(h: np.ndarray, last: bool, slope: float) -> np.ndarray:
    if last:
        return np.maximum(h, 0.0)
    return np.where(h > 0, h, slope * h)


def _activation_grad(h: np.ndarray, last: bool, slope: float) -> np.ndarray:
    if last:
        return (h > 0).astype(np.float64)
    return np.where(h > 0, 1.0, slope)


def gcn_forward(model: GcnModel, g: ConflictGraph) -> tuple[np.ndarray, GcnCache]:
    """Return ``z`` (shape ``(n,)``) and the cache needed by ``gcn_backward``."""
    x = np.ones((g.vertex_count, 1))
    cache = GcnCache(g, [], [], [])
    L = model.layer_count
    for l in range(L):
        lx = normalized_laplacian_apply(g, x)
        h = x @ model.theta0[l] + lx @ model.theta1[l]
        cache.inputs.append(x)
        cache.smoothed.append(lx)
        cache.pre.append(h)
        x = _activate(h, l == L - 1, model.leaky_slope)
    return x[:, 0], cache


def gcn_forward_local(model: GcnModel, g: ConflictGraph) -> np.ndarray:
    """Same map as ``gcn_forward``, computed vertex by vertex from neighborhoods."""
    n = g.vertex_count
    deg = g.degrees
    x = [np.ones(1) for _ in range(n)]
    L = model.layer_count
    for l in range(L):
        nxt = []
        for v in range(n):
            agg = np.zeros_like(x[v])
            for u in g.neighbors(v):
                agg += x[u] / np.sqrt(deg[v] * deg[u])
            h = x[v] @ model.theta0[l] + (x[v] - agg) @ model.theta1[l]
            nxt.append(_activate(h, l == L - 1, model.leaky_slope))
        x = nxt
    return np.array([row[0] for row in x])


def gcn_backward(model: GcnModel, g: ConflictGraph, cache: GcnCache, dJ_dz) -> tuple[list, list]:
    """Reverse-mode gradient of ``zᵀ dJ_dz`` w.r.t. every Θ0 and Θ1.

    Returns ``(grad_theta0, grad_theta1)``, lists matching the model's layers.
    The normalized Laplacian is symmetric, so it is its own adjoint.
    """
    if cache.graph is not g or len(cache.pre) != model.layer_count:
        raise ValueError("cache does not belong to this (model, graph) pair")
    grad = np.asarray(dJ_dz, dtype=np.float64).reshape(-1, 1)
    if grad.shape[0] != g.vertex_count:
        raise ValueError("dJ_dz length does not match the graph")
    L = model.layer_count
    g0: list[np.ndarray] = [None] * L  # type: ignore[list-item]
    g1: list[np.ndarray] = [None] * L  # type: ignore[list-item]
    upstream = grad
    for l in reversed(range(L)):
        dh = upstream * _activation_grad(cache.pre[l], l == L - 1, model.leaky_slope)
        g0[l] = cache.inputs[l].T @ dh
        g1[l] = cache.smoothed[l].T @ dh
        if l > 0:
            upstream = dh @ model.theta0[l].T + normalized_laplacian_apply(g, dh @ model.theta1[l].T)
    return g0, g1


def flatten_grads(g0, g1) -> np.ndarray:
    parts = []
    for a, b in zip(g0, g1):
        parts += [a.ravel(), b.ravel()]
    return np.concatenate(parts)


def model_to_dict(model: GcnModel) -> dict:
    return {
        "layer_count": model.layer_count,
        "dims": model.dims,
        "leaky_slope": model.leaky_slope,
        "theta0": [t.ravel().tolist() for t in model.theta0],
        "theta1": [t.ravel().tolist() for t in model.theta1],
        "training": model.metadata,
    }


def model_from_dict(doc: dict) -> GcnModel:
    m = GcnModel(doc["dims"], doc["theta0"], doc["theta1"], doc.get("leaky_slope", DEFAULT_LEAKY_SLOPE))
    if doc.get("layer_count", m.layer_count) != m.layer_count:
        raise ValueError("layer_count does not match dims")
    m.metadata = dict(doc.get("training") or {})
    return m


def save_model(path, model: GcnModel) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path) -> GcnModel:
    return model_from_dict(json.loads(Path(path).read_text()))
