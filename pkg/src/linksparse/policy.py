"""Per-link contention-withdrawal policies and the resulting sparsified state."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .ecdf import EcdfModel
from .graphs import ConflictGraph

__all__ = [
    "PolicySpec",
    "SparsifiedState",
    "apply_policy",
    "cutoff_probabilities",
    "gates",
    "quantile_threshold",
]

POLICY_KINDS = ("zero", "baseline", "baseline_scaled", "gcn", "hybrid")

# CLI spellings of the policy kinds
POLICY_ALIASES = {
    "zero": "zero",
    "stat": "baseline",
    "stat-scaled": "baseline_scaled",
    "gcn": "gcn",
    "hybrid": "hybrid",
}


def quantile_threshold(ecdf: EcdfModel, eta: float) -> float:
    """``eta``-quantile of the utility CDF, floored at 0.

    The smooth CDF spreads an atom at ``u = 0`` over a bandwidth below it, so
    small ``eta`` would otherwise give a negative gate and readmit links with
    zero utility.
    """
    if eta <= 0:
        return 0.0
    return max(0.0, float(ecdf.quantile(eta)))


@dataclass(frozen=True)
class PolicySpec:
    """A threshold policy.

    ``z`` holds the GCN multipliers for the graph in use; ``baseline_scaled``
    only uses their mean. ``hybrid_degree`` is the conflict degree above which
    the hybrid policy switches its GCN threshold on.
    """

    kind: str
    eta: float = 0.0
    global_threshold: float = 0.0
    z: np.ndarray | None = None
    hybrid_degree: int | None = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if not (0.0 <= self.eta < 1.0):
            raise ValueError("eta must lie in [0, 1)")
        if self.kind in ("gcn", "hybrid", "baseline_scaled") and self.z is None:
            raise ValueError(f"policy {self.kind!r} needs multipliers z")
        if self.kind == "hybrid" and self.hybrid_degree is None:
            raise ValueError("hybrid policy needs hybrid_degree")
        if self.z is not None and np.any(np.asarray(self.z) < 0):
            raise ValueError("multipliers z must be nonnegative")

    @classmethod
    def from_ecdf(cls, kind: str, eta: float, ecdf: EcdfModel | None, **kw) -> PolicySpec:
        """Build a spec whose global threshold is the ``eta``-quantile of ``ecdf``."""
        u_eta = 0.0 if kind == "zero" else quantile_threshold(ecdf, eta)
        return cls(kind, eta, u_eta, **kw)


def gates(g: ConflictGraph, spec: PolicySpec) -> np.ndarray:
    """Per-vertex utility level at or below which the link withdraws."""
    n = g.vertex_count
    u_eta = spec.global_threshold
    if spec.kind == "zero":
        return np.zeros(n)
    if spec.kind == "baseline":
        return np.full(n, u_eta)
    z = np.asarray(spec.z, dtype=np.float64)
    if z.shape != (n,):
        raise ValueError(f"z has shape {z.shape}, graph has {n} vertices")
    if spec.kind == "gcn":
        return z * u_eta
    if spec.kind == "baseline_scaled":
        return np.full(n, z.mean() * u_eta if n else 0.0)
    # hybrid
    return np.where(g.degrees > spec.hybrid_degree, z * u_eta, 0.0)


@dataclass(frozen=True, eq=False)
class SparsifiedState:
    """Outcome of thresholding: which links stay in contention and their weights.

    Arrays are indexed by the ORIGINAL vertex ids. ``weights`` and
    ``post_degrees`` are zero for excluded vertices.
    """

    graph: ConflictGraph
    utilities: np.ndarray
    retained: np.ndarray
    weights: np.ndarray
    post_degrees: np.ndarray

    @cached_property
    def sparse(self) -> tuple[ConflictGraph, np.ndarray]:
        return self.graph.induced_subgraph(self.retained)

    @property
    def sparse_graph(self) -> ConflictGraph:
        """Induced subgraph on the retained links, compactly relabeled."""
        return self.sparse[0]

    @property
    def retained_ids(self) -> np.ndarray:
        return self.sparse[1]

    @property
    def sparse_weights(self) -> np.ndarray:
        return self.weights[self.retained]

    @property
    def retained_count(self) -> int:
        return int(self.retained.sum())

    @property
    def sparse_edge_count(self) -> int:
        return int(self.post_degrees.sum() // 2)


def sparsify(g: ConflictGraph, u, retained) -> SparsifiedState:
    u = np.asarray(u, dtype=np.float64)
    retained = np.asarray(retained, dtype=bool)
    d_s = kernels.induced_degrees(g.indptr, g.indices, retained)
    return SparsifiedState(g, u, retained, np.where(retained, u, 0.0), d_s)


def apply_policy(g: ConflictGraph, u, spec: PolicySpec) -> SparsifiedState:
    """Retain link ``v`` iff ``u(v)`` is strictly above its gate."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (g.vertex_count,):
        raise ValueError("utility vector does not match the graph")
    if np.any(u < 0):
        raise ValueError("utilities must be nonnegative")
    return sparsify(g, u, u > gates(g, spec))


def cutoff_probabilities(z, u_eta: float, ecdf: EcdfModel) -> np.ndarray:
    """Probability that each link falls at or below its gate, ``cdf(z·u_eta)``."""
    z = np.asarray(z, dtype=np.float64)
    if np.any(z < 0):
        raise ValueError("multipliers z must be nonnegative")
    return ecdf.cdf(z * u_eta)
