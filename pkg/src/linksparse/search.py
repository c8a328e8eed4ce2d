"""Offline selection of the global cut-off quantile.

Signaling-overhead models, the net-utility objective over a frozen sample of
network states, and a bracketing peak search for quasi-concave objectives.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .ecdf import EcdfModel
from .graphs import ConflictGraph
from .policy import quantile_threshold

__all__ = [
    "OVERHEAD_MODES",
    "OverheadModel",
    "overhead_fraction",
    "csma_win_probability",
    "NetUtilityObjective",
    "net_utility_objective",
    "PeakSearchResult",
    "peak_search",
]

OVERHEAD_MODES = ("flexible", "fixed_deadline", "csma")


@dataclass(frozen=True)
class OverheadModel:
    """``tau`` is the slot fraction one control message takes; ``K`` counts messages."""

    mode: str = "fixed_deadline"
    tau: float = 0.01
    K: int = 30
    W: int = 32

    def __post_init__(self):
        if self.mode not in OVERHEAD_MODES:
            raise ValueError(f"unknown overhead mode {self.mode!r}")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.K < 1 or self.W < 1:
            raise ValueError("K and W must be >= 1")


def overhead_fraction(m: OverheadModel, x):
    """Fraction of the slot lost to signaling for a contention neighborhood of ``x`` links."""
    if m.mode == "csma":
        raise ValueError("csma overhead is modeled by csma_win_probability")
    xa = np.asarray(x, dtype=np.float64)
    if np.any(xa < 1):
        raise ValueError("neighborhood size must be >= 1")
    if m.mode == "flexible":
        out = np.minimum(1.0, xa * m.tau)
    else:
        out = (xa > m.K).astype(np.float64)
    return float(out) if out.ndim == 0 else out


def csma_win_probability(W: int, d):
    """Chance a contender draws a backoff strictly below all ``d`` neighbors'.

    ``(1/W) Σ_{m=0}^{W-1} ((W-1-m)/W)^d``; exact finite sum.
    """
    if W < 1:
        raise ValueError("contention window must be >= 1")
    da = np.asarray(d, dtype=np.float64)
    if np.any(da < 0):
        raise ValueError("degree must be nonnegative")
    base = (W - 1 - np.arange(W, dtype=np.float64)) / W
    out = np.power(base[:, None], da.ravel()[None, :]).sum(axis=0) / W
    out = out.reshape(da.shape)
    return float(out) if out.ndim == 0 else out


@dataclass
class NetUtilityObjective:
    """Net-utility objective of the baseline threshold over a frozen draw set.

    ``n_samples`` network states are fixed at construction (graph ``i mod
    len(graphs)`` and utilities drawn from ``ecdf``), so calling the object at
    different ``eta`` values evaluates a deterministic function.

    For the LGS modes each sample contributes ``Σ u(v)(1 - f_s(dˢ(v) + 1))``
    over the weight-greedy maximal independent set of the sparsified graph;
    for ``csma`` it contributes ``Σ u(v)·win(W, dˢ(v))`` over all retained
    links. ``dˢ`` is the realized degree in the sampled sparsified graph.
    """

    graphs: list[ConflictGraph]
    ecdf: EcdfModel
    overhead: OverheadModel
    n_samples: int = 200
    seed: int = 0
    _draws: list[tuple[int, np.ndarray]] = field(init=False, repr=False)

    def __post_init__(self):
        if not self.graphs:
            raise ValueError("need at least one graph")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        rng = np.random.default_rng(self.seed)
        self._draws = []
        for i in range(self.n_samples):
            gi = i % len(self.graphs)
            self._draws.append((gi, self.ecdf.sample(self.graphs[gi].vertex_count, rng)))

    def threshold(self, eta: float) -> float:
        if eta >= 1:
            return np.inf
        return quantile_threshold(self.ecdf, eta)

    def sample_value(self, g: ConflictGraph, u: np.ndarray, u_eta: float) -> float:
        retained = u > u_eta
        if not retained.any():
            return 0.0
        d_s = kernels.induced_degrees(g.indptr, g.indices, retained)
        if self.overhead.mode == "csma":
            return float(np.sum(u[retained] * csma_win_probability(self.overhead.W, d_s[retained])))
        weights = np.where(retained, u, 0.0)
        mis, _, _ = kernels.lgs_rounds(g.indptr, g.indices, weights, retained)
        if not mis.any():
            return 0.0
        keep = 1.0 - np.atleast_1d(overhead_fraction(self.overhead, d_s[mis] + 1))
        return float(np.sum(u[mis] * keep))

    def __call__(self, eta: float) -> float:
        u_eta = self.threshold(float(eta))
        total = 0.0
        for gi, u in self._draws:
            total += self.sample_value(self.graphs[gi], u, u_eta)
        return total / len(self._draws)


def net_utility_objective(eta: float, graphs, ecdf: EcdfModel, m: OverheadModel, rng=0,
                          n_samples: int = 200) -> float:
    """One-shot evaluation; build a ``NetUtilityObjective`` to reuse draws across eta."""
    if not (0 < eta <= 1):
        raise ValueError("eta must lie in (0, 1]")
    seed = int(rng.integers(2**63)) if isinstance(rng, np.random.Generator) else int(rng)
    return NetUtilityObjective(list(graphs), ecdf, m, n_samples, seed)(eta)


@dataclass
class PeakSearchResult:
    x: float
    value: float
    iterations: int
    evaluations: int
    # (x_l, x_m, x_r) after initialization and after every iteration
    brackets: list[tuple[float, float, float]]


def peak_search(f, a: float, b: float, epsilon: float, max_iter: int = 200) -> PeakSearchResult:
    """Locate the maximizer of a quasi-concave ``f`` on ``[a, b]`` within ``epsilon``.

    Keeps a bracket ``[x_l, x_r]`` with an interior probe ``x_m``. Each
    iteration ranks the three points, probes the midpoint ``x_3`` between the
    best point and a neighbor, and keeps the part of the bracket that must
    hold the peak. The bracket shrinks to at most 3/4 of its width per
    iteration, so about ``2.41·log2((b - a)/epsilon)`` iterations suffice.

    When the best point is an interior probe off the bracket center, the
    probe goes to its longer side; a best point on the bracket edge with a
    failed probe gets a fresh midpoint as its new interior point. If ``f`` is
    not quasi-concave (interior point strictly worst) the bracket moves to the
    better half and the result is a local peak.
    """
    if not a < b:
        raise ValueError("need a < b")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    cache: dict[float, float] = {}

    def ev(x: float) -> float:
        if x not in cache:
            cache[x] = float(f(x))
        return cache[x]

    xl, xr = float(a), float(b)
    xm = 0.5 * (xl + xr)
    brackets = [(xl, xm, xr)]
    it = 0
    while xr - xl > epsilon and it < max_iter:
        it += 1
        # ties prefer the interior point, then the left edge
        pts = [xm, xl, xr]
        vals = [ev(x) for x in pts]
        i1 = int(np.argmax(vals))
        x1 = pts[i1]
        if i1 == 0:
            left, right = xm - xl, xr - xm
            if abs(left - right) > 1e-12 * (xr - xl):
                x2 = xl if left > right else xr
            else:
                x2 = xl if vals[1] >= vals[2] else xr
        elif vals[0] >= vals[3 - i1]:
            x2 = xm
        else:
            # both edges beat the interior point: not quasi-concave
            if vals[1] >= vals[2]:
                xr = xm
            else:
                xl = xm
            xm = 0.5 * (xl + xr)
            brackets.append((xl, xm, xr))
            continue
        x3 = 0.5 * (x1 + x2)
        if ev(x3) >= ev(x1):
            xl, xr = min(x1, x2), max(x1, x2)
            xm = x3
        elif x1 == xm:
            if x2 < x1:
                xl = x3
            else:
                xr = x3
        else:
            if x2 < x1:
                xl = x3
            else:
                xr = x3
            xm = 0.5 * (xl + xr)
        brackets.append((xl, xm, xr))
    pts = [xm, xl, xr]
    vals = [ev(x) for x in pts]
    i = int(np.argmax(vals))
    return PeakSearchResult(pts[i], vals[i], it, len(cache), brackets)
