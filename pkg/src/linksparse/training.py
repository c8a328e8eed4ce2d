"""Constrained unsupervised training of the threshold GCN (alternating SGD)."""
from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .ecdf import EPS, EcdfModel
from .gcn import GcnModel, flatten_grads, gcn_backward, gcn_forward
from .graphs import ConflictGraph
from .policy import PolicySpec, apply_policy, cutoff_probabilities, quantile_threshold
from .schedulers import Schedule, lgs_schedule

__all__ = [
    "UtilityProxy",
    "TrainConfig",
    "TrainLog",
    "neighbor_sum",
    "post_sparsification_degrees",
    "expected_sparse_edges",
    "expected_utility_proxy",
    "grad_edges_wrt_z",
    "grad_utility_wrt_z",
    "grad_utility_wrt_p",
    "alt_sgd_train",
    "default_proxy",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class UtilityProxy:
    """Per-link expected utility as a function of the cut-off probability.

    ``simple``: ``a1 (1 - p)``; ``degree``: ``a2 (1 - p)(1 - a3 dˢ)``.
    """

    kind: str = "degree"
    a1: float = 1.0
    a2: float = 1.0
    a3: float = 0.01

    def __post_init__(self):
        if self.kind == "simple":
            if self.a1 <= 0:
                raise ValueError("a1 must be positive")
        elif self.kind == "degree":
            if self.a2 <= 0 or not (0 < self.a3 < 1):
                raise ValueError("need a2 > 0 and 0 < a3 < 1")
        else:
            raise ValueError(f"unknown proxy kind {self.kind!r}")


def default_proxy(graphs, kind: str = "degree") -> UtilityProxy:
    """``a3 = 1 / (max degree + 1)`` keeps ``1 - a3 dˢ`` nonnegative on ``graphs``."""
    max_deg = max((int(g.degrees.max()) if g.vertex_count else 0) for g in graphs)
    return UtilityProxy(kind=kind, a3=1.0 / (max_deg + 1))


def neighbor_sum(g: ConflictGraph, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.bincount(g.rows, weights=x[g.indices], minlength=g.vertex_count)


def post_sparsification_degrees(g: ConflictGraph, p) -> np.ndarray:
    """Expected degree after sparsification, ``d(v) - Σ_{i∈N(v)} p(i)``."""
    return g.degrees - neighbor_sum(g, p)


def expected_sparse_edges(g: ConflictGraph, p) -> float:
    p = np.asarray(p, dtype=np.float64)
    d_s = post_sparsification_degrees(g, p)
    return 0.5 * float(np.sum(d_s * (1.0 - p)))


def expected_utility_proxy(g: ConflictGraph, p, proxy: UtilityProxy) -> float:
    p = np.asarray(p, dtype=np.float64)
    if proxy.kind == "simple":
        return float(np.sum(proxy.a1 * (1.0 - p)))
    d_s = post_sparsification_degrees(g, p)
    return float(np.sum(proxy.a2 * (1.0 - p) * (1.0 - proxy.a3 * d_s)))


def grad_utility_wrt_p(g: ConflictGraph, p, proxy: UtilityProxy) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if proxy.kind == "simple":
        return np.full(g.vertex_count, -proxy.a1)
    d_s = post_sparsification_degrees(g, p)
    # own term, plus neighbors i whose dˢ(i) drops by one per unit of p(v)
    own = -proxy.a2 * (1.0 - proxy.a3 * d_s)
    cross = proxy.a2 * proxy.a3 * neighbor_sum(g, 1.0 - p)
    return own + cross


def _chain(z, u_eta: float, ecdf: EcdfModel) -> np.ndarray:
    """``dp/dz = pdf(z·u_eta)·u_eta``."""
    return ecdf.pdf(np.asarray(z, dtype=np.float64) * u_eta) * u_eta


def grad_edges_wrt_z(g: ConflictGraph, z, u_eta: float, ecdf: EcdfModel) -> np.ndarray:
    p = cutoff_probabilities(z, u_eta, ecdf)
    return -post_sparsification_degrees(g, p) * _chain(z, u_eta, ecdf)


def grad_utility_wrt_z(g: ConflictGraph, z, u_eta: float, ecdf: EcdfModel, proxy: UtilityProxy) -> np.ndarray:
    p = cutoff_probabilities(z, u_eta, ecdf)
    return grad_utility_wrt_p(g, p, proxy) * _chain(z, u_eta, ecdf)


@dataclass
class TrainConfig:
    lr: float = 1e-4
    decay: float = 0.996
    clip_norm: float = 0.05
    batch_size: int = 100
    epochs: int = 25
    proxy: UtilityProxy | None = None
    scheduler: str = "lgs"

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if not (0 < self.decay <= 1):
            raise ValueError("decay must lie in (0, 1]")
        if self.clip_norm <= 0:
            raise ValueError("clip norm must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")


@dataclass
class TrainLog:
    rows: list[dict] = field(default_factory=list)
    epoch_violation: list[float] = field(default_factory=list)
    skipped: int = 0
    applied_norms: list[float] = field(default_factory=list)

    def write_csv(self, path) -> None:
        cols = ["epoch", "batch", "alpha", "branch_fraction", "mean_utility_ratio", "mean_expected_edges"]
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols)
            w.writeheader()
            for r in self.rows:
                w.writerow({k: r[k] for k in cols})


def contend(s, scheduler: str) -> Schedule:
    if scheduler != "lgs":
        # training-time contention: ideal greedy only; timing models do not
        # change which links the greedy solver picks
        if scheduler not in ("lgs_deadline", "lgs_flexible"):
            raise ValueError(f"unsupported training scheduler {scheduler!r}")
    return lgs_schedule(s)


def sample_step(model: GcnModel, g: ConflictGraph, u, eta: float, ecdf: EcdfModel, cfg: TrainConfig,
                proxy: UtilityProxy) -> dict:
    """One Alt-SGD sample: pick the branch and return the parameter gradient."""
    z, cache = gcn_forward(model, g)
    u_eta = quantile_threshold(ecdf, eta)
    s_gcn = apply_policy(g, u, PolicySpec("gcn", eta, u_eta, z=z))
    s_base = apply_policy(g, u, PolicySpec("baseline", eta, u_eta))
    util_gcn = contend(s_gcn, cfg.scheduler).utility(u)
    util_base = contend(s_base, cfg.scheduler).utility(u)
    violated = util_gcn < util_base
    if violated:
        dj_dz = -grad_utility_wrt_z(g, z, u_eta, ecdf, proxy)
    else:
        dj_dz = grad_edges_wrt_z(g, z, u_eta, ecdf)
    grad = flatten_grads(*gcn_backward(model, g, cache, dj_dz))
    p = cutoff_probabilities(z, u_eta, ecdf)
    return {
        "grad": grad,
        "violated": violated,
        "utility_ratio": util_gcn / util_base if util_base > 0 else 1.0,
        "expected_edges": expected_sparse_edges(g, p),
    }


def alt_sgd_train(model: GcnModel, dataset: list[ConflictGraph], ecdf: EcdfModel, cfg: TrainConfig,
                  rng: np.random.Generator, progress=None) -> tuple[GcnModel, TrainLog]:
    """Alternating SGD: descend expected sparse edges while the GCN policy's
    schedule utility keeps up with the baseline, otherwise ascend the utility
    proxy. Every sample gradient is rescaled to norm ``clip_norm``; a batch of
    them is applied in order, then the learning rate decays by ``decay``.

    One epoch visits every graph once, in a fresh random order, with fresh
    i.i.d. utilities from ``ecdf`` and a fresh ``eta ~ U(0, 1)``.
    """
    if not dataset:
        raise ValueError("empty training set")
    proxy = cfg.proxy or default_proxy(dataset)
    model = model.copy()
    omega = model.flat()
    alpha = cfg.lr
    queue: list[np.ndarray] = []
    out = TrainLog()
    batch = 0
    stats: list[dict] = []
    for epoch in range(cfg.epochs):
        violations = 0
        order = rng.permutation(len(dataset))
        for idx in order:
            g = dataset[int(idx)]
            eta = float(rng.uniform(EPS, 1.0 - EPS))
            u = ecdf.sample(g.vertex_count, rng)
            step = sample_step(model, g, u, eta, ecdf, cfg, proxy)
            violations += step["violated"]
            stats.append(step)
            norm = float(np.linalg.norm(step["grad"]))
            if norm == 0.0 or not np.isfinite(norm):
                out.skipped += 1
            else:
                queue.append(cfg.clip_norm * step["grad"] / norm)
            if len(queue) >= cfg.batch_size:
                for gvec in queue:
                    out.applied_norms.append(float(np.linalg.norm(gvec)))
                    omega = omega - alpha * gvec
                model = model.with_flat(omega)
                batch += 1
                out.rows.append(
                    {
                        "epoch": epoch,
                        "batch": batch,
                        "alpha": alpha,
                        "branch_fraction": float(np.mean([s["violated"] for s in stats])),
                        "mean_utility_ratio": float(np.mean([s["utility_ratio"] for s in stats])),
                        "mean_expected_edges": float(np.mean([s["expected_edges"] for s in stats])),
                    }
                )
                stats = []
                queue = []
                alpha *= cfg.decay
        out.epoch_violation.append(violations / len(dataset))
        log.info("epoch %d: violation fraction %.3f, alpha %.3g", epoch, out.epoch_violation[-1], alpha)
        if progress is not None:
            progress(epoch, out)
    model.metadata = {"epochs": cfg.epochs, "final_alpha": alpha, "batches": batch,
                      "config": {k: v for k, v in asdict(cfg).items() if k != "proxy"},
                      "proxy": asdict(proxy)}
    return model, out
