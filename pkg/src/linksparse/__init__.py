"""Learned per-link contention thresholds for distributed wireless link scheduling.

Conflict graphs, a threshold-generating GCN trained with alternating
constrained SGD, a smooth utility CDF, threshold policies, distributed
schedulers, and a time-slotted queueing simulator.
"""
from __future__ import annotations

from .ecdf import EcdfModel, fit_ecdf, load_ecdf, save_ecdf
from .gcn import GcnModel, gcn_backward, gcn_forward, gcn_forward_local, load_model, save_model
from .graphs import (
    ConflictGraph,
    SpatialNetwork,
    generate_ba,
    generate_er,
    generate_spatial,
    load_graph,
    normalized_laplacian_apply,
    save_graph,
)
from .kernels import BACKEND
from .policy import PolicySpec, SparsifiedState, apply_policy, cutoff_probabilities
from .schedulers import (
    Schedule,
    apply_fixed_deadline,
    apply_flexible_overhead,
    csma_schedule,
    lgs_schedule,
    validate_independent,
)
from .search import NetUtilityObjective, OverheadModel, csma_win_probability, overhead_fraction, peak_search
from .traffic import EpisodeMetrics, TimingConfig, TrafficConfig, run_episode
from .training import TrainConfig, UtilityProxy, alt_sgd_train

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConflictGraph",
    "EcdfModel",
    "EpisodeMetrics",
    "GcnModel",
    "NetUtilityObjective",
    "OverheadModel",
    "PolicySpec",
    "Schedule",
    "SparsifiedState",
    "SpatialNetwork",
    "TimingConfig",
    "TrafficConfig",
    "TrainConfig",
    "UtilityProxy",
    "alt_sgd_train",
    "apply_fixed_deadline",
    "apply_flexible_overhead",
    "apply_policy",
    "csma_schedule",
    "csma_win_probability",
    "cutoff_probabilities",
    "fit_ecdf",
    "gcn_backward",
    "gcn_forward",
    "gcn_forward_local",
    "generate_ba",
    "generate_er",
    "generate_spatial",
    "lgs_schedule",
    "load_ecdf",
    "load_graph",
    "load_model",
    "normalized_laplacian_apply",
    "overhead_fraction",
    "peak_search",
    "run_episode",
    "save_ecdf",
    "save_graph",
    "save_model",
    "validate_independent",
]
