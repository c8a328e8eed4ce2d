"""Contention functions: local greedy MaxWeight, timing models, and CSMA."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .graphs import ConflictGraph
from .policy import SparsifiedState

__all__ = [
    "Schedule",
    "lgs_schedule",
    "apply_fixed_deadline",
    "apply_flexible_overhead",
    "csma_schedule",
    "validate_independent",
]


@dataclass(frozen=True, eq=False)
class Schedule:
    scheduled: np.ndarray
    decision_round: np.ndarray | None = None
    message_count: int = 0
    collision_count: int = 0

    @property
    def rounds(self) -> int:
        if self.decision_round is None or self.decision_round.size == 0:
            return 0
        return int(max(self.decision_round.max(), 0))

    def utility(self, u) -> float:
        return float(np.asarray(u, dtype=np.float64)[self.scheduled].sum())


def lgs_schedule(s: SparsifiedState) -> Schedule:
    """Local greedy solver over the retained links.

    In every round each undecided link whose weight beats all its undecided
    retained neighbors (ties go to the lower index) is scheduled and mutes
    those neighbors. Each undecided link sends one RTS-like and one CTS-like
    broadcast per round, so ``message_count = 2 · Σ_rounds |undecided|``.
    ``decision_round`` is the round a link was scheduled or muted (-1 if it
    never contended).
    """
    g = s.graph
    scheduled, rounds, messages = kernels.lgs_rounds(g.indptr, g.indices, s.weights, s.retained)
    return Schedule(scheduled, rounds, messages)


def apply_fixed_deadline(schedule: Schedule, s: SparsifiedState, K: int):
    """Links whose neighborhood signaling (``dˢ + 1`` messages) fits in ``K`` transmit.

    Returns ``(transmit, multiplier)``; the multiplier is 1.0 for transmitters.
    """
    ok = schedule.scheduled & (s.post_degrees + 1 <= K)
    return ok, ok.astype(np.float64)


def apply_flexible_overhead(schedule: Schedule, s: SparsifiedState, tau_ms: float = 1.0,
                            slot_ms: float = 100.0, comm_ms: float = 70.0) -> np.ndarray:
    """Rate multiplier ``(slot - e) / comm`` with overhead ``e = (dˢ + 1)·tau``."""
    if not (0 < comm_ms < slot_ms):
        raise ValueError("need 0 < comm_ms < slot_ms")
    e = np.minimum(slot_ms, (s.post_degrees + 1) * tau_ms)
    mult = np.maximum(0.0, slot_ms - e) / comm_ms
    return np.where(schedule.scheduled, mult, 0.0)


def _sigmoid(w: np.ndarray) -> np.ndarray:
    out = np.empty_like(w)
    pos = w >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-w[pos]))
    ew = np.exp(w[~pos])
    out[~pos] = ew / (1.0 + ew)
    return out


def csma_schedule(
    s: SparsifiedState,
    W: int,
    weighted: bool,
    priority=None,
    rng: np.random.Generator | None = None,
    weight_transform: Callable[[np.ndarray], np.ndarray] | None = None,
) -> Schedule:
    """One slot of (Q-)CSMA contention over the retained links.

    Retained ``priority`` links transmit first and silence their retained
    neighbors. Every other retained link draws a backoff in ``[0, W-1]`` and
    wins only with a strictly earlier backoff than all contending neighbors;
    links tied at their neighborhood minimum collide. A weighted winner then
    transmits with probability ``e^w / (e^w + 1)``.

    ``weight_transform`` maps utilities before that activation probability
    (identity when ``None``).
    """
    if W < 1:
        raise ValueError("contention window must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    g = s.graph
    n = g.vertex_count
    prio = np.zeros(n, dtype=bool) if priority is None else np.asarray(priority, dtype=bool)
    prio = prio & s.retained
    if not validate_independent(g, prio):
        raise ValueError("priority links must form an independent set")
    blocked = np.zeros(n, dtype=bool)
    blocked[g.indices[prio[g.rows]]] = True
    contending = s.retained & ~prio & ~blocked
    backoff = rng.integers(0, W, size=n)
    winners, collided = kernels.csma_contend(g.indptr, g.indices, contending, backoff)
    if weighted:
        w = s.weights if weight_transform is None else np.asarray(weight_transform(s.weights), dtype=np.float64)
        p = _sigmoid(np.asarray(w, dtype=np.float64))
        winners = winners & (rng.random(n) < p)
    return Schedule(winners | prio, None, 0, int(collided.sum()))


def validate_independent(g: ConflictGraph, mask) -> bool:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (g.vertex_count,):
        raise ValueError("mask length does not match the graph")
    return not bool(np.any(mask[g.rows] & mask[g.indices]))

