"""Time-slotted queueing simulation of one scheduling instance."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .graphs import ConflictGraph
from .policy import PolicySpec, apply_policy
from .schedulers import (
    apply_fixed_deadline,
    apply_flexible_overhead,
    csma_schedule,
    lgs_schedule,
    validate_independent,
)

__all__ = [
    "PROTOCOLS",
    "TimingConfig",
    "TrafficConfig",
    "EpisodeMetrics",
    "compute_utility",
    "step_queues",
    "sample_link_rates",
    "sample_arrivals",
    "expected_rate",
    "run_episode",
]

# "lgs" is the ideal greedy scheduler (no signaling cost), used for eCDF
# collection and as the training-time contention function.
PROTOCOLS = ("lgs", "lgs_deadline", "lgs_flexible", "qcsma", "csma")

RATE_MEAN = 50.0
RATE_STD = 25.0
RATE_CLIP = (0.0, 100.0)


@lru_cache(maxsize=None)
def expected_rate(draws: int = 1_000_000, seed: int = 20240601) -> float:
    """Monte-Carlo mean of the ceil-and-clip link-rate transform."""
    return float(sample_link_rates(draws, np.random.default_rng(seed)).mean())


@dataclass(frozen=True)
class TimingConfig:
    slot_ms: float = 100.0
    tau_ms: float = 1.0
    comm_ms: float = 70.0
    deadline_messages: int = 30
    contention_window: int = 32


@dataclass(frozen=True)
class TrafficConfig:
    load: float = 0.03
    horizon: int = 200
    rate_mean: float = RATE_MEAN
    rate_std: float = RATE_STD
    rate_clip: tuple[float, float] = RATE_CLIP
    mean_rate: float = field(default_factory=expected_rate)
    timing: TimingConfig = field(default_factory=TimingConfig)

    def __post_init__(self):
        if self.load <= 0:
            raise ValueError("traffic load must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")

    @property
    def arrival_rate(self) -> float:
        return self.load * self.mean_rate


@dataclass
class EpisodeMetrics:
    mean_backlog: float
    mean_post_degree: float
    total_utility: float
    message_total: int
    collision_total: int
    served_total: float
    arrived_total: int
    retained_fraction: float
    trace: list[tuple] | None = None

    def as_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "trace"}
        return d


def compute_utility(q, r) -> np.ndarray:
    return np.asarray(q, dtype=np.float64) * np.asarray(r, dtype=np.float64)


def step_queues(q, r, transmit, multipliers, arrivals) -> tuple[np.ndarray, np.ndarray]:
    """Serve ``min(mult·r, q)`` on transmitting links, then add arrivals.

    Returns ``(q_next, served)``.
    """
    q = np.asarray(q, dtype=np.float64)
    cap = np.asarray(multipliers, dtype=np.float64) * np.asarray(r, dtype=np.float64)
    served = np.where(np.asarray(transmit, dtype=bool), np.minimum(cap, q), 0.0)
    q_next = q - served + np.asarray(arrivals, dtype=np.float64)
    return np.maximum(q_next, 0.0), served


def sample_link_rates(n, rng, mean=RATE_MEAN, std=RATE_STD, clip=RATE_CLIP) -> np.ndarray:
    """``clip(ceil(N(mean, std)), lo, hi)``: ceiling first, then clipping."""
    return np.clip(np.ceil(rng.normal(mean, std, size=n)), clip[0], clip[1])


def sample_arrivals(lam: float, n, rng) -> np.ndarray:
    if lam < 0:
        raise ValueError("arrival rate must be nonnegative")
    return rng.poisson(lam, size=n)


def _streams(rng) -> tuple[np.random.Generator, np.random.Generator]:
    if isinstance(rng, np.random.Generator):
        a, b = rng.spawn(2)
    else:
        ss = rng if isinstance(rng, np.random.SeedSequence) else np.random.SeedSequence(rng)
        a, b = (np.random.default_rng(c) for c in ss.spawn(2))
    return a, b


def run_episode(
    g: ConflictGraph,
    spec: PolicySpec,
    protocol: str,
    cfg: TrafficConfig,
    rng,
    trace: bool = False,
    check: bool = True,
    weight_transform=None,
    utility_sink: list | None = None,
    on_slot=None,
) -> EpisodeMetrics:
    """Simulate ``cfg.horizon`` slots of threshold policy + contention on ``g``.

    ``rng`` is a Generator, SeedSequence or int seed. Traffic (rates and
    arrivals) and contention randomness come from separate child streams, so
    two policies run with the same seed see identical traffic. When
    ``utility_sink`` is a list, each slot's utility vector is appended to it.
    ``on_slot(t, q_before, q_after, served, arrivals)`` is called after every
    queue update.
    """
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}")
    traffic_rng, contention_rng = _streams(rng)
    n, T = g.vertex_count, cfg.horizon
    lam = cfg.arrival_rate
    tm = cfg.timing
    rates = sample_link_rates((T, n), traffic_rng, cfg.rate_mean, cfg.rate_std, cfg.rate_clip)
    arrivals = sample_arrivals(lam, (T, n), traffic_rng)

    q = np.zeros(n)
    priority = np.zeros(n, dtype=bool)
    backlog_sum = 0.0
    degree_sum = 0
    retained_sum = 0
    utility = 0.0
    messages = 0
    collisions = 0
    served_total = 0.0
    rows = [] if trace else None

    for t in range(T):
        r = rates[t]
        u = compute_utility(q, r)
        if utility_sink is not None:
            utility_sink.append(u)
        s = apply_policy(g, u, spec)
        if protocol in ("qcsma", "csma"):
            sched = csma_schedule(
                s,
                tm.contention_window,
                weighted=protocol == "qcsma",
                priority=priority & (q > 0),
                rng=contention_rng,
                weight_transform=weight_transform,
            )
            transmit = sched.scheduled
            mult = transmit.astype(np.float64)
            collisions += sched.collision_count
        else:
            sched = lgs_schedule(s)
            messages += sched.message_count
            if protocol == "lgs_deadline":
                transmit, mult = apply_fixed_deadline(sched, s, tm.deadline_messages)
            elif protocol == "lgs_flexible":
                mult = apply_flexible_overhead(sched, s, tm.tau_ms, tm.slot_ms, tm.comm_ms)
                transmit = sched.scheduled
            else:
                transmit = sched.scheduled
                mult = transmit.astype(np.float64)
        if check:
            assert validate_independent(g, sched.scheduled), "schedule is not independent"
            assert not np.any(sched.scheduled & ~s.retained), "scheduled a withdrawn link"
        q_prev = q
        q_prev_total = q.sum()
        q, served = step_queues(q, r, transmit, mult, arrivals[t])
        if on_slot is not None:
            on_slot(t, q_prev, q, served, arrivals[t])
        if check:
            assert abs(q.sum() - (q_prev_total - served.sum() + arrivals[t].sum())) <= 1e-9 * max(1.0, q_prev_total)
        priority = sched.scheduled
        utility += float(u[transmit].sum())
        backlog_sum += q.sum()
        degree_sum += int(s.post_degrees.sum())
        retained_sum += s.retained_count
        served_total += float(served.sum())
        if trace:
            rows.append((t + 1, s.retained_count, int(sched.scheduled.sum()), float(served.sum()),
                         float(q.mean()) if n else 0.0))

    return EpisodeMetrics(
        mean_backlog=float(backlog_sum / (n * T)) if n else 0.0,
        mean_post_degree=degree_sum / retained_sum if retained_sum else 0.0,
        total_utility=utility,
        message_total=messages,
        collision_total=collisions,
        served_total=served_total,
        arrived_total=int(arrivals.sum()),
        retained_fraction=retained_sum / (n * T) if n else 0.0,
        trace=rows,
    )


def write_trace(path, metrics: EpisodeMetrics) -> None:
    with open(path, "w") as fh:
        fh.write("t,retained_count,scheduled_count,served_packets,mean_backlog\n")
        for row in metrics.trace or []:
            fh.write(",".join(f"{x:.10g}" if isinstance(x, float) else str(x) for x in row) + "\n")
