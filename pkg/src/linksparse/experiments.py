"""Reproducible experiment harness: datasets, eCDF collection, sweeps, ratio reports.

Every RNG consumer gets its own sub-seed derived from the master seed and a
role string, so adding a policy or a dataset row never perturbs the draws of
the others.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .ecdf import EcdfModel, load_ecdf
from .gcn import GcnModel, gcn_forward, load_model
from .graphs import ConflictGraph, generate_ba, generate_er, load_graph, save_graph
from .policy import POLICY_ALIASES, PolicySpec, apply_policy
from .schedulers import lgs_schedule, validate_independent
from .traffic import PROTOCOLS, TimingConfig, TrafficConfig, run_episode

__all__ = [
    "DatasetRow",
    "TABLE_PRESETS",
    "preset_rows",
    "derive_seed",
    "generate_datasets",
    "load_dataset",
    "collect_ecdf",
    "PolicyEntry",
    "ExperimentConfig",
    "run_sweep",
    "report_ratios",
    "write_rows",
    "read_rows",
    "aggregate",
]

DESK_SCALE = 10


def derive_seed(master: int, role: str) -> int:
    """64-bit sub-seed from ``sha256(master:role)``."""
    h = hashlib.sha256(f"{int(master)}:{role}".encode()).digest()
    return int.from_bytes(h[:8], "little")


@dataclass(frozen=True)
class DatasetRow:
    """One grid block: every ``(size, param)`` pair gets ``instances`` graphs.

    ``param_kind`` is ``avg_degree`` (ER), ``k`` (edge probability, ER), ``m``
    (BA attachment) or ``k_m`` (BA with ``m = size·k``).
    """

    model: str
    sizes: tuple
    params: tuple
    param_kind: str
    instances: int

    def __post_init__(self):
        if self.model not in ("er", "ba"):
            raise ValueError(f"unknown graph model {self.model!r}")
        allowed = {"er": ("avg_degree", "k"), "ba": ("m", "k_m")}[self.model]
        if self.param_kind not in allowed:
            raise ValueError(f"{self.model} rows take {allowed}, got {self.param_kind!r}")
        if self.instances < 1 or not self.sizes or not self.params:
            raise ValueError("empty dataset row")

    @property
    def cell_count(self) -> int:
        return len(self.sizes) * len(self.params) * self.instances


_K_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))
_SIZES = (100, 150, 200, 250, 300)

TABLE_PRESETS: dict[str, tuple[DatasetRow, ...]] = {
    "er-train": (
        DatasetRow("er", _SIZES, (2, 5, 7.5, 10, 12.5), "avg_degree", 200),
        DatasetRow("er", (30, 100), _K_GRID, "k", 50),
    ),
    "ba-train": (
        DatasetRow("ba", _SIZES, (2, 5, 7.5, 10, 12.5), "m", 200),
        DatasetRow("ba", (30, 100), _K_GRID, "k_m", 50),
    ),
    "er-test": (DatasetRow("er", _SIZES, (2, 5, 10, 15, 20), "avg_degree", 20),),
    "ba-test": (
        DatasetRow("ba", _SIZES, (2, 5, 10, 15, 20), "m", 20),
        DatasetRow("ba", (300, 400, 500), (25, 30, 35, 40, 45, 50), "m", 20),
    ),
}


def preset_rows(name: str, full: bool = False) -> tuple[DatasetRow, ...]:
    """Preset grid; without ``full`` the instance counts shrink tenfold (at least 1)."""
    if name not in TABLE_PRESETS:
        raise ValueError(f"unknown dataset preset {name!r}; choose from {sorted(TABLE_PRESETS)}")
    rows = TABLE_PRESETS[name]
    if full:
        return rows
    return tuple(DatasetRow(r.model, r.sizes, r.params, r.param_kind, max(1, r.instances // DESK_SCALE))
                 for r in rows)


def row_from_dict(doc: dict) -> DatasetRow:
    return DatasetRow(doc["model"], tuple(doc["sizes"]), tuple(doc["params"]), doc["param_kind"],
                      int(doc["instances"]))


def _instance(row: DatasetRow, n: int, param: float, seed: int) -> ConflictGraph:
    if row.param_kind == "avg_degree":
        g, avg = generate_er(n, param, seed), float(param)
    elif row.param_kind == "k":
        g, avg = generate_er(n, param * (n - 1), seed), float(param * n)
    elif row.param_kind == "m":
        g, avg = generate_ba(n, param, seed), 2.0 * param
    else:
        g, avg = generate_ba(n, param * n, seed), 2.0 * param * n
    meta = dict(g.metadata)
    meta.update({"param_kind": row.param_kind, "param": param, "degree_bin": avg})
    return ConflictGraph(g.vertex_count, g.indptr, g.indices, meta)


def _name(row: DatasetRow, n: int, param: float, i: int) -> str:
    return f"{row.model}_n{n}_{row.param_kind}{param:g}_{i:03d}"


def generate_datasets(rows, seed: int, out_dir=None) -> list[tuple[str, ConflictGraph]]:
    """Generate every grid cell instance; write ``<name>.json`` files when ``out_dir`` is set.

    The degree bin stored in the metadata is the generator's nominal average
    degree (``2m`` for BA, ``n·k`` for probability rows).
    """
    out = []
    for row in rows:
        for n in row.sizes:
            for param in row.params:
                for i in range(row.instances):
                    name = _name(row, n, param, i)
                    g = _instance(row, int(n), param, derive_seed(seed, f"graph:{name}"))
                    out.append((name, g))
    if out_dir is not None:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        for name, g in out:
            save_graph(d / f"{name}.json", g)
    return out


def load_dataset(path) -> list[tuple[str, ConflictGraph]]:
    """Load all ``*.json`` graphs in a directory, sorted by name."""
    d = Path(path)
    if not d.is_dir():
        raise FileNotFoundError(f"dataset directory {d} does not exist")
    files = sorted(d.glob("*.json"))
    if not files:
        raise FileNotFoundError(f"no graph files in {d}")
    return [(f.stem, load_graph(f)) for f in files]


def collect_ecdf(graphs, protocol: str, traffic: TrafficConfig, seed: int, names=None) -> np.ndarray:
    """Per-link per-slot utilities from zero-threshold episodes on ``graphs``."""
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}")
    names = names or [f"g{i}" for i in range(len(graphs))]
    chunks = []
    for name, g in zip(names, graphs):
        sink: list = []
        run_episode(g, PolicySpec("zero"), protocol, traffic, derive_seed(seed, f"ecdf:{name}"),
                    utility_sink=sink)
        chunks.append(np.concatenate(sink) if sink else np.zeros(0))
    return np.concatenate(chunks) if chunks else np.zeros(0)


@dataclass
class PolicyEntry:
    """A policy to sweep. ``model`` is needed for the z-dependent kinds."""

    kind: str
    eta: float = 0.0
    model: GcnModel | None = None
    hybrid_degree: int | None = None
    label: str = ""

    def __post_init__(self):
        self.kind = POLICY_ALIASES.get(self.kind, self.kind)
        if self.kind in ("gcn", "hybrid", "baseline_scaled") and self.model is None:
            raise ValueError(f"policy {self.kind!r} needs a trained model")
        if not self.label:
            self.label = self.kind if self.kind == "zero" else f"{self.kind}@{self.eta:g}"

    def spec(self, g: ConflictGraph, ecdf: EcdfModel | None, z=None) -> PolicySpec:
        if self.kind != "zero" and self.eta > 0 and ecdf is None:
            raise ValueError(f"policy {self.label} needs an eCDF for its global threshold")
        if self.model is not None and z is None:
            z = gcn_forward(self.model, g)[0]
        return PolicySpec.from_ecdf(self.kind, self.eta, ecdf, z=z, hybrid_degree=self.hybrid_degree)


@dataclass
class ExperimentConfig:
    seed: int = 0
    protocol: str = "lgs_deadline"
    mode: str = "episode"
    dataset: str | None = None
    preset: str | None = None
    full: bool = False
    ecdf: str | None = None
    policies: list[dict] = field(default_factory=lambda: [{"kind": "zero"}])
    traffic: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    states_per_graph: int = 1
    workers: int = 1
    out: str | None = None

    def __post_init__(self):
        self.protocol = self.protocol.replace("-", "_")
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.mode not in ("episode", "static"):
            raise ValueError("mode must be 'episode' or 'static'")
        if self.states_per_graph < 1 or self.workers < 1:
            raise ValueError("states_per_graph and workers must be >= 1")

    @classmethod
    def from_file(cls, path) -> ExperimentConfig:
        return cls(**json.loads(Path(path).read_text()))

    def traffic_config(self) -> TrafficConfig:
        return TrafficConfig(timing=TimingConfig(**self.timing), **self.traffic)

    def load_policies(self) -> list[PolicyEntry]:
        out = []
        for doc in self.policies:
            doc = dict(doc)
            path = doc.pop("model", None)
            if path is not None and not Path(path).exists():
                raise FileNotFoundError(f"model file {path} does not exist")
            out.append(PolicyEntry(model=load_model(path) if path else None, **doc))
        return out

    def load_ecdf(self) -> EcdfModel | None:
        if self.ecdf is None:
            return None
        if not Path(self.ecdf).exists():
            raise FileNotFoundError(f"eCDF file {self.ecdf} does not exist")
        return load_ecdf(self.ecdf)

    def load_graphs(self) -> list[tuple[str, ConflictGraph]]:
        if self.dataset:
            return load_dataset(self.dataset)
        if self.preset:
            return generate_datasets(preset_rows(self.preset, self.full), derive_seed(self.seed, "dataset"))
        raise ValueError("config needs either 'dataset' or 'preset'")


METRIC_FIELDS = (
    "total_utility",
    "mean_backlog",
    "mean_post_degree",
    "message_total",
    "collision_total",
    "retained_count",
    "sparse_edge_count",
)


def _episode_rows(args) -> list[dict]:
    name, g, policies, protocol, traffic, ecdf, seed = args
    rows = []
    ep_seed = derive_seed(seed, f"episode:{name}")
    for p in policies:
        m = run_episode(g, p.spec(g, ecdf), protocol, traffic, ep_seed)
        rows.append(
            {
                "instance": name,
                "state": 0,
                "degree_bin": g.metadata.get("degree_bin", ""),
                "n": g.vertex_count,
                "policy": p.label,
                "kind": p.kind,
                "eta": p.eta,
                "protocol": protocol,
                "total_utility": m.total_utility,
                "mean_backlog": m.mean_backlog,
                "mean_post_degree": m.mean_post_degree,
                "message_total": m.message_total,
                "collision_total": m.collision_total,
                "retained_count": m.retained_fraction * g.vertex_count,
                "sparse_edge_count": m.mean_post_degree * m.retained_fraction * g.vertex_count / 2,
            }
        )
    return rows


def _static_rows(args) -> list[dict]:
    """Identical network states: utilities drawn from the eCDF, ideal greedy scheduling."""
    name, g, policies, protocol, states, ecdf, seed = args
    rng = np.random.default_rng(derive_seed(seed, f"static:{name}"))
    zs = {id(p): (gcn_forward(p.model, g)[0] if p.model is not None else None) for p in policies}
    rows = []
    for k in range(states):
        u = ecdf.sample(g.vertex_count, rng)
        for p in policies:
            s = apply_policy(g, u, p.spec(g, ecdf, zs[id(p)]))
            sched = lgs_schedule(s)
            assert validate_independent(g, sched.scheduled)
            n_ret = s.retained_count
            rows.append(
                {
                    "instance": name,
                    "state": k,
                    "degree_bin": g.metadata.get("degree_bin", ""),
                    "n": g.vertex_count,
                    "policy": p.label,
                    "kind": p.kind,
                    "eta": p.eta,
                    "protocol": "lgs",
                    "total_utility": sched.utility(u),
                    "mean_backlog": 0.0,
                    "mean_post_degree": float(s.post_degrees[s.retained].mean()) if n_ret else 0.0,
                    "message_total": sched.message_count,
                    "collision_total": 0,
                    "retained_count": n_ret,
                    "sparse_edge_count": s.sparse_edge_count,
                }
            )
    return rows


def run_sweep(graphs, policies: list[PolicyEntry], protocol: str, traffic: TrafficConfig | None,
              seed: int, ecdf: EcdfModel | None = None, mode: str = "episode", states_per_graph: int = 1,
              workers: int = 1) -> list[dict]:
    """One row per (instance, state, policy).

    ``episode`` mode simulates ``traffic.horizon`` slots per policy; all
    policies on an instance share one episode seed, hence identical traffic.
    ``static`` mode scores ``states_per_graph`` utility vectors drawn from
    ``ecdf`` with the ideal greedy scheduler. A zero-threshold reference is
    added when the policy list lacks one.
    """
    if not any(p.kind == "zero" for p in policies):
        policies = [PolicyEntry("zero")] + list(policies)
    labels = [p.label for p in policies]
    if len(set(labels)) != len(labels):
        raise ValueError("policy labels must be unique")
    if mode == "episode":
        if traffic is None:
            raise ValueError("episode mode needs a traffic config")
        jobs = [(name, g, policies, protocol, traffic, ecdf, seed) for name, g in graphs]
        fn = _episode_rows
    elif mode == "static":
        if ecdf is None:
            raise ValueError("static mode needs an eCDF")
        jobs = [(name, g, policies, protocol, states_per_graph, ecdf, seed) for name, g in graphs]
        fn = _static_rows
    else:
        raise ValueError(f"unknown sweep mode {mode!r}")
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            chunks = list(pool.map(fn, jobs))
    else:
        chunks = [fn(j) for j in jobs]
    return [r for c in chunks for r in c]


def report_ratios(rows: list[dict], reference: str = "zero") -> list[dict]:
    """Each metric divided by the reference policy's on the same instance and state.

    A zero denominator gives 1.0 when the numerator is also zero, else ``inf``.
    """
    ref = {(r["instance"], str(r["state"])): r for r in rows if r["policy"] == reference}
    out = []
    for r in rows:
        key = (r["instance"], str(r["state"]))
        if key not in ref:
            raise ValueError(f"no reference row {reference!r} for instance {key[0]} state {key[1]}")
        base = ref[key]
        row = {k: r[k] for k in ("instance", "state", "degree_bin", "policy", "kind", "eta", "protocol")}
        for f in METRIC_FIELDS:
            num, den = float(r[f]), float(base[f])
            row[f"{f}_ratio"] = num / den if den != 0 else (1.0 if num == 0 else math.inf)
        out.append(row)
    return out


def aggregate(rows: list[dict], keys=("degree_bin", "policy")) -> list[dict]:
    """Mean of every numeric column per group, in first-seen group order."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in keys), []).append(r)
    out = []
    for key, members in groups.items():
        row = dict(zip(keys, key))
        row["count"] = len(members)
        for col in members[0]:
            if col in keys:
                continue
            try:
                row[col] = float(np.mean([float(m[col]) for m in members]))
            except (TypeError, ValueError):
                continue
        out.append(row)
    return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_rows(path, rows: list[dict]) -> None:
    """CSV with a fixed column order; floats at full precision so reruns are byte-identical."""
    if not rows:
        Path(path).write_text("")
        return
    cols = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in cols])


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)
