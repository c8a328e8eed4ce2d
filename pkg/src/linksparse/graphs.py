"""Conflict graphs, random generators and the normalized Laplacian operator."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np

from . import kernels

__all__ = [
    "ConflictGraph",
    "SpatialNetwork",
    "generate_er",
    "generate_ba",
    "generate_spatial",
    "spatial_from_positions",
    "normalized_laplacian_apply",
    "save_graph",
    "load_graph",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ConflictGraph:
    """Undirected simple graph over links, stored in CSR form.

    Attributes
    ----------
    vertex_count : int
    indptr, indices : ndarray of int64
        Neighbors of ``v`` are ``indices[indptr[v]:indptr[v+1]]``, sorted
        ascending with no duplicates and no self-loops.
    metadata : dict
        Generator provenance (model, params, seed); free-form.
    """

    vertex_count: int
    indptr: np.ndarray
    indices: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_edges(cls, n: int, edges, metadata: dict | None = None) -> ConflictGraph:
        if n < 0:
            raise ValueError("vertex count must be nonnegative")
        e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
        e = e.reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise ValueError("edge endpoint out of range")
        if np.any(e[:, 0] == e[:, 1]):
            raise ValueError("self-loops are not allowed")
        both = np.concatenate([e, e[:, ::-1]])
        if both.size:
            both = np.unique(both, axis=0)  # lexsorted by (src, dst)
        src = both[:, 0] if both.size else np.empty(0, dtype=np.int64)
        dst = both[:, 1] if both.size else np.empty(0, dtype=np.int64)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return cls(n, _frozen(indptr), _frozen(np.ascontiguousarray(dst)), dict(metadata or {}))

    @classmethod
    def from_adjacency(cls, adjacency, metadata: dict | None = None) -> ConflictGraph:
        a = np.asarray(adjacency)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.array_equal(a != 0, (a != 0).T):
            raise ValueError("adjacency must be symmetric")
        iu = np.argwhere(np.triu(a != 0, k=1))
        return cls.from_edges(a.shape[0], iu, metadata)

    @cached_property
    def degrees(self) -> np.ndarray:
        return _frozen(np.diff(self.indptr))

    @property
    def edge_count(self) -> int:
        return int(self.indices.size // 2)

    @property
    def adjacency(self) -> list[list[int]]:
        return [self.neighbors(v).tolist() for v in range(self.vertex_count)]

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    @cached_property
    def rows(self) -> np.ndarray:
        """Source vertex of every CSR entry (paired with ``indices``)."""
        return _frozen(np.repeat(np.arange(self.vertex_count, dtype=np.int64), self.degrees))

    @cached_property
    def inv_sqrt_degrees(self) -> np.ndarray:
        d = self.degrees.astype(np.float64)
        out = np.zeros_like(d)
        np.divide(1.0, np.sqrt(d), out=out, where=d > 0)
        return _frozen(out)

    def edges(self) -> np.ndarray:
        """Each undirected edge once as ``(u, v)`` with ``u < v``."""
        keep = self.rows < self.indices
        return np.stack([self.rows[keep], self.indices[keep]], axis=1)

    def dense_adjacency(self) -> np.ndarray:
        a = np.zeros((self.vertex_count, self.vertex_count), dtype=np.int8)
        a[self.rows, self.indices] = 1
        return a

    def induced_subgraph(self, mask) -> tuple[ConflictGraph, np.ndarray]:
        """Induced subgraph on ``mask`` with compact labels, plus the original ids."""
        mask = np.asarray(mask, dtype=bool)
        ids = np.flatnonzero(mask)
        relabel = np.full(self.vertex_count, -1, dtype=np.int64)
        relabel[ids] = np.arange(ids.size)
        e = self.edges()
        keep = mask[e[:, 0]] & mask[e[:, 1]]
        return ConflictGraph.from_edges(ids.size, relabel[e[keep]]), ids

    def permute(self, perm) -> ConflictGraph:
        """Relabel vertex ``v`` as ``perm[v]``."""
        perm = np.asarray(perm, dtype=np.int64)
        return ConflictGraph.from_edges(self.vertex_count, perm[self.edges()], self.metadata)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConflictGraph):
            return NotImplemented
        return (
            self.vertex_count == other.vertex_count
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"ConflictGraph(n={self.vertex_count}, m={self.edge_count})"


@dataclass(frozen=True, eq=False)
class SpatialNetwork:
    """Devices in a square, the links between them, and the links' conflict graph."""

    device_positions: np.ndarray
    links: np.ndarray
    conflict: ConflictGraph
    link_radius: float
    interference_radius: float


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def generate_er(n: int, avg_degree: float, seed=None) -> ConflictGraph:
    """Erdős–Rényi graph with edge probability ``avg_degree / (n - 1)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if avg_degree < 0 or avg_degree > n - 1:
        raise ValueError(f"avg_degree must lie in [0, n-1], got {avg_degree}")
    k = avg_degree / (n - 1) if n > 1 else 0.0
    rng = _rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < k
    meta = {"model": "er", "params": {"n": n, "avg_degree": avg_degree}, "seed": _seed_meta(seed)}
    return ConflictGraph.from_edges(n, np.stack([iu[keep], ju[keep]], axis=1), meta)


def generate_ba(n: int, m: float, seed=None) -> ConflictGraph:
    """Barabási–Albert preferential attachment graph.

    Starts from a complete graph on ``ceil(m)`` vertices; each new vertex
    attaches to distinct existing vertices sampled proportionally to degree.
    A fractional ``m`` (Table-style values such as 7.5) attaches
    ``floor(m)`` or ``ceil(m)`` edges at random so the mean stays ``m``.
    """
    if not (1 <= m < n):
        raise ValueError(f"need 1 <= m < n, got m={m}, n={n}")
    rng = _rng(seed)
    m_lo = int(math.floor(m))
    frac = m - m_lo
    m0 = int(math.ceil(m))
    edges: list[tuple[int, int]] = [(i, j) for i in range(m0) for j in range(i + 1, m0)]
    deg = np.zeros(n, dtype=np.float64)
    deg[:m0] = m0 - 1
    for v in range(m0, n):
        k = m_lo + (1 if frac > 0 and rng.random() < frac else 0)
        k = min(k, v)
        w = deg[:v]
        total = w.sum()
        p = w / total if total > 0 else None
        targets = rng.choice(v, size=k, replace=False, p=p)
        for t in targets:
            edges.append((int(t), v))
        deg[targets] += 1
        deg[v] = k
    meta = {"model": "ba", "params": {"n": n, "m": m}, "seed": _seed_meta(seed)}
    return ConflictGraph.from_edges(n, edges, meta)


def _seed_meta(seed):
    return seed if isinstance(seed, (int, np.integer)) and not isinstance(seed, bool) else None


def spatial_from_positions(positions, link_radius: float, interference_radius: float) -> SpatialNetwork:
    pos = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    if not (interference_radius >= link_radius > 0):
        raise ValueError("need interference_radius >= link_radius > 0")
    dist = np.sqrt(((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1))
    iu, ju = np.triu_indices(len(pos), k=1)
    close = dist[iu, ju] <= link_radius
    links = np.stack([iu[close], ju[close]], axis=1)
    near = dist <= interference_radius  # diagonal included: shared device conflicts
    if len(links):
        inc = np.zeros((len(links), len(pos)), dtype=np.int32)
        inc[np.arange(len(links)), links[:, 0]] = 1
        inc[np.arange(len(links)), links[:, 1]] = 1
        reach = inc @ near.astype(np.int32)
        clash = (reach @ inc.T) > 0
        np.fill_diagonal(clash, False)
        conflict = ConflictGraph.from_adjacency(clash)
    else:
        conflict = ConflictGraph.from_edges(0, [])
    return SpatialNetwork(pos, links, conflict, float(link_radius), float(interference_radius))


def generate_spatial(
    n_devices: int,
    side: float,
    link_radius: float,
    interference_radius: float,
    seed=None,
) -> SpatialNetwork:
    """Devices uniform in a ``side × side`` square (see ``spatial_from_positions``)."""
    if side <= 0:
        raise ValueError("side must be positive")
    rng = _rng(seed)
    pos = rng.uniform(0.0, side, size=(n_devices, 2))
    net = spatial_from_positions(pos, link_radius, interference_radius)
    net.conflict.metadata.update(
        {
            "model": "spatial",
            "params": {
                "n_devices": n_devices,
                "side": side,
                "link_radius": link_radius,
                "interference_radius": interference_radius,
            },
            "seed": _seed_meta(seed),
        }
    )
    return net


def normalized_laplacian_apply(g: ConflictGraph, x) -> np.ndarray:
    """Compute ``(I - D^-1/2 A D^-1/2) x``; isolated vertices pass through."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != g.vertex_count:
        raise ValueError(f"feature rows {x.shape[0]} != vertex count {g.vertex_count}")
    return kernels.laplacian_apply(g.indptr, g.indices, g.inv_sqrt_degrees, x)


def graph_to_dict(g: ConflictGraph, spatial: SpatialNetwork | None = None) -> dict:
    doc = {
        "vertex_count": g.vertex_count,
        "edges": g.edges().tolist(),
        "metadata": g.metadata,
    }
    if spatial is not None:
        doc["device_positions"] = spatial.device_positions.tolist()
        doc["links"] = spatial.links.tolist()
        doc["link_radius"] = spatial.link_radius
        doc["interference_radius"] = spatial.interference_radius
    return doc


def graph_from_dict(doc: dict) -> ConflictGraph:
    return ConflictGraph.from_edges(doc["vertex_count"], doc["edges"], doc.get("metadata") or {})


def save_graph(path, g: ConflictGraph | SpatialNetwork) -> None:
    if isinstance(g, SpatialNetwork):
        doc = graph_to_dict(g.conflict, g)
    else:
        doc = graph_to_dict(g)
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def load_graph(path) -> ConflictGraph:
    return graph_from_dict(json.loads(Path(path).read_text()))
