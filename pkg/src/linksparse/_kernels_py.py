"""Pure numpy implementations of the hot kernels.

Used when the compiled ``_ckernels`` extension is unavailable, or when
``LINKSPARSE_PURE=1`` is set. Results are identical to the compiled path.
"""
from __future__ import annotations

import numpy as np


def _rows(indptr: np.ndarray) -> np.ndarray:
    return np.repeat(np.arange(len(indptr) - 1), np.diff(indptr))


def lgs_rounds(indptr, indices, weights, active):
    n = len(indptr) - 1
    rows = _rows(indptr)
    cols = np.asarray(indices)
    w = np.asarray(weights, dtype=np.float64)
    undecided = np.asarray(active, dtype=bool).copy()
    scheduled = np.zeros(n, dtype=bool)
    decided_at = np.full(n, -1, dtype=np.int32)
    # u beats v on edge (v, u): larger weight, lower index on ties
    nbr_beats = (w[cols] > w[rows]) | ((w[cols] == w[rows]) & (cols < rows))
    rnd = 0
    messages = 0
    while undecided.any():
        rnd += 1
        messages += 2 * int(undecided.sum())
        live = undecided[rows] & undecided[cols]
        beaten = np.zeros(n, dtype=bool)
        beaten[rows[live & nbr_beats]] = True
        winners = undecided & ~beaten
        muted = np.zeros(n, dtype=bool)
        hit = winners[rows] & undecided[cols]
        muted[cols[hit]] = True
        muted &= ~winners
        scheduled |= winners
        decided_at[winners | muted] = rnd
        undecided &= ~(winners | muted)
    return scheduled, decided_at, messages


def csma_contend(indptr, indices, contending, backoff):
    n = len(indptr) - 1
    rows = _rows(indptr)
    cols = np.asarray(indices)
    contending = np.asarray(contending, dtype=bool)
    backoff = np.asarray(backoff, dtype=np.int64)
    lowest = np.where(contending, backoff + 1, 0)
    live = contending[rows] & contending[cols]
    np.minimum.at(lowest, rows[live], backoff[cols[live]])
    wins = contending & (backoff < lowest)
    collided = contending & (backoff == lowest)
    return wins, collided


def laplacian_apply(indptr, indices, inv_sqrt_deg, x):
    x = np.asarray(x, dtype=np.float64)
    rows = _rows(indptr)
    cols = np.asarray(indices)
    w = inv_sqrt_deg[rows] * inv_sqrt_deg[cols]
    out = x.copy()
    np.subtract.at(out, rows, w[:, None] * x[cols])
    return out


def induced_degrees(indptr, indices, mask):
    n = len(indptr) - 1
    mask = np.asarray(mask, dtype=bool)
    rows = _rows(indptr)
    counts = np.bincount(rows, weights=mask[np.asarray(indices)], minlength=n)
    return np.where(mask, counts, 0).astype(np.int64)
