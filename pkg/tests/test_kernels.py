"""The compiled and numpy kernel backends must agree exactly."""
from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest

from linksparse import generate_ba, generate_er, kernels

from oracles import dense_laplacian, sequential_greedy


def _cases():
    for s in range(12):
        yield generate_er(40, 1 + s, seed=s)
        yield generate_ba(40, 1 + s % 6, seed=s)


def test_active_backend_reported():
    assert kernels.BACKEND in kernels.available_backends()
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_lgs_rounds_oracle(backend):
    rng = np.random.default_rng(0)
    for g in _cases():
        w = rng.random(g.vertex_count)
        active = rng.random(g.vertex_count) < 0.8
        sched, rounds, msgs = kernels.lgs_rounds(g.indptr, g.indices, w, active, backend=backend)
        assert np.array_equal(sched, sequential_greedy(g.dense_adjacency(), w, active))
        assert np.all(rounds[~active] == -1) and np.all(rounds[active] >= 1)
        undecided = [int(np.sum(active & (rounds >= r))) for r in range(1, rounds.max() + 1)]
        assert msgs == 2 * sum(undecided)


def test_lgs_ties_prefer_low_index(backend):
    g = generate_er(3, 2, 0)
    sched, _, _ = kernels.lgs_rounds(g.indptr, g.indices, np.ones(3), np.ones(3, bool), backend=backend)
    assert sched.tolist() == [True, False, False]


def test_backends_agree():
    if len(kernels.available_backends()) < 2:
        pytest.skip("compiled backend not built")
    rng = np.random.default_rng(1)
    for g in _cases():
        n = g.vertex_count
        w = rng.integers(0, 5, n).astype(float)  # ties exercise the index rule
        mask = rng.random(n) < 0.7
        back = rng.integers(0, 8, n)
        x = rng.normal(size=(n, 3))
        outs = {}
        for b in ("python", "cython"):
            outs[b] = (
                kernels.lgs_rounds(g.indptr, g.indices, w, mask, backend=b),
                kernels.csma_contend(g.indptr, g.indices, mask, back, backend=b),
                kernels.laplacian_apply(g.indptr, g.indices, g.inv_sqrt_degrees, x, backend=b),
                kernels.induced_degrees(g.indptr, g.indices, mask, backend=b),
            )
        (lp, cp, xp, dp), (lc, cc, xc, dc) = outs["python"], outs["cython"]
        for a, b in zip(lp, lc):
            assert np.array_equal(a, b)
        for a, b in zip(cp, cc):
            assert np.array_equal(a, b)
        assert np.allclose(xp, xc, rtol=0, atol=1e-12)
        assert np.array_equal(dp, dc)


def test_csma_contend_semantics(backend):
    rng = np.random.default_rng(2)
    for g in _cases():
        n = g.vertex_count
        mask = rng.random(n) < 0.7
        back = rng.integers(0, 6, n)
        wins, coll = kernels.csma_contend(g.indptr, g.indices, mask, back, backend=backend)
        for v in range(n):
            nb = [u for u in g.neighbors(v) if mask[u]]
            lowest = min((back[u] for u in nb), default=np.inf)
            assert wins[v] == (mask[v] and back[v] < lowest)
            assert coll[v] == (mask[v] and back[v] == lowest)


def test_laplacian_and_degrees(backend):
    rng = np.random.default_rng(3)
    for g in _cases():
        a = g.dense_adjacency().astype(float)
        x = rng.normal(size=(g.vertex_count, 2))
        out = kernels.laplacian_apply(g.indptr, g.indices, g.inv_sqrt_degrees, x, backend=backend)
        assert np.allclose(out, dense_laplacian(a) @ x)
        mask = rng.random(g.vertex_count) < 0.5
        d = kernels.induced_degrees(g.indptr, g.indices, mask, backend=backend)
        expect = np.where(mask, a[:, mask].sum(axis=1), 0)
        assert np.array_equal(d, expect)


def test_pure_fallback_selected_by_environment():
    env = dict(os.environ, LINKSPARSE_PURE="1")
    out = subprocess.run([sys.executable, "-c", "from linksparse import BACKEND; print(BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
