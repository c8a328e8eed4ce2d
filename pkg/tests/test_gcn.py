from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from linksparse import ConflictGraph, GcnModel, gcn_backward, gcn_forward, gcn_forward_local, generate_er
from linksparse.gcn import flatten_grads, load_model, save_model

from oracles import central_difference


def one_layer(t0, t1):
    return GcnModel([1, 1], [[[t0]]], [[[t1]]])


def test_dims_validated():
    with pytest.raises(ValueError):
        GcnModel([2, 1], [np.ones((2, 1))], [np.ones((2, 1))])
    with pytest.raises(ValueError):
        GcnModel([1, 3, 1], [np.ones((1, 2)), np.ones((3, 1))], [np.ones((1, 3)), np.ones((3, 1))])


def test_forward_closed_forms(k3, star3):
    assert np.allclose(gcn_forward(one_layer(1, 0), star3)[0], 1)
    assert np.allclose(gcn_forward(one_layer(0, 1), k3)[0], 0)
    z = gcn_forward(one_layer(0, 1), star3)[0]
    assert z[0] == 0
    assert np.allclose(z[1:], 1 - 1 / np.sqrt(3))
    assert z[1] == pytest.approx(0.4226, abs=1e-4)


def test_isolated_vertex_passes_input_through():
    # ℒ·1 = 1 on an isolated vertex, so both parameter sets act on it
    g = ConflictGraph.from_edges(1, [])
    m = GcnModel.random(3, hidden=4, seed=5)
    x = np.ones((1, 1))
    for l in range(3):
        h = x @ m.theta0[l] + x @ m.theta1[l]
        x = np.maximum(h, 0) if l == 2 else np.where(h > 0, h, 0.01 * h)
    assert gcn_forward(m, g)[0][0] == pytest.approx(x[0, 0])
    assert gcn_forward_local(m, g)[0] == pytest.approx(x[0, 0])


def test_identity_init_gives_ones():
    g = generate_er(25, 4, 1)
    for L in (1, 2, 3):
        assert np.allclose(gcn_forward(GcnModel.identity(L, 5), g)[0], 1)


@pytest.mark.parametrize("L", [1, 2, 3])
def test_local_matches_matrix(L, k3):
    for seed in range(5):
        m = GcnModel.random(L, hidden=6, seed=seed)
        for g in (k3, generate_er(30, 5, seed)):
            assert np.max(np.abs(gcn_forward(m, g)[0] - gcn_forward_local(m, g))) <= 1e-9


@given(st.integers(0, 10_000), st.integers(1, 3))
def test_permutation_equivariance_and_nonnegativity(seed, L):
    rng = np.random.default_rng(seed)
    g = generate_er(20, 4, seed)
    m = GcnModel.random(L, hidden=5, seed=seed)
    perm = rng.permutation(20)
    z = gcn_forward(m, g)[0]
    zp = gcn_forward(m, g.permute(perm))[0]
    assert np.all(z >= 0)
    assert np.allclose(zp[perm], z, rtol=0, atol=1e-12)


def test_backward_trivial_cases(k3):
    m = GcnModel.random(2, seed=0)
    z, cache = gcn_forward(m, k3)
    g0, g1 = gcn_backward(m, k3, cache, np.zeros(3))
    assert all(np.all(a == 0) for a in g0 + g1)
    m1 = one_layer(1, 0)
    z, cache = gcn_forward(m1, k3)
    g0, g1 = gcn_backward(m1, k3, cache, np.ones(3))
    assert g0[0][0, 0] == pytest.approx(3)
    assert g1[0][0, 0] == pytest.approx(0, abs=1e-12)


def test_backward_cache_mismatch(k3, p3):
    m = GcnModel.random(1, seed=0)
    _, cache = gcn_forward(m, k3)
    with pytest.raises(ValueError):
        gcn_backward(m, p3, cache, np.ones(3))


def _fd_check(m, g, rng, tol):
    grad_out = rng.normal(size=g.vertex_count)
    z, cache = gcn_forward(m, g)
    analytic = flatten_grads(*gcn_backward(m, g, cache, grad_out))
    f = lambda w: float(gcn_forward(m.with_flat(w), g)[0] @ grad_out)
    numeric = central_difference(f, m.flat(), 1e-5)
    scale = np.maximum(np.abs(numeric), 1e-6)
    return np.max(np.abs(analytic - numeric) / scale) <= tol


@pytest.mark.parametrize("L", [1, 2, 3])
def test_backward_finite_differences(L):
    rng = np.random.default_rng(L)
    hits = 0
    for seed in range(6):
        g = generate_er(20, 4, seed)
        m = GcnModel.random(L, hidden=4, seed=seed)
        # shift away from dead output so gradients are nonzero
        m.theta0[-1] = np.abs(m.theta0[-1]) + 0.3
        hits += _fd_check(m, g, rng, 1e-4)
    assert hits == 6


def test_model_roundtrip(tmp_path):
    m = GcnModel.random(3, hidden=4, seed=9)
    m.metadata = {"seed": 9, "epoch": 25}
    save_model(tmp_path / "m.json", m)
    back = load_model(tmp_path / "m.json")
    assert back.dims == m.dims and np.array_equal(back.flat(), m.flat())
    assert back.metadata == {"seed": 9, "epoch": 25}
