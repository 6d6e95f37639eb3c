import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse.csgraph import connected_components

from cheegercut.domain import DomainDensity, sample_points
from cheegercut.geograph import (DegenerateGraphError, balance, build_graph, cut_weight, graph_stats, objective,
                                 rescaled_estimator, volume)
from cheegercut.kernel import Kernel, effective_support
from oracles import gaussian_phi, naive_cut, naive_objective, pair_weights, uniform_phi

U = Kernel.uniform()
LINE3 = np.array([[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]])


def test_two_points():
    g = build_graph(np.array([[0, 0], [0.5, 0]]), 1.0, U)
    assert g.n_edges == 1 and g.weights[0] == 1.0


def test_path_has_no_long_edge():
    g = build_graph(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]), 1.0, U)
    assert list(zip(g.edges_i, g.edges_j)) == [(0, 1), (1, 2)]
    assert g.weight(0, 2) == 0.0 and g.weight(1, 2) == 1.0


def test_closed_interval_at_distance_r():
    g = build_graph(np.array([[0.0, 0.0], [0.25, 0.0]]), 0.25, U)
    assert g.n_edges == 1


def test_all_pairs_fallback_warns():
    with pytest.warns(UserWarning):
        g = build_graph(LINE3, 5.0, U)
    assert g.all_pairs and g.n_edges == 3


def test_brute_force_count_n1000():
    X = sample_points(DomainDensity.unit_cube(2), 1000, 11)
    g = build_graph(X, 0.1, U)
    W = pair_weights(X, 0.1, uniform_phi)
    assert g.total_weight() == W.sum() / 2


def test_line3_functionals():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        g = build_graph(LINE3, 1.0, U)
    first, first_two = np.array([1, 0, 0], bool), np.array([1, 1, 0], bool)
    assert cut_weight(g, np.zeros(3, bool)) == 0
    assert cut_weight(g, first) == 2
    assert cut_weight(g, first_two) == 2
    assert volume(g, np.ones(3, bool), 2) == 6
    assert balance(g, first, 2, 1) == pytest.approx(1 / 3)
    assert objective(g, first, 1, 1) == pytest.approx(6)
    assert objective(g, first, 2, 1) == pytest.approx(6)
    assert cut_weight(g, [0]) == 2  # index lists are accepted


def test_volume_and_balance_small():
    X = np.random.default_rng(0).random((7, 2)) * 10
    g = build_graph(X, 0.01, U)
    y = np.zeros(7, bool)
    y[:3] = True
    assert volume(g, y, 1) == 3
    g4 = build_graph(np.arange(8.0).reshape(4, 2) * 10, 1.0, U)
    y4 = np.array([1, 0, 0, 0], bool)
    assert balance(g4, y4, 1, 1) == 0.25
    assert balance(g4, y4, 1, 2) == pytest.approx(3 / 16)
    with pytest.raises(DegenerateGraphError):
        balance(g4, y4, 2, 1)


def test_far_points_have_zero_volume():
    g = build_graph(np.array([[0, 0], [2, 0]]), 1.0, U)
    assert volume(g, np.ones(2, bool), 2) == 0


def test_objective_conventions():
    X = np.array([[0, 0], [0.1, 0], [5, 0], [5.1, 0]])
    g = build_graph(X, 1.0, U)
    assert objective(g, np.array([1, 1, 0, 0], bool)) == 0.0
    with pytest.raises(ValueError):
        objective(g, np.zeros(4, bool))
    with pytest.raises(ValueError):
        objective(g, np.ones(4, bool))


def test_rescaled_estimator():
    assert rescaled_estimator(8, 2, 1, 2) == 2
    assert rescaled_estimator(0, 10, 0.3, 2) == 0
    assert rescaled_estimator(1.2e6, 10000, 0.05, 2) == pytest.approx(96)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 500), st.integers(0, 2**31), st.sampled_from(["uniform", "gaussian"]),
       st.floats(0.02, 0.3), st.sampled_from([2, 3]))
def test_cell_list_matches_brute_force(n, seed, prof, r, d):
    rng = np.random.default_rng(seed)
    X = rng.random((n, d))
    k = Kernel(prof, d)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        g = build_graph(X, r, k)
    if prof == "uniform":
        W = pair_weights(X, r, uniform_phi)
    else:
        W = pair_weights(X, r, lambda t: gaussian_phi(t, effective_support(k, 1e-12)))
    y = rng.random(n) < 0.4
    cut, ref = cut_weight(g, y), naive_cut(W, y)
    vol, vref = volume(g, y, 2), math.fsum(W[y].ravel())
    if prof == "uniform":
        assert cut == ref and vol == vref
    else:
        assert cut == pytest.approx(ref, rel=1e-12, abs=1e-300)
        assert vol == pytest.approx(vref, rel=1e-12, abs=1e-300)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 60), st.integers(0, 2**31), st.sampled_from(["uniform", "gaussian"]))
def test_symmetry_additivity(n, seed, prof):
    rng = np.random.default_rng(seed)
    g = build_graph(rng.random((n, 2)), 0.3, Kernel(prof))
    y = rng.random(n) < 0.5
    assert cut_weight(g, y) == cut_weight(g, ~y)
    total = volume(g, np.ones(n, bool), 2)
    assert volume(g, y, 2) + volume(g, ~y, 2) == pytest.approx(total, rel=1e-12)
    assert total == pytest.approx(2 * g.total_weight(), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 40), st.integers(0, 2**31), st.integers(1, 2), st.integers(1, 2))
def test_objective_matches_oracle(n, seed, v, b):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 2))
    g = build_graph(X, 0.35, U)
    y = rng.random(n) < 0.5
    if y.all() or not y.any():
        return
    W = pair_weights(X, 0.35, uniform_phi)
    if v == 2 and W.sum() == 0:
        return
    assert objective(g, y, v, b) == pytest.approx(naive_objective(W, y, v, b), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 40), st.integers(0, 2**31))
def test_objective_zero_iff_disconnecting(n, seed):
    rng = np.random.default_rng(seed)
    g = build_graph(rng.random((n, 2)) * 3, 0.4, U)
    y = rng.random(n) < 0.5
    if y.all() or not y.any():
        return
    crossing = np.any(y[g.edges_i] != y[g.edges_j])
    assert (objective(g, y) == 0) == (not crossing)


def test_neighbor_lists_sorted_and_symmetric():
    X = sample_points(DomainDensity.unit_cube(2), 300, 3)
    g = build_graph(X, 0.15, Kernel.gaussian())
    A = g.adjacency
    assert (A != A.T).nnz == 0
    assert A.diagonal().sum() == 0
    for i in range(g.n):
        nb, _ = g.neighbors(i)
        assert np.all(np.diff(nb) > 0)


def test_volume_law_small():
    n, r = 4000, 0.08
    X = sample_points(DomainDensity.unit_cube(2), n, 2)
    s = graph_stats(build_graph(X, r, U))
    # boundary deficit 8r/(3 pi) for the unit square
    assert s["vol2_rescaled"] == pytest.approx(math.pi * (1 - 8 * r / (3 * math.pi)), rel=0.04)


def test_3d_graph_connectivity():
    X = sample_points(DomainDensity.unit_cube(3), 2000, 1)
    g = build_graph(X, 0.2, Kernel.uniform(3))
    ncomp, _ = connected_components(g.adjacency, directed=False)
    assert ncomp == 1
