import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cheegercut.domain import DomainDensity, sample_points
from cheegercut.geograph import build_graph, cut_weight, objective, rescaled_estimator
from cheegercut.granulation import BLACK, GREY, bound_matrices, build_grid, choose_gamma, classify_boxes, modified_cut
from cheegercut.kernel import Kernel
from cheegercut.optimize import (EnumerationBudgetError, exact_cheeger, exact_mbis, fiedler_vector, greyscale_removal,
                                 local_search_bisection, median_split, refine_pipeline, sweep_cut)
from oracles import naive_cheeger, naive_mbis, pair_weights, uniform_phi

SQ = DomainDensity.unit_cube(2)
U = Kernel.uniform()
LINE3 = np.array([[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]])


def dense(g):
    return g.adjacency.toarray()


def test_exact_line3():
    g = build_graph(LINE3, 1.0, U)
    res = exact_cheeger(g, 1, 1)
    assert res.value == 6
    assert exact_mbis(g).value == 2
    assert exact_mbis(g).partition.sum() == 1


def test_exact_two_clusters():
    X = np.array([[0, 0], [0.1, 0], [3, 0], [3.1, 0]])
    g = build_graph(X, 1.0, U)
    res = exact_cheeger(g)
    assert res.value == 0
    assert res.partition.tolist() == [False, False, True, True]
    bis = exact_mbis(g)
    assert bis.value == 0 and bis.partition.sum() == 2


def test_budget():
    X = np.random.default_rng(0).random((23, 2))
    g = build_graph(X, 0.3, U)
    with pytest.raises(EnumerationBudgetError):
        exact_cheeger(g)
    g25 = build_graph(np.random.default_rng(0).random((25, 2)), 0.3, U)
    with pytest.raises(EnumerationBudgetError):
        exact_mbis(g25)


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("v,b", [(1, 1), (1, 2), (2, 1), (2, 2)])
def test_exact_matches_naive_n10(seed, v, b):
    X = np.random.default_rng(seed).random((10, 2))
    g = build_graph(X, 0.8, Kernel.gaussian() if seed % 2 else U)
    res = exact_cheeger(g, v, b)
    val, bits = naive_cheeger(dense(g), v, b)
    assert res.value == val
    assert tuple(res.partition) == bits


@pytest.mark.parametrize("seed", range(4))
def test_exact_mbis_matches_naive_n12(seed):
    X = np.random.default_rng(100 + seed).random((12, 2))
    g = build_graph(X, 0.45, Kernel.gaussian() if seed % 2 else U)
    res = exact_mbis(g)
    val, bits = naive_mbis(dense(g))
    assert res.value == val and tuple(res.partition) == bits


def test_exact_larger_instances_are_consistent():
    X = np.random.default_rng(3).random((20, 2))
    g = build_graph(X, 0.4, U)
    res = exact_cheeger(g)
    assert res.value == pytest.approx(objective(g, res.partition), rel=1e-12)
    sw = sweep_cut(g)
    assert sw.value >= res.value


def test_sweep_on_a_path_is_exact():
    X = np.column_stack([np.arange(10.0), np.zeros(10)])
    g = build_graph(X, 1.0, U)
    assert sweep_cut(g).value == exact_cheeger(g).value


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(4, 14), st.integers(1, 2), st.integers(1, 2),
       st.sampled_from(["axis", "fiedler"]))
def test_sweep_upper_bounds_exact(seed, n, v, b, mode):
    X = np.random.default_rng(seed).random((n, 2))
    g = build_graph(X, 0.5, U)
    if v == 2 and g.n_edges == 0:
        return
    sw = sweep_cut(g, v, b, mode)
    assert sw.value == pytest.approx(objective(g, sw.partition, v, b), rel=1e-10)
    assert sw.value >= exact_cheeger(g, v, b).value * (1 - 1e-12)


def test_fiedler_vector_matches_dense_eigensolver():
    X = sample_points(SQ, 60, 2)
    g = build_graph(X, 0.35, U)
    vec, ok, _ = fiedler_vector(g, tol=1e-9, max_iter=200000)
    assert ok
    W = dense(g)
    L = np.diag(W.sum(1)) - W
    w, V = np.linalg.eigh(L)
    assert abs(abs(vec @ V[:, 1]) - 1) < 1e-5


def test_fiedler_fallbacks():
    X = np.array([[0, 0], [0.1, 0], [3, 0], [3.1, 0]])
    res = sweep_cut(build_graph(X, 1.0, U), mode="fiedler")
    assert res.flags["fallback"] == "disconnected" and res.value == 0
    g = build_graph(sample_points(SQ, 400, 1), 0.15, U)
    vec, ok, it = fiedler_vector(g, max_iter=20)
    assert not ok and it == 20


@pytest.mark.parametrize("seed", range(5))
def test_sweep_golden_band(seed):
    n, r = 5000, 0.08
    g = build_graph(sample_points(SQ, n, seed), r, U)
    val = rescaled_estimator(sweep_cut(g).value, n, r, 2)
    assert 4 / 3 * 0.7 <= val <= 4 / 3 * 1.6


def test_refine_golden():
    n, r = 5000, 0.08
    X = sample_points(SQ, n, 0)
    g = build_graph(X, r, U)
    G = build_grid(SQ, X, r, choose_gamma(n, r, 2).gamma)
    res = refine_pipeline(g, G)
    assert res.value == 14754.527162977867
    assert res.value <= sweep_cut(g).value


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.integers(6, 16))
def test_refine_bounds(seed, n):
    X = sample_points(SQ, n, seed)
    g = build_graph(X, 0.5, U)
    G = build_grid(SQ, X, 0.5, 0.4)
    res = refine_pipeline(g, G)
    assert res.value <= sweep_cut(g).value
    assert res.value >= exact_cheeger(g).value * (1 - 1e-12)
    assert res.value == pytest.approx(objective(g, res.partition), rel=1e-10)


# ---------------------------------------------------------------- greyscale removal


def _instance(seed, n=None, gamma=None):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(30, 200))
    r = float(rng.uniform(0.15, 0.5))
    gamma = gamma or float(rng.uniform(0.15, 0.5))
    X = sample_points(SQ, n, seed)
    g = build_graph(X, r, Kernel.gaussian() if seed % 3 == 0 else U)
    G = build_grid(SQ, X, r, gamma)
    # a noisy halfspace, so that some boxes are mixed
    y = (X[:, int(rng.integers(2))] + 0.3 * rng.standard_normal(n)) < 0.5
    return g, G, y


def _ratio_xy(g, G, y, labels):
    P, _ = bound_matrices(G, g.kernel, g.r)
    A = P.toarray()
    np.fill_diagonal(A, 0.0)
    b, w = G.box_counts(y)
    bg = (labels == BLACK) | (labels == GREY)
    x = float(np.sum((b * (A @ w))[bg]))
    yy = float(np.sum(b[bg]))
    return x, yy


def test_pure_partition_unchanged():
    g, G, _ = _instance(1)
    box_black = np.arange(G.n_boxes) % 2 == 0
    y = box_black[G.point_box]
    c = classify_boxes(G, y)
    if c.n_grey == 0:
        assert np.array_equal(greyscale_removal(g, G, y, "cut"), y)
        assert np.array_equal(greyscale_removal(g, G, y, "ratio"), y)


@pytest.mark.parametrize("seed", range(60))
def test_greyscale_properties(seed):
    g, G, y = _instance(seed)
    before = classify_boxes(G, y)
    grey_boxes = np.flatnonzero(before.labels == GREY)
    for mode in ("cut", "ratio"):
        out = greyscale_removal(g, G, y, mode, v=1 + seed % 2)
        after = classify_boxes(G, out)
        assert np.count_nonzero((after.labels == GREY) & ~after.unclassifiable) == 0
        changed = np.flatnonzero(out != y)
        assert np.all(np.isin(G.point_box[changed], grey_boxes))
        if mode == "cut":
            assert modified_cut(G, g, out) <= modified_cut(G, g, y) * (1 + 1e-12) + 1e-12


def test_cut_mode_one_grey_box_between_colours():
    # three boxes in a row: black | grey | white
    X = np.array([[0.30, 0.5], [0.31, 0.52],
                  [0.5, 0.5], [0.52, 0.51], [0.49, 0.49], [0.51, 0.48],
                  [0.70, 0.5], [0.71, 0.49]])
    g = build_graph(X, 0.5, U)
    G = build_grid(SQ, X, 0.5, 0.4)
    y = np.array([1, 1, 1, 0, 1, 0, 0, 0], bool)
    out = greyscale_removal(g, G, y, "cut")
    assert classify_boxes(G, out).n_grey - classify_boxes(G, out).n_unclassifiable == 0
    assert modified_cut(G, g, out) <= modified_cut(G, g, y)
    # the endpoint choice is the better of the two pure colourings of the middle box
    mid = G.point_box[2]
    alt = out.copy()
    alt[G.members(mid)] = ~out[G.members(mid)][0]
    assert modified_cut(G, g, out) <= modified_cut(G, g, alt)


@pytest.mark.parametrize("seed", range(40))
def test_ratio_mode_does_not_increase_x_over_y(seed):
    g, G, y = _instance(seed, gamma=0.45)
    c = classify_boxes(G, y)
    x0, y0 = _ratio_xy(g, G, y, c.labels)
    out = greyscale_removal(g, G, y, "ratio", v=1)
    labels = c.labels.copy()
    b_out, _ = G.box_counts(out)
    grey = c.labels == GREY
    labels[grey] = np.where(b_out[grey] > 0, BLACK, 0)
    x1, y1 = _ratio_xy(g, G, out, labels)
    if y0 > 0 and y1 > 0:
        assert x1 / y1 <= x0 / y0 * (1 + 1e-12) + 1e-12


def test_ratio_two_box_instance():
    # a black box and a mixed box next to each other
    X = np.array([[0.3, 0.5], [0.31, 0.5], [0.32, 0.51],
                  [0.5, 0.5], [0.51, 0.5], [0.52, 0.51], [0.49, 0.52]])
    g = build_graph(X, 0.6, U)
    G = build_grid(SQ, X, 0.6, 0.3)
    y = np.array([1, 1, 1, 1, 0, 1, 0], bool)
    c = classify_boxes(G, y)
    x0, y0 = _ratio_xy(g, G, y, c.labels)
    out = greyscale_removal(g, G, y, "ratio", v=1)
    # evaluate both pure colourings of every grey box and check the chosen one is no worse than the start
    labels = c.labels.copy()
    b_out, _ = G.box_counts(out)
    labels[c.labels == GREY] = np.where(b_out[c.labels == GREY] > 0, BLACK, 0)
    x1, y1 = _ratio_xy(g, G, out, labels)
    assert y1 > 0 and x1 / y1 <= x0 / y0 + 1e-12


# ---------------------------------------------------------------- bisection


def test_local_search_keeps_optimum():
    X = np.array([[0, 0], [0.1, 0], [3, 0], [3.1, 0]])
    g = build_graph(X, 1.0, U)
    res = local_search_bisection(g, np.array([1, 1, 0, 0], bool))
    assert res.value == 0 and res.iterations == 0


def test_local_search_cardinality_error():
    g = build_graph(LINE3, 1.0, U)
    with pytest.raises(ValueError):
        local_search_bisection(g, np.array([1, 1, 0], bool))


@pytest.mark.parametrize("seed", range(10))
def test_local_search_against_exact(seed):
    rng = np.random.default_rng(seed)
    X = rng.random((12, 2))
    g = build_graph(X, 0.5, U)
    y0 = np.zeros(12, bool)
    y0[rng.permutation(12)[:6]] = True
    res = local_search_bisection(g, y0)
    assert res.partition.sum() == 6
    assert exact_mbis(g).value <= res.value <= cut_weight(g, y0)
    assert res.value == cut_weight(g, res.partition)


@pytest.mark.parametrize("seed", range(5))
def test_local_search_golden_band(seed):
    n, r = 5000, 0.08
    g = build_graph(sample_points(SQ, n, seed), r, U)
    y0 = median_split(g)
    res = local_search_bisection(g, y0)
    assert res.partition.sum() == n // 2
    assert res.value <= cut_weight(g, y0)
    assert 2 / 3 * 0.7 <= rescaled_estimator(res.value, n, r, 2) <= 2 / 3 * 1.6


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(4, 60))
def test_local_search_invariants(seed, n):
    rng = np.random.default_rng(seed)
    g = build_graph(rng.random((n, 2)), 0.3, Kernel.gaussian())
    y0 = np.zeros(n, bool)
    y0[rng.permutation(n)[: n // 2]] = True
    res = local_search_bisection(g, y0, max_passes=5)
    assert res.partition.sum() == n // 2
    assert res.value <= cut_weight(g, y0) * (1 + 1e-12)
