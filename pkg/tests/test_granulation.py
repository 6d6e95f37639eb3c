import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cheegercut.domain import Box, DomainDensity, sample_points
from cheegercut.geograph import build_graph, cut_weight
from cheegercut.granulation import (BLACK, GREY, WHITE, BoxColors, GridTooCoarseError, SubRegimeWarning,
                                    bound_matrices, boundary_flux, build_grid, chernoff_check, chernoff_tail,
                                    choose_gamma, classify_boxes, kernel_box_bounds, modified_cut, modified_volume)
from cheegercut.kernel import Kernel, evaluate
from oracles import binomial_lower, binomial_upper

SQ = DomainDensity.unit_cube(2)
DISC = DomainDensity.unit_ball(2)
U = Kernel.uniform()


def test_choose_gamma_golden():
    g = choose_gamma(32768, 0.0356, 2)
    a = (8 * math.log(32768) / (32768 * 0.0356**2)) ** 0.25
    b = 0.0356 ** (1 / 7)
    assert a == pytest.approx(1.1896, abs=1e-4) and b == pytest.approx(0.6210, abs=1e-4)
    assert g.gamma == 0.5 and g.in_regime


def test_choose_gamma_clamp_and_monotone():
    assert choose_gamma(100, 0.9, 2).gamma == 0.5
    ns = [10**k for k in range(6, 16)]
    gs = [choose_gamma(n, 2 * math.sqrt(math.log(n) / n), 2).gamma for n in ns]
    assert all(b <= a for a, b in zip(gs, gs[1:]))
    # for this rule the first term is the constant 2^(1/4), so gamma sits at the ceiling
    assert gs == [0.5] * len(gs)
    # a wider radius leaves the clamp and decreases strictly
    gw = [choose_gamma(n, (math.log(n) / n) ** 0.25, 2).gamma for n in ns[4:]]
    assert all(b < a for a, b in zip(gw, gw[1:]))


def test_choose_gamma_subregime_warns():
    with pytest.warns(SubRegimeWarning):
        assert not choose_gamma(1000, 0.01, 2).in_regime


def test_grid_golden_square():
    G = build_grid(SQ, np.array([[0.1, 0.1]]), 0.25, 1.0)
    # cubes centred at multiples of 0.25: centres 0.25, 0.5, 0.75 per axis are interior
    assert G.n_boxes == 9
    assert G.interior_index.tolist()[0] == [1, 1]
    assert G.mass.sum() == pytest.approx(1.0, abs=1e-12)
    assert G.counts.sum() == 1 and G.point_box[0] == 0


def test_grid_too_coarse():
    with pytest.raises(GridTooCoarseError):
        build_grid(SQ, np.array([[0.5, 0.5]]), 1.0, 0.9)


@pytest.mark.parametrize("dd,n,r,gamma", [(SQ, 3000, 0.12, 0.5), (DISC, 3000, 0.2, 0.3),
                                          (DomainDensity.unit_cube(3), 3000, 0.3, 0.4),
                                          (DomainDensity(Box((-0.3, 0.2), (1.4, 0.9))), 1000, 0.15, 0.37)])
def test_partition_and_diameter(dd, n, r, gamma):
    X = sample_points(dd, n, 5)
    G = build_grid(dd, X, r, gamma)
    assert G.mass.sum() == pytest.approx(1.0, abs=1e-6)
    assert G.counts.sum() == n
    assert np.all(G.point_box >= 0)
    # every point lies in its box's bounding box and the boxes' diameters obey the recorded constant
    assert np.all(X >= G.box_lo[G.point_box] - 1e-12) and np.all(X <= G.box_hi[G.point_box] + 1e-12)
    assert G.diameters().max() <= G.C * G.side * (1 + 1e-12)
    for i in range(0, G.n_boxes, max(1, G.n_boxes // 20)):
        pts = X[G.members(i)]
        if len(pts) > 1:
            dmax = np.max(np.linalg.norm(pts[:, None] - pts[None], axis=-1))
            assert dmax <= G.C * G.side


def test_merge_rule_nearest_lexicographic():
    G = build_grid(SQ, np.array([[0.5, 0.5]]), 0.25, 1.0)
    # corner cube (0, 0) is equidistant only from (1, 1); edge cube (0, 2) merges into (1, 2)
    k = {tuple(c): G.cube_box[j] for j, c in enumerate(G.cube_index)}
    assert tuple(G.interior_index[k[(0, 0)]]) == (1, 1)
    assert tuple(G.interior_index[k[(0, 2)]]) == (1, 2)
    assert tuple(G.interior_index[k[(4, 4)]]) == (3, 3)


def test_classification_rules():
    G = build_grid(SQ, sample_points(SQ, 400, 1), 0.25, 1.0)
    n = G.n_points
    i = int(np.argmax(G.counts))
    pts = G.members(i)
    y = np.zeros(n, bool)
    y[pts] = True
    c = classify_boxes(G, y)
    thr = (1 - 2 * G.gamma) * n * G.mass[i]
    assert c.labels[i] == (BLACK if G.counts[i] >= thr else GREY)
    y[pts[: len(pts) // 2]] = False
    c = classify_boxes(G, y)
    if min(c.black[i], c.white[i]) > G.gamma * n * G.mass[i]:
        assert c.labels[i] == GREY and not c.unclassifiable[i]


def test_empty_box_is_unclassifiable():
    G = build_grid(SQ, np.array([[0.3, 0.3]] * 5), 0.25, 0.2)
    c = classify_boxes(G, np.zeros(5, bool))
    empty = G.counts == 0
    assert np.all(c.labels[empty] == GREY) and np.all(c.unclassifiable[empty])


def test_fifty_fifty_grey():
    G = build_grid(SQ, sample_points(SQ, 2000, 3), 0.25, 1.0)
    y = np.zeros(G.n_points, bool)
    for i in range(G.n_boxes):
        m = G.members(i)
        y[m[: len(m) // 2]] = True
    c = classify_boxes(G, y)
    big = np.minimum(c.black, c.white) > G.gamma * G.n_points * G.mass
    assert np.all(c.labels[big] == GREY)


def test_chernoff_examples():
    assert chernoff_tail(100, 0.3, 30) == pytest.approx(1.0)
    assert chernoff_tail(100, 0.1, 20) == pytest.approx(math.exp(-10 * (2 * math.log(2) - 1)), rel=1e-12)
    assert chernoff_tail(100, 0.1, 20) == pytest.approx(0.02100, abs=1e-5)
    assert chernoff_tail(50, 0.2, 0) == pytest.approx(math.exp(-10), rel=1e-12)
    assert chernoff_tail(10, 0.0, 0) == 1.0 and chernoff_tail(10, 0.0, 1) == 0.0
    with pytest.raises(ValueError):
        chernoff_tail(10, 0.5, -1)
    with pytest.raises(ValueError):
        chernoff_tail(10, 1.5, 1)


@pytest.mark.parametrize("n", [10, 50, 200])
@pytest.mark.parametrize("p", [0.05, 0.2, 0.5])
def test_chernoff_is_a_bound(n, p):
    mu = n * p
    for k in range(n + 1):
        bound = chernoff_tail(n, p, k)
        exact = binomial_upper(n, p, k) if k >= mu else binomial_lower(n, p, k)
        assert bound >= exact * (1 - 1e-12)


def _setup(n=200, r=0.3, gamma=0.35, seed=0, kernel=U, dd=SQ):
    X = sample_points(dd, n, seed)
    g = build_graph(X, r, kernel)
    G = build_grid(dd, X, r, gamma)
    return X, g, G


def _phi_lo_pairs(G, g):
    P_lo, _ = bound_matrices(G, g.kernel, g.r)
    D = P_lo.toarray()
    return D[G.point_box][:, G.point_box]


def test_kernel_box_bounds_examples():
    X, g, G = _setup()
    lo, hi = kernel_box_bounds(G, U, g.r, 3, 3)
    assert hi == evaluate(U, 0.0)
    # two boxes of side 0.1 separated by 1: max distance exceeds r = 1
    G2 = build_grid(DomainDensity(Box((0.0, 0.0), (2.0, 0.5))), np.array([[0.25, 0.25]]), 1.0, 0.1)
    centers = G2.centers
    i = int(np.argmin(np.linalg.norm(centers - [0.2, 0.2], axis=1)))
    j = int(np.argmin(np.linalg.norm(centers - [1.2, 0.2], axis=1)))
    lo, hi = kernel_box_bounds(G2, U, 1.0, i, j)
    assert lo == 0.0 and hi == 1.0


@pytest.mark.parametrize("kernel", [Kernel.uniform(), Kernel.gaussian()])
def test_sandwich(kernel):
    X, g, G = _setup(kernel=kernel, r=0.2, gamma=0.3)
    rng = np.random.default_rng(0)
    P_lo, P_hi = (M.toarray() for M in bound_matrices(G, kernel, g.r))
    for _ in range(200):
        i, j = rng.integers(G.n_boxes, size=2)
        lo_i, hi_i, lo_j, hi_j = G.box_lo[i], G.box_hi[i], G.box_lo[j], G.box_hi[j]
        x = lo_i + rng.random((100, 2)) * (hi_i - lo_i)
        y = lo_j + rng.random((100, 2)) * (hi_j - lo_j)
        w = evaluate(kernel, np.linalg.norm(x - y, axis=1) / g.r)
        w = np.where(np.linalg.norm(x - y, axis=1) <= g.r * g.r_cut, w, 0.0)
        assert np.all(P_lo[i, j] <= w + 1e-15) and np.all(w <= P_hi[i, j] + 1e-15)


def test_modified_cut_and_volume_oracle():
    X, g, G = _setup()
    Phi = _phi_lo_pairs(G, g)
    rng = np.random.default_rng(1)
    same = G.point_box[:, None] == G.point_box[None, :]
    for _ in range(5):
        y = rng.random(len(X)) < 0.5
        assert modified_cut(G, g, y) == pytest.approx(Phi[np.ix_(y, ~y)].sum(), rel=1e-12)
        tilde = np.where(same, 0.0, Phi)
        assert modified_volume(G, g, y, 2) == pytest.approx(tilde[y].sum(), rel=1e-12)
        assert modified_volume(G, g, y, 1) == y.sum()
    assert modified_cut(G, g, np.zeros(len(X), bool)) == 0


def test_single_box_volume_zero():
    X = np.array([[0.5, 0.5], [0.52, 0.51], [0.49, 0.5]])
    g = build_graph(X, 0.3, U)
    G = build_grid(SQ, X, 0.3, 0.5)
    assert modified_volume(G, g, np.ones(3, bool), 2) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.1, 0.5), st.sampled_from(["uniform", "gaussian"]))
def test_modified_cut_below_cut(seed, gamma, prof):
    rng = np.random.default_rng(seed)
    X, g, G = _setup(n=150, r=0.25, gamma=gamma, seed=seed, kernel=Kernel(prof))
    y = rng.random(len(X)) < rng.random()
    assert modified_cut(G, g, y) <= cut_weight(g, y) * (1 + 1e-12) + 1e-12


def _pure_partition(G, rng):
    box_black = rng.random(G.n_boxes) < 0.5
    return box_black[G.point_box], box_black


def test_boundary_flux():
    X, g, G = _setup(n=300, gamma=0.5)
    rng = np.random.default_rng(4)
    y, box_black = _pure_partition(G, rng)
    labels = np.where(box_black, BLACK, WHITE).astype(np.int8)
    b, w = G.box_counts(y)
    colors = BoxColors(labels, np.zeros(G.n_boxes, bool), b, w)
    Phi = _phi_lo_pairs(G, g)
    lab = labels[G.point_box]
    opp = lab[:, None] != lab[None, :]
    oracle = (Phi * opp)[np.ix_(y, ~y)].sum()
    z = boundary_flux(G, g, y, colors)
    assert z == pytest.approx(oracle, rel=1e-12)
    assert z <= modified_cut(G, g, y) * (1 + 1e-12)
    allb = BoxColors(np.full(G.n_boxes, BLACK, np.int8), colors.unclassifiable, G.counts, 0 * G.counts)
    assert boundary_flux(G, g, np.ones(len(X), bool), allb) == 0


def test_boundary_flux_two_boxes():
    X = np.array([[0.3, 0.5], [0.32, 0.5], [0.6, 0.5], [0.62, 0.52], [0.61, 0.5]])
    g = build_graph(X, 1.0, U)
    G = build_grid(SQ, X, 1.0, 0.25)
    y = np.array([1, 1, 0, 0, 0], bool)
    b, w = G.box_counts(y)
    bi, wi = G.point_box[0], G.point_box[2]
    labels = np.full(G.n_boxes, WHITE, np.int8)
    labels[bi] = BLACK
    colors = BoxColors(labels, np.zeros(G.n_boxes, bool), b, w)
    lo, _ = kernel_box_bounds(G, U, 1.0, bi, wi)
    assert boundary_flux(G, g, y, colors) == pytest.approx(lo * 2 * 3)


def test_boundary_flux_rejects_grey():
    X, g, G = _setup()
    y = np.random.default_rng(0).random(len(X)) < 0.5
    c = classify_boxes(G, y)
    if c.n_grey:
        with pytest.raises(ValueError):
            boundary_flux(G, g, y, c)


def test_concentration_union_bound():
    # n gamma^(d+2) r^d >= 8 log n; violations stay within the union-bound prediction (3 sigma, 20 seeds)
    n = 20000
    r = 0.3
    gamma = choose_gamma(n, r, 2).gamma
    assert n * gamma**4 * r**2 >= 8 * math.log(n)
    viol, pred = [], None
    for seed in range(20):
        X = sample_points(SQ, n, seed)
        G = build_grid(SQ, X, r, gamma)
        chk = chernoff_check(G)
        viol.append(chk["upper_violations"] + chk["lower_violations"])
        pred = chk["upper_prediction"] + chk["lower_prediction"]
    mean = float(np.mean(viol))
    se = float(np.std(viol, ddof=1)) / math.sqrt(len(viol))
    assert mean - 3 * se <= pred
