"""Box granulation of the domain: cubes of side gamma*r, boundary merging, box colours
and box-constant kernel bounds."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from cheegercut.domain import Ball, Box, UnsupportedDomainError
from cheegercut.geograph import as_mask
from cheegercut.kernel import effective_support, evaluate

WHITE, BLACK, GREY = 0, 1, 2
COLOR_NAMES = {WHITE: "white", BLACK: "black", GREY: "grey"}
GAMMA_MIN, GAMMA_MAX = 0.01, 0.5


class GridTooCoarseError(ValueError):
    pass


class SubRegimeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GammaChoice:
    gamma: float
    in_regime: bool

    def __float__(self):
        return self.gamma


def choose_gamma(n, r, d):
    """gamma = clamp(max((8 log n / (n r^d))^(1/(d+2)), r^(1/(d+5))), 0.01, 0.5)."""
    if n < 2 or r <= 0:
        raise ValueError("need n >= 2 and r > 0")
    a = (8.0 * math.log(n) / (n * r**d)) ** (1.0 / (d + 2))
    b = r ** (1.0 / (d + 5))
    g = min(max(a, b), GAMMA_MAX)
    g = max(g, GAMMA_MIN)
    in_regime = n * r**d > math.log(n)
    if not in_regime:
        warnings.warn("n r^d <= log n: outside the theorem regime", SubRegimeWarning, stacklevel=2)
    return GammaChoice(g, in_regime)


def _cube_meets_domain(shape, lo, hi):
    if isinstance(shape, Box):
        return np.all((hi > shape.lo) & (lo < shape.hi), axis=1)
    if isinstance(shape, Ball):
        c = np.asarray(shape.center)
        near = np.clip(c, lo, hi)
        return np.sum((near - c) ** 2, axis=1) < shape.radius**2
    raise UnsupportedDomainError("granulation needs a box or ball domain")


def _cube_interior(shape, lo, hi):
    """Half-open cube [lo, hi) inside the open domain."""
    if isinstance(shape, Box):
        return np.all((lo > shape.lo) & (hi <= shape.hi), axis=1)
    c, R2 = np.asarray(shape.center), shape.radius**2
    ok = np.sum((0.5 * (lo + hi) - c) ** 2, axis=1) < R2
    d = lo.shape[1]
    for bits in np.ndindex(*(2,) * d):
        corner = np.where(np.array(bits, bool), hi, lo)
        ok &= np.sum((corner - c) ** 2, axis=1) < R2
    return ok


@dataclass(frozen=True, eq=False)
class BoxGrid:
    """Merged boxes Q_i, i in S_n, over a fixed point cloud.

    Box ids follow the lexicographic order of the interior cube indices.
    Box bounding boxes are clipped to the domain's bounding box.
    """

    dd: object = field(repr=False)
    r: float
    gamma: float
    side: float
    interior_index: np.ndarray = field(repr=False)  # (m, d) integer cube index of z_i / side
    cube_index: np.ndarray = field(repr=False)  # (K, d) every cube meeting D
    cube_box: np.ndarray = field(repr=False)  # (K,) merged box id I(j, n)
    box_lo: np.ndarray = field(repr=False)
    box_hi: np.ndarray = field(repr=False)
    mass: np.ndarray = field(repr=False)  # nu(Q_i)
    point_box: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)
    merge_radius: float  # max distance, in units of side, from a cube centre to its interior centre
    C: float
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_boxes(self):
        return len(self.mass)

    @property
    def n_points(self):
        return len(self.point_box)

    @property
    def dim(self):
        return self.interior_index.shape[1]

    @property
    def centers(self):
        return self.interior_index * self.side

    def members(self, i):
        order, starts = self._point_order()
        return order[starts[i]:starts[i + 1]]

    def _point_order(self):
        if "order" not in self._cache:
            order = np.argsort(self.point_box, kind="stable")
            starts = np.concatenate([[0], np.cumsum(self.counts)])
            self._cache["order"] = (order, starts)
        return self._cache["order"]

    def diameters(self):
        """Diameter bound of each merged box (its bounding box diagonal)."""
        return np.linalg.norm(self.box_hi - self.box_lo, axis=1)

    def box_counts(self, members):
        """(black, white) point counts per box for membership Y."""
        y = as_mask(members, self.n_points)
        b = np.bincount(self.point_box[y], minlength=self.n_boxes)
        return b, self.counts - b

    def histogram(self):
        vals, cnt = np.unique(self.counts, return_counts=True)
        return dict(zip(vals.tolist(), cnt.tolist()))


def build_grid(dd, points, r, gamma):
    """Granulate ``dd`` into merged boxes of side gamma*r and locate ``points``."""
    gamma = float(gamma)
    if r <= 0 or gamma <= 0:
        raise ValueError("r and gamma must be positive")
    h = gamma * r
    shape = dd.shape
    lo_b, hi_b = dd.bbox
    kmin = np.floor(lo_b / h + 0.5).astype(np.int64)
    kmax = np.floor(hi_b / h + 0.5).astype(np.int64)
    axes = [np.arange(a, b + 1) for a, b in zip(kmin, kmax)]
    cubes = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(axes))
    clo, chi = (cubes - 0.5) * h, (cubes + 0.5) * h
    meets = _cube_meets_domain(shape, clo, chi)
    cubes, clo, chi = cubes[meets], clo[meets], chi[meets]
    interior = _cube_interior(shape, clo, chi)
    if not interior.any():
        raise GridTooCoarseError(f"no cube of side {h:g} fits inside the domain")
    int_idx = np.flatnonzero(interior)  # already in lexicographic order
    zi = cubes[int_idx]
    m = len(int_idx)

    cube_box = np.full(len(cubes), -1, np.int64)
    cube_box[int_idx] = np.arange(m)
    bnd = np.flatnonzero(~interior)
    max_d2 = 0
    if len(bnd):
        # nearest interior centre; integer distances make ties exact, argmin takes the lexicographically first
        tree = cKDTree(zi.astype(float))
        dist, _ = tree.query(cubes[bnd].astype(float))
        for s in range(0, len(bnd), 512):
            blk = bnd[s:s + 512]
            cand_r = float(dist[s:s + 512].max()) + 1e-9
            cand = sorted(set().union(*tree.query_ball_point(cubes[blk].astype(float), cand_r)))
            cand = np.array(cand, np.int64)
            diff = cubes[blk][:, None, :] - zi[cand][None, :, :]
            d2 = np.einsum("ijk,ijk->ij", diff, diff)
            best = np.argmin(d2, axis=1)
            cube_box[blk] = cand[best]
            max_d2 = max(max_d2, int(d2[np.arange(len(blk)), best].max()))
    merge_radius = math.sqrt(max_d2)
    d = dd.dim
    C = 3.0 * merge_radius + math.sqrt(d)

    # masses: interior cubes of a uniform domain are exact products
    cube_mass = np.empty(len(cubes))
    if dd.uniform:
        cube_mass[int_idx] = h**d * dd.rho_bounds[0]
        todo = bnd
    else:
        todo = np.arange(len(cubes))
    for j in todo:
        cube_mass[j] = dd.mass_in_box(clo[j], chi[j])
    mass = np.bincount(cube_box, weights=cube_mass, minlength=m)

    box_lo = np.full((m, d), np.inf)
    box_hi = np.full((m, d), -np.inf)
    np.minimum.at(box_lo, cube_box, np.maximum(clo, lo_b))
    np.maximum.at(box_hi, cube_box, np.minimum(chi, hi_b))

    pts = np.atleast_2d(np.asarray(points, float))
    dims = kmax - kmin + 1
    lookup = np.full(int(np.prod(dims)), -1, np.int64)
    lookup[np.ravel_multi_index((cubes - kmin).T, dims)] = cube_box
    pk = np.floor(pts / h + 0.5).astype(np.int64) - kmin
    if len(pts) and (np.any(pk < 0) or np.any(pk >= dims)):
        raise ValueError("points lie outside the domain")
    point_box = lookup[np.ravel_multi_index(pk.T, dims)] if len(pts) else np.empty(0, np.int64)
    if np.any(point_box < 0):
        raise ValueError("points lie outside the domain")
    counts = np.bincount(point_box, minlength=m)
    return BoxGrid(dd, float(r), gamma, h, zi, cubes, cube_box, box_lo, box_hi, mass, point_box, counts,
                   merge_radius, C)


# ---------------------------------------------------------------- colours


@dataclass(frozen=True, eq=False)
class BoxColors:
    labels: np.ndarray
    unclassifiable: np.ndarray
    black: np.ndarray  # |Y cap Q_i|
    white: np.ndarray  # |(X minus Y) cap Q_i|

    @property
    def n_grey(self):
        return int(np.count_nonzero(self.labels == GREY))

    @property
    def n_unclassifiable(self):
        return int(np.count_nonzero(self.unclassifiable))

    def summary(self):
        return {
            "black": int(np.count_nonzero(self.labels == BLACK)),
            "white": int(np.count_nonzero(self.labels == WHITE)),
            "grey": self.n_grey,
            "unclassifiable": self.n_unclassifiable,
        }


def classify_boxes(grid, members, n=None):
    """Colour each box black, white or grey relative to Y."""
    n = grid.n_points if n is None else n
    b, w = grid.box_counts(members)
    thr_grey = grid.gamma * n * grid.mass
    thr_pure = (1.0 - 2.0 * grid.gamma) * n * grid.mass
    grey = np.minimum(b, w) > thr_grey
    black = ~grey & (b >= thr_pure)
    white = ~grey & ~black & (w >= thr_pure)
    unclass = ~(grey | black | white)
    labels = np.full(grid.n_boxes, GREY, np.int8)
    labels[black] = BLACK
    labels[white] = WHITE
    return BoxColors(labels, unclass, b, w)


def chernoff_tail(n, p, k):
    """exp(-np H(k/np)), H(x) = 1 - x + x log x, H(0) = 1.

    Bounds P[Bi(n,p) >= k] for k >= np and P[Bi(n,p) <= k] for k <= np.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if k < 0:
        raise ValueError("k must be nonnegative")
    mu = n * p
    if mu == 0:
        return 1.0 if k == 0 else 0.0
    x = k / mu
    H = 1.0 if x == 0 else 1.0 - x + x * math.log(x)
    return math.exp(-mu * H)


def chernoff_check(grid, n=None):
    """Boxes violating the (1 +- gamma) n nu(Q) count bounds, with union-bound predictions."""
    n = grid.n_points if n is None else n
    g, mu = grid.gamma, n * grid.mass
    over = grid.counts > (1 + g) * mu
    under = grid.counts < (1 - g) * mu
    pred_up = sum(chernoff_tail(n, min(p, 1.0), (1 + g) * n * p) for p in grid.mass)
    pred_lo = sum(chernoff_tail(n, min(p, 1.0), (1 - g) * n * p) for p in grid.mass)
    return {
        "boxes": grid.n_boxes,
        "upper_violations": int(over.sum()),
        "lower_violations": int(under.sum()),
        "upper_prediction": pred_up,
        "lower_prediction": pred_lo,
    }


# ---------------------------------------------------------------- kernel bounds


def _box_distances(grid, i, j):
    gap = np.maximum(0.0, np.maximum(grid.box_lo[j] - grid.box_hi[i], grid.box_lo[i] - grid.box_hi[j]))
    span = np.maximum(grid.box_hi[j] - grid.box_lo[i], grid.box_hi[i] - grid.box_lo[j])
    return np.sqrt(np.sum(gap * gap, axis=-1)), np.sqrt(np.sum(span * span, axis=-1))


def _truncated(kernel, t, t_cut):
    t = np.asarray(t, float)
    return np.where(t <= t_cut, evaluate(kernel, t), 0.0)


def kernel_box_bounds(grid, kernel, r, i, j, tail_eps=1e-12):
    """(phi_lo, phi_hi): kernel bounds over the bounding boxes of Q_i and Q_j."""
    kernel = kernel.with_dim(grid.dim) if kernel.dim != grid.dim else kernel
    t_cut = effective_support(kernel, min(tail_eps, 0.5 * kernel.phi0))
    dmin, dmax = _box_distances(grid, i, j)
    return float(_truncated(kernel, dmax / r, t_cut)), float(_truncated(kernel, dmin / r, t_cut))


def bound_matrices(grid, kernel, r=None, tail_eps=1e-12):
    """Sparse (Phi_lo, Phi_hi) over all box pairs within interaction range, diagonal included.

    Both share one sparsity pattern (pairs with min distance <= r * r_cut).
    """
    r = grid.r if r is None else r
    kernel = kernel.with_dim(grid.dim) if kernel.dim != grid.dim else kernel
    key = (kernel.profile, kernel.dim, None if kernel.t is None else kernel.t.tobytes(),
           None if kernel.phi is None else kernel.phi.tobytes(), r, tail_eps)
    if key in grid._cache:
        return grid._cache[key]
    t_cut = effective_support(kernel, min(tail_eps, 0.5 * kernel.phi0))
    reach = r * t_cut
    mid = 0.5 * (grid.box_lo + grid.box_hi)
    half = float(np.max(np.linalg.norm(grid.box_hi - grid.box_lo, axis=1))) / 2
    tree = cKDTree(mid)
    pairs = tree.query_pairs(reach + 2 * half + 1e-12, output_type="ndarray")
    m = grid.n_boxes
    ii = np.concatenate([np.arange(m), pairs[:, 0], pairs[:, 1]])
    jj = np.concatenate([np.arange(m), pairs[:, 1], pairs[:, 0]])
    dmin, dmax = _box_distances(grid, ii, jj)
    keep = dmin <= reach
    ii, jj, dmin, dmax = ii[keep], jj[keep], dmin[keep], dmax[keep]
    lo = _truncated(kernel, dmax / r, t_cut)
    hi = _truncated(kernel, dmin / r, t_cut)
    order = np.lexsort((jj, ii))
    ii, jj, lo, hi = ii[order], jj[order], lo[order], hi[order]
    indptr = np.concatenate([[0], np.cumsum(np.bincount(ii, minlength=m))])
    P_lo = sp.csr_matrix((lo, jj, indptr), shape=(m, m))
    P_hi = sp.csr_matrix((hi, jj.copy(), indptr.copy()), shape=(m, m))
    grid._cache[key] = (P_lo, P_hi)
    return P_lo, P_hi


def _bilinear(P, x, y, skip_diagonal=False):
    """sum_ij P_ij x_i y_j with compensated summation."""
    coo = P.tocoo()
    terms = coo.data * x[coo.row] * y[coo.col]
    if skip_diagonal:
        terms = terms[coo.row != coo.col]
    return math.fsum(terms)


def modified_cut(grid, g, members):
    """Cut'(Y): the cut with every pair weighted by the lower box bound phi_lo."""
    P_lo, _ = bound_matrices(grid, g.kernel, g.r, g.tail_eps)
    b, w = grid.box_counts(members)
    return _bilinear(P_lo, b.astype(float), w.astype(float))


def modified_volume(grid, g, members, v=1):
    """Modified volume: |Y| for v=1; for v=2 pairs within a box carry zero weight."""
    y = as_mask(members, grid.n_points)
    if v == 1:
        return float(np.count_nonzero(y))
    if v != 2:
        raise ValueError("v must be 1 or 2")
    P_lo, _ = bound_matrices(grid, g.kernel, g.r, g.tail_eps)
    b, _ = grid.box_counts(y)
    return _bilinear(P_lo, b.astype(float), grid.counts.astype(float), skip_diagonal=True)


def boundary_flux(grid, g, members, colors):
    """Z_n: the part of Cut'(Y') carried by pairs in oppositely coloured boxes."""
    if colors.n_grey:
        raise ValueError("boundary_flux needs a colouring without grey boxes")
    P_lo, _ = bound_matrices(grid, g.kernel, g.r, g.tail_eps)
    b, w = grid.box_counts(members)
    coo = P_lo.tocoo()
    sel = (colors.labels[coo.row] == BLACK) & (colors.labels[coo.col] == WHITE)
    r_, c_, d_ = coo.row[sel], coo.col[sel], coo.data[sel]
    return math.fsum(d_ * (b[r_] * w[c_] + w[r_] * b[c_]))
