"""Kernel-weighted geometric graphs on point clouds, and the discrete cut functionals."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from cheegercut.kernel import Kernel, effective_support, evaluate

DEFAULT_TAIL_EPS = 1e-12


class DegenerateGraphError(ValueError):
    pass


def as_mask(members, n):
    """Coerce a boolean mask or an iterable of indices into a length-n boolean array."""
    arr = np.asarray(members)
    if arr.dtype == bool:
        if arr.shape != (n,):
            raise ValueError(f"membership mask must have length {n}")
        return arr
    mask = np.zeros(n, bool)
    if arr.size:
        mask[arr.astype(np.int64)] = True
    return mask


@dataclass(frozen=True, eq=False)
class GeoGraph:
    """The phi-weighted geometric graph G_phi(X, r), truncated at r * r_cut.

    ``edges_i < edges_j`` list each positive-weight pair once, sorted
    lexicographically; ``adjacency`` is the symmetric CSR matrix with sorted
    column indices.
    """

    points: np.ndarray = field(repr=False)
    r: float
    kernel: Kernel
    tail_eps: float
    r_cut: float
    edges_i: np.ndarray = field(repr=False)
    edges_j: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    adjacency: sp.csr_matrix = field(repr=False)
    degree: np.ndarray = field(repr=False)
    all_pairs: bool = False

    @property
    def n(self):
        return len(self.points)

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def n_edges(self):
        return len(self.weights)

    def neighbors(self, i):
        lo, hi = self.adjacency.indptr[i], self.adjacency.indptr[i + 1]
        return self.adjacency.indices[lo:hi], self.adjacency.data[lo:hi]

    def weight(self, i, j):
        nbr, w = self.neighbors(i)
        k = np.searchsorted(nbr, j)
        return float(w[k]) if k < len(nbr) and nbr[k] == j else 0.0

    @property
    def truncation_bound(self):
        """Upper bound on the weight dropped from any cut or volume sum by truncation."""
        return 0.0 if self.kernel.profile == "uniform" else self.n**2 * self.tail_eps

    def total_weight(self):
        return math.fsum(self.weights)


def _cell_pairs(points, h):
    """Candidate pairs (a, b), a < b, of points in the same or adjacent cells of side h."""
    n, d = points.shape
    cell = np.floor((points - points.min(axis=0)) / h).astype(np.int64)
    dims = cell.max(axis=0) + 3
    key = np.ravel_multi_index((cell + 1).T, dims)
    order = np.argsort(key, kind="stable")
    skey = key[order]
    ukeys, starts, counts = np.unique(skey, return_index=True, return_counts=True)
    strides = np.array([int(np.prod(dims[k + 1:])) for k in range(d)], dtype=np.int64)
    offsets = [o for o in itertools.product((-1, 0, 1), repeat=d) if o >= (0,) * d]
    pa, pb = [], []
    pos_of_point = np.repeat(np.arange(len(ukeys)), counts)
    for off in offsets:
        delta = int(np.dot(off, strides))
        target = ukeys + delta
        loc = np.searchsorted(ukeys, target)
        loc_c = np.minimum(loc, len(ukeys) - 1)
        found = ukeys[loc_c] == target
        tgt_start = np.where(found, starts[loc_c], 0)
        tgt_count = np.where(found, counts[loc_c], 0)
        per_point_cell = pos_of_point
        if delta == 0:
            # pairs within a cell: partner ranks strictly after the point's own rank
            rank_in_cell = np.arange(n) - starts[per_point_cell]
            m = counts[per_point_cell] - rank_in_cell - 1
            first = np.arange(n) + 1
        else:
            m = tgt_count[per_point_cell]
            first = tgt_start[per_point_cell]
        total = int(m.sum())
        if total == 0:
            continue
        src = np.repeat(np.arange(n), m)
        run_start = np.repeat(np.cumsum(m) - m, m)
        dst = np.repeat(first, m) + (np.arange(total) - run_start)
        pa.append(order[src])
        pb.append(order[dst])
    if not pa:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    a, b = np.concatenate(pa), np.concatenate(pb)
    return np.minimum(a, b), np.maximum(a, b)


def build_graph(points, r, kernel, tail_eps=DEFAULT_TAIL_EPS):
    """Build the truncated phi-weighted geometric graph with a uniform cell list."""
    points = np.ascontiguousarray(np.atleast_2d(np.asarray(points, float)))
    if r <= 0:
        raise ValueError("r must be positive")
    n, d = points.shape
    if kernel.dim != d:
        kernel = kernel.with_dim(d)
    r_cut = effective_support(kernel, min(tail_eps, 0.5 * kernel.phi0))
    reach = r * r_cut
    span = float(np.linalg.norm(points.max(axis=0) - points.min(axis=0))) if n > 1 else 0.0
    all_pairs = reach > span
    if all_pairs and n > 1:
        warnings.warn("interaction range exceeds the point cloud diameter; using all pairs", stacklevel=2)
        a, b = np.triu_indices(n, k=1)
    else:
        a, b = _cell_pairs(points, reach)
    diff = points[a] - points[b]
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    keep = dist <= reach
    a, b, dist = a[keep], b[keep], dist[keep]
    w = evaluate(kernel, dist / r) if len(dist) else np.empty(0)
    w = np.atleast_1d(w)
    pos = w > 0
    a, b, w = a[pos], b[pos], w[pos]
    order = np.lexsort((b, a))
    a, b, w = a[order].astype(np.int64), b[order].astype(np.int64), w[order]
    adj = sp.coo_matrix((np.concatenate([w, w]), (np.concatenate([a, b]), np.concatenate([b, a]))), shape=(n, n)).tocsr()
    adj.sort_indices()
    ptr, dat = adj.indptr, adj.data
    degree = np.array([math.fsum(dat[ptr[i]:ptr[i + 1]]) for i in range(n)]) if n else np.empty(0)
    return GeoGraph(points, float(r), kernel, tail_eps, r_cut, a, b, w, adj, degree, all_pairs)


# ---------------------------------------------------------------- functionals


def cut_weight(g, members):
    """Cut_{n,phi}(Y): total weight of edges with exactly one endpoint in Y."""
    y = as_mask(members, g.n)
    crossing = y[g.edges_i] != y[g.edges_j]
    return math.fsum(g.weights[crossing])


def volume(g, members, v=1):
    """Vol_{n,v}(Y): |Y| for v = 1, weighted degree sum for v = 2."""
    y = as_mask(members, g.n)
    if v == 1:
        return float(np.count_nonzero(y))
    if v == 2:
        return math.fsum(g.degree[y])
    raise ValueError("v must be 1 or 2")


def balance(g, members, v=1, b=1):
    """Bal_{n,v,b}(Y) in [0, 1]."""
    y = as_mask(members, g.n)
    vy, vc = volume(g, y, v), volume(g, ~y, v)
    tot = volume(g, np.ones(g.n, bool), v)
    if tot <= 0:
        raise DegenerateGraphError("total volume is zero")
    if b == 1:
        return min(vy, vc) / tot
    if b == 2:
        return vy * vc / (tot * tot)
    raise ValueError("b must be 1 or 2")


def objective(g, members, v=1, b=1):
    """Cut(Y) / Bal(Y) for a nonempty proper subset Y."""
    y = as_mask(members, g.n)
    k = int(np.count_nonzero(y))
    if k == 0 or k == g.n:
        raise ValueError("Y must be a nonempty proper subset")
    cut = cut_weight(g, y)
    if cut == 0:
        return 0.0
    bal = balance(g, y, v, b)
    return math.inf if bal == 0 else cut / bal


def rescaled_estimator(value, n, r, d):
    """value / (n^2 r^(d+1))."""
    if n <= 0 or r <= 0:
        raise ValueError("n and r must be positive")
    return value / (n * n * r ** (d + 1))


def graph_stats(g):
    vol2 = volume(g, np.ones(g.n, bool), 2)
    return {
        "n": g.n,
        "edges": g.n_edges,
        "vol2": vol2,
        "vol2_rescaled": vol2 / (g.n**2 * g.r**g.dim),
        "truncation_bound": g.truncation_bound,
    }
