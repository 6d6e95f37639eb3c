"""Partition optimizers for the Cheeger and bisection objectives."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from cheegercut.geograph import as_mask, cut_weight, objective
from cheegercut.granulation import BLACK, GREY, bound_matrices, classify_boxes

EXACT_CHEEGER_MAX_N = 22
EXACT_MBIS_MAX_N = 24
FIEDLER_TOL = 1e-6


class EnumerationBudgetError(ValueError):
    pass


@dataclass
class OptimizerResult:
    partition: np.ndarray
    value: float
    method: str
    iterations: int = 0
    wall_time: float = 0.0
    flags: dict = field(default_factory=dict)

    def summary(self, **extra):
        out = {"value": self.value, "method": self.method, "iterations": self.iterations,
               "size": int(np.count_nonzero(self.partition))}
        out.update(self.flags)
        out.update(extra)
        return out


def _lex_key(mask_int, n):
    # membership tuple (y_0, ..., y_{n-1}) compared lexicographically
    return tuple((mask_int >> k) & 1 for k in range(n))


def _mask_from_int(mask_int, n):
    return np.array([(mask_int >> k) & 1 for k in range(n)], bool)


def _dense_weights(g):
    W = np.zeros((g.n, g.n))
    W[g.edges_i, g.edges_j] = g.weights
    W[g.edges_j, g.edges_i] = g.weights
    return W


def _bits(k):
    return ((np.arange(2**k)[:, None] >> np.arange(k)[None, :]) & 1).astype(float)


class _HalfEnumeration:
    """Cut and volumes of all subsets, split into low and high halves of the vertex set."""

    def __init__(self, g):
        n = g.n
        self.n, self.n1 = n, n // 2
        self.n2 = n - self.n1
        W = _dense_weights(g)
        deg = W.sum(axis=1)
        L, H = slice(0, self.n1), slice(self.n1, n)
        self.BL, self.BH = _bits(self.n1), _bits(self.n2)
        self.cutL = self.BL @ deg[L] - np.einsum("mi,ij,mj->m", self.BL, W[L, L], self.BL)
        self.cutH = self.BH @ deg[H] - np.einsum("mi,ij,mj->m", self.BH, W[H, H], self.BH)
        self.cross = 2.0 * (self.BH @ W[L, H].T)  # (2^n2, n1)
        self.popL, self.popH = self.BL.sum(axis=1), self.BH.sum(axis=1)
        self.volL, self.volH = self.BL @ deg[L], self.BH @ deg[H]
        self.vol2_total = deg.sum()
        self.total_weight = g.total_weight()

    def chunks(self, rows=512):
        for s in range(0, len(self.BL), rows):
            sl = slice(s, s + rows)
            cut = self.cutL[sl, None] + self.cutH[None, :] - self.BL[sl] @ self.cross.T
            yield s, cut

    def mask_int(self, lo, hi):
        return int(lo) | (int(hi) << self.n1)


def _pick_exact(g, cands, score, n):
    """Recompute candidate masks exactly; smallest value, then lexicographically smallest mask."""
    best = None
    for m in cands:
        val = score(_mask_from_int(m, n))
        key = (val, _lex_key(m, n))
        if best is None or key < best[0]:
            best = (key, m)
    return best[1], best[0][0]


def _collect(cands, s, vals, vmin, tol, limit=10000):
    lo, hi = np.nonzero(vals <= vmin + tol)
    for a, b in zip(lo, hi):
        cands.append((float(vals[a, b]), s + a, b))
    if len(cands) > 4 * limit:
        cands.sort()
        del cands[limit:]


def exact_cheeger(g, v=1, b=1):
    """Exhaustive minimum of Cut/Bal over all nonempty proper subsets (n <= 22)."""
    n = g.n
    if n > EXACT_CHEEGER_MAX_N:
        raise EnumerationBudgetError(f"exact enumeration limited to n <= {EXACT_CHEEGER_MAX_N}")
    if n < 2:
        raise ValueError("need at least two points")
    t0 = time.perf_counter()
    E = _HalfEnumeration(g)
    tot = float(n) if v == 1 else E.vol2_total
    if tot <= 0:
        from cheegercut.geograph import DegenerateGraphError
        raise DegenerateGraphError("total volume is zero")
    full = E.mask_int(2**E.n1 - 1, 2**E.n2 - 1)
    tol = 1e-10 * (E.total_weight * n + 1.0)
    results = []
    vmin = math.inf
    for s, cut in E.chunks():
        if v == 1:
            vy = E.popL[s:s + len(cut), None] + E.popH[None, :]
        else:
            vy = E.volL[s:s + len(cut), None] + E.volH[None, :]
        vc = tot - vy
        bal = np.minimum(vy, vc) / tot if b == 1 else vy * vc / (tot * tot)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(np.abs(cut) <= tol, 0.0, np.where(bal > 0, cut / bal, np.inf))
        if s == 0:
            val[0, 0] = np.inf
        last = full >> E.n1
        if s <= (full & (2**E.n1 - 1)) < s + len(cut):
            val[(full & (2**E.n1 - 1)) - s, last] = np.inf
        cmin = float(val.min())
        if cmin < vmin - tol:
            results = []
        vmin = min(vmin, cmin)
        _collect(results, s, val, vmin, tol)
    results = [(x, a, c) for x, a, c in results if x <= vmin + tol]
    cands = [E.mask_int(a, c) for _, a, c in results]
    m, val = _pick_exact(g, cands, lambda y: objective(g, y, v, b), n)
    return OptimizerResult(_mask_from_int(m, n), val, "exact", 2**n - 2, time.perf_counter() - t0)


def exact_mbis(g):
    """Minimum cut over all subsets of size floor(n/2) (n <= 24)."""
    n = g.n
    if n > EXACT_MBIS_MAX_N:
        raise EnumerationBudgetError(f"exact bisection limited to n <= {EXACT_MBIS_MAX_N}")
    if n < 2:
        raise ValueError("need at least two points")
    t0 = time.perf_counter()
    E = _HalfEnumeration(g)
    k = n // 2
    tol = 1e-10 * (E.total_weight + 1.0)
    results, vmin = [], math.inf
    for s, cut in E.chunks():
        ok = (E.popL[s:s + len(cut), None] + E.popH[None, :]) == k
        val = np.where(ok, cut, np.inf)
        cmin = float(val.min())
        if cmin < vmin - tol:
            results = []
        vmin = min(vmin, cmin)
        _collect(results, s, val, vmin, tol)
    results = [(x, a, c) for x, a, c in results if x <= vmin + tol]
    cands = [E.mask_int(a, c) for _, a, c in results]
    m, val = _pick_exact(g, cands, lambda y: cut_weight(g, y), n)
    return OptimizerResult(_mask_from_int(m, n), val, "exact_mbis", math.comb(n, k), time.perf_counter() - t0)


# ---------------------------------------------------------------- sweeps


def _prefix_objectives(g, order, v, b):
    """Objective of every prefix {order[:k]}, k = 1..n-1, via a difference array."""
    n = g.n
    rank = np.empty(n, np.int64)
    rank[order] = np.arange(n)
    ri, rj = rank[g.edges_i], rank[g.edges_j]
    lo, hi = np.minimum(ri, rj), np.maximum(ri, rj)
    diff = np.zeros(n + 1)
    np.add.at(diff, lo + 1, g.weights)
    np.add.at(diff, hi + 1, -g.weights)
    cut = np.cumsum(diff)[1:n]
    if v == 1:
        vy = np.arange(1, n, dtype=float)
        tot = float(n)
    else:
        cs = np.cumsum(g.degree[order])
        vy, tot = cs[:-1], cs[-1]
    vc = tot - vy
    bal = np.minimum(vy, vc) / tot if b == 1 else vy * vc / (tot * tot)
    scale = 1e-12 * max(g.total_weight(), 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(cut <= scale, 0.0, np.where(bal > 0, cut / bal, np.inf))


def fiedler_vector(g, tol=FIEDLER_TOL, max_iter=None, seed=0):
    """Second eigenvector of the graph Laplacian by deflated power iteration on c*I - L.

    Returns (vector, converged, iterations).
    """
    n = g.n
    max_iter = 10 * n if max_iter is None else max_iter
    A, deg = g.adjacency, g.degree
    c = 2.0 * float(deg.max()) if n else 1.0
    if c == 0:
        return np.zeros(n), False, 0
    x = np.random.default_rng(seed).standard_normal(n)
    x -= x.mean()
    x /= np.linalg.norm(x)
    for it in range(1, max_iter + 1):
        Lx = deg * x - A @ x
        y = c * x - Lx
        y -= y.mean()
        y /= np.linalg.norm(y)
        if it % 10 == 0 or it == max_iter:
            Ly = deg * y - A @ y
            lam = float(y @ Ly)
            if np.linalg.norm(Ly - lam * y) <= tol * c:
                return y, True, it
        x = y
    return x, False, max_iter


def sweep_cut(g, v=1, b=1, mode="axis"):
    """Best prefix cut along coordinate orderings or the Fiedler ordering."""
    n = g.n
    if n < 2:
        raise ValueError("need at least two points")
    t0 = time.perf_counter()
    flags = {}
    orders = []
    iters = 0
    if mode == "fiedler":
        ncomp, _ = connected_components(g.adjacency, directed=False)
        if ncomp > 1:
            flags["fallback"] = "disconnected"
        else:
            vec, ok, iters = fiedler_vector(g)
            if ok:
                orders.append(("fiedler", np.argsort(vec, kind="stable")))
            else:
                flags["fallback"] = "power_iteration_cap"
        if not orders:
            mode = "axis"
    if mode == "axis":
        orders = [(f"axis{k}", np.argsort(g.points[:, k], kind="stable")) for k in range(g.dim)]
    elif mode != "fiedler":
        raise ValueError(f"unknown sweep mode {mode!r}")
    best = None
    for name, order in orders:
        vals = _prefix_objectives(g, order, v, b)
        k = int(np.argmin(vals))
        if best is None or vals[k] < best[0]:
            best = (vals[k], name, order[:k + 1])
    mask = as_mask(best[2], n)
    flags["ordering"] = best[1]
    return OptimizerResult(mask, objective(g, mask, v, b), f"sweep_{mode}", iters + len(orders) * (n - 1),
                           time.perf_counter() - t0, flags)


# ---------------------------------------------------------------- greyscale removal


def greyscale_removal(g, grid, members, mode="cut", v=1):
    """Recolour every grey box wholly black or white, one box at a time in ascending id."""
    if mode not in ("cut", "ratio"):
        raise ValueError("mode must be 'cut' or 'ratio'")
    y = as_mask(members, g.n).copy()
    colors = classify_boxes(grid, y)
    grey_ids = np.flatnonzero(colors.labels == GREY)
    if len(grey_ids) == 0:
        return y
    P, _ = bound_matrices(grid, g.kernel, g.r, g.tail_eps)
    indptr, indices, data = P.indptr, P.indices, P.data
    bl = colors.black.astype(float)
    wh = colors.white.astype(float)
    labels = colors.labels.copy()
    cnt = grid.counts.astype(float)
    offdiag = P.tocoo()
    off = offdiag.row != offdiag.col
    orow, ocol, odat = offdiag.row[off], offdiag.col[off], offdiag.data[off]
    vbar_unit = np.bincount(orow, weights=odat * cnt[ocol], minlength=grid.n_boxes)  # sum_{j != i} Phi_ij c_j
    for i in grey_ids:
        nb = indices[indptr[i]:indptr[i + 1]]
        ph = data[indptr[i]:indptr[i + 1]]
        keep = nb != i
        nb, ph = nb[keep], ph[keep]
        l1 = math.fsum(ph * bl[nb])
        w1 = math.fsum(ph * wh[nb])
        if mode == "cut":
            to_black = w1 < l1
        else:
            bg = (labels == BLACK) | (labels == GREY)
            l2 = math.fsum(ph * bl[nb] * bg[nb])
            alpha = w1 - l2
            wsum = np.bincount(orow, weights=odat * wh[ocol], minlength=grid.n_boxes)
            x = math.fsum((bl * wsum)[bg])
            if v == 1:
                beta = 1.0
                yv = math.fsum(bl[bg])
            else:
                beta = l1
                yv = math.fsum((bl * vbar_unit)[bg])
            s = alpha * yv - beta * x
            k_black, k_white = wh[i], -bl[i]
            ok_black = yv + beta * k_black > 0
            ok_white = yv + beta * k_white > 0
            to_black = s < 0
            if to_black and not ok_black:
                to_black = False
            elif not to_black and not ok_white and ok_black:
                to_black = True
            if not ok_black and not ok_white:
                to_black = False
        pts = grid.members(i)
        y[pts] = to_black
        if to_black:
            bl[i], wh[i], labels[i] = cnt[i], 0.0, BLACK
        else:
            bl[i], wh[i], labels[i] = 0.0, cnt[i], 0
    return y


# ---------------------------------------------------------------- bisection


def median_split(g):
    """Best of the axis-median bisections: the first floor(n/2) points along each coordinate."""
    k = g.n // 2
    best = None
    for ax in range(g.dim):
        order = np.argsort(g.points[:, ax], kind="stable")
        y = as_mask(order[:k], g.n)
        c = cut_weight(g, y)
        if best is None or c < best[0]:
            best = (c, y)
    return best[1]


def local_search_bisection(g, members, max_passes=50):
    """Best-improvement black/white swaps near the cut, preserving |Y| = floor(n/2)."""
    t0 = time.perf_counter()
    y = as_mask(members, g.n).copy()
    n = g.n
    if np.count_nonzero(y) != n // 2:
        raise ValueError("initial partition must have floor(n/2) members")
    A = g.adjacency
    indptr, indices, data = A.indptr, A.indices, A.data
    # D(u) = external - internal weight
    rows = np.repeat(np.arange(n), np.diff(indptr))
    same = y[rows] == y[indices]
    D = np.bincount(rows, weights=np.where(same, -data, data), minlength=n)
    cut = cut_weight(g, y)
    eps = 1e-12 * max(g.total_weight(), 1.0)
    swaps = passes = 0

    def flip(u):
        y[u] = not y[u]
        nb = indices[indptr[u]:indptr[u + 1]]
        w = data[indptr[u]:indptr[u + 1]]
        D[nb] += np.where(y[nb] == y[u], -2.0, 2.0) * w
        D[u] = -D[u]

    def edge_w(a, b):
        nb = indices[indptr[a]:indptr[a + 1]]
        k = np.searchsorted(nb, b)
        return data[indptr[a] + k] if k < len(nb) and nb[k] == b else 0.0

    while passes < max_passes:
        passes += 1
        cross = y[g.edges_i] != y[g.edges_j]
        ends = np.unique(np.concatenate([g.edges_i[cross], g.edges_j[cross]]))
        if len(ends) == 0:
            break
        cand = np.zeros(n, bool)
        cand[ends] = True
        cand[indices[np.concatenate([np.arange(indptr[u], indptr[u + 1]) for u in ends])]] = True
        moved = 0
        while True:
            ca = np.flatnonzero(cand & y)
            cb = np.flatnonzero(cand & ~y)
            if len(ca) == 0 or len(cb) == 0:
                break
            ca = ca[np.argsort(-D[ca], kind="stable")]
            cb = cb[np.argsort(-D[cb], kind="stable")]
            best, pair = eps, None
            top_b = D[cb[0]]
            for a in ca:
                da = D[a]
                if da + top_b <= best:
                    break
                for bb in cb:
                    db = D[bb]
                    if da + db <= best:
                        break
                    gain = da + db - 2.0 * edge_w(a, bb)
                    if gain > best:
                        best, pair = gain, (a, bb)
            if pair is None:
                break
            a, bb = pair
            flip(a)
            flip(bb)
            cut -= best
            for u in (a, bb):
                cand[indices[indptr[u]:indptr[u + 1]]] = True
            moved += 1
        swaps += moved
        if moved == 0:
            break
    value = cut_weight(g, y)
    return OptimizerResult(y, value, "local_search", swaps, time.perf_counter() - t0, {"passes": passes})


# ---------------------------------------------------------------- pipeline


def refine_pipeline(g, grid, v=1, b=1, mode="axis"):
    """Sweep cut, then greyscale removal in both modes; keep the best under the true objective."""
    t0 = time.perf_counter()
    base = sweep_cut(g, v, b, mode)
    best = (base.value, base.partition, "sweep")
    n = g.n
    for gm in ("cut", "ratio"):
        y = greyscale_removal(g, grid, base.partition, gm, v)
        k = int(np.count_nonzero(y))
        if k == 0 or k == n:
            continue
        val = objective(g, y, v, b)
        if val < best[0]:
            best = (val, y, f"greyscale_{gm}")
    flags = dict(base.flags)
    flags["stage"] = best[2]
    return OptimizerResult(best[1], best[0], "refine", base.iterations, time.perf_counter() - t0, flags)
