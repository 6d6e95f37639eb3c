"""Continuum Cheeger and bisection values of a domain, by family scans and a grid cross-check.

Both routes return values of concrete sets, so every reported value is an
upper bound on the infimum over all sets.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import optimize, special

from cheegercut.kernel import ball_volume
from cheegercut.domain import (
    Ball,
    Box,
    BoxUnion,
    Complement,
    CornerBall,
    Halfspace,
    SphericalCap,
    UnsupportedDomainError,
    continuum_tv,
    corners,
    rect_disc_area,
    region_volume,
    segment_disc_length,
    total_volume,
)

SCAN_STEP = 1e-4
SCAN_STEP_TABULATED = 1e-3
MBIS_XTOL = 1e-10
MBIS_CONSTRAINT_TOL = 1e-8
TIE_RTOL = 1e-9


def default_grid_cells(dim):
    return {2: 256, 3: 64}.get(dim, 16)


@dataclass
class ContinuumResult:
    value: float
    argmin: object
    objective: str
    family_value: float
    family_argmin: object
    grid_value: float
    grid_argmin: object
    minimizers: list = field(default_factory=list)

    def summary(self):
        return {
            "objective": self.objective,
            "value": self.value,
            "argmin": self.argmin.describe(),
            "family_value": self.family_value,
            "grid_value": self.grid_value if math.isfinite(self.grid_value) else None,
            "upper_bound_heuristic": True,
        }


# ---------------------------------------------------------------- cell grid


class CellGrid:
    """A regular grid of cells over the bounding box of D, with exact cell masses and face weights.

    Only cells meeting D are active; a set is a union of active cells
    intersected with D.
    """

    def __init__(self, dd, cells):
        self.dd = dd
        d = dd.dim
        self.shape = (cells,) * d if np.isscalar(cells) else tuple(cells)
        lo, hi = dd.bbox
        self.lo, self.h = lo, (hi - lo) / np.asarray(self.shape)
        idx = np.indices(self.shape).reshape(d, -1).T
        self.cell_lo = lo + idx * self.h
        self.cell_hi = self.cell_lo + self.h
        self.centers = self.cell_lo + 0.5 * self.h
        self._mass = {v: self._cell_masses(v) for v in (1, 2)}
        self.active = self._mass[1] > 0
        self.faces_a, self.faces_b, self.face_w = self._faces()

    @classmethod
    def for_boxunion(cls, dd, A):
        return _cached_grid(dd, A.shape)

    def boxunion(self, mask):
        return BoxUnion(tuple(self.lo), tuple(self.h), self.shape, mask)

    def cell_mass(self, v):
        return self._mass[v]

    def _cell_masses(self, v):
        dd, shape = self.dd, self.dd.shape
        n = len(self.cell_lo)
        vol = float(np.prod(self.h))
        if isinstance(shape, Box) and dd.uniform:
            return np.full(n, vol * dd.rho_bounds[0] ** v)
        if isinstance(shape, Box):
            # two-point Gauss-Legendre per axis on each cell
            gl_x, gl_w = np.polynomial.legendre.leggauss(2)
            d = dd.dim
            offs = np.stack(np.meshgrid(*([gl_x] * d), indexing="ij"), -1).reshape(-1, d)
            wts = np.prod(np.stack(np.meshgrid(*([gl_w] * d), indexing="ij"), -1).reshape(-1, d), axis=1)
            out = np.zeros(n)
            for o, w in zip(offs, wts):
                out += w * dd.rho(self.centers + 0.5 * self.h * o) ** v
            return out * vol / 2**d
        if isinstance(shape, Ball):
            c, R = np.asarray(shape.center), shape.radius
            near = np.clip(c, self.cell_lo, self.cell_hi)
            far = np.maximum(np.abs(self.cell_lo - c), np.abs(self.cell_hi - c))
            meets = np.sum((near - c) ** 2, axis=1) < R * R
            inside = np.sum(far**2, axis=1) <= R * R
            out = np.zeros(n)
            if dd.uniform:
                out[inside] = vol * dd.rho_bounds[0] ** v
            else:
                out[inside] = [dd.mass_in_box(a, b, v) for a, b in zip(self.cell_lo[inside], self.cell_hi[inside])]
            for i in np.nonzero(meets & ~inside)[0]:
                out[i] = dd.mass_in_box(self.cell_lo[i], self.cell_hi[i], v)
            return out
        raise UnsupportedDomainError("cell grids need a box or ball domain")

    def _faces(self):
        dd, d = self.dd, self.dd.dim
        lin = np.arange(len(self.cell_lo)).reshape(self.shape)
        fa, fb, fw = [], [], []
        for k in range(d):
            a = np.take(lin, np.arange(self.shape[k] - 1), axis=k).ravel()
            b = np.take(lin, np.arange(1, self.shape[k]), axis=k).ravel()
            both = self.active[a] & self.active[b]
            a, b = a[both], b[both]
            area = float(np.prod(np.delete(self.h, k)))
            pos = self.cell_hi[a, k]
            if isinstance(dd.shape, Box):
                centers = self.centers[a].copy()
                centers[:, k] = pos
                w = area * dd.rho(centers) ** 2
            else:
                c, R = np.asarray(dd.shape.center), dd.shape.radius
                rho2 = dd.rho_bounds[0] ** 2 if dd.uniform else None
                others = [j for j in range(d) if j != k]
                w = np.empty(len(a))
                for m, (i, x) in enumerate(zip(a, pos)):
                    r2 = R * R - (x - c[k]) ** 2
                    lo_i, hi_i = self.cell_lo[i], self.cell_hi[i]
                    if d == 2:
                        j = others[0]
                        ar = segment_disc_length(lo_i[j] - c[j], hi_i[j] - c[j], r2)
                    elif d == 3:
                        j1, j2 = others
                        ar = rect_disc_area(lo_i[j1], hi_i[j1], lo_i[j2], hi_i[j2], c[j1], c[j2], math.sqrt(max(r2, 0.0)))
                    else:
                        raise UnsupportedDomainError("ball cell grids support d <= 3")
                    if rho2 is None:
                        ctr = self.centers[i].copy()
                        ctr[k] = x
                        w[m] = ar * float(dd.rho(ctr)[0]) ** 2
                    else:
                        w[m] = ar * rho2
            keep = w > 0
            fa.append(a[keep])
            fb.append(b[keep])
            fw.append(w[keep])
        return np.concatenate(fa), np.concatenate(fb), np.concatenate(fw)

    def tv(self, mask):
        mask = np.asarray(mask, bool)
        cut = mask[self.faces_a] != mask[self.faces_b]
        return math.fsum(self.face_w[cut])

    def volume(self, mask, v=1):
        return math.fsum(self._mass[v][np.asarray(mask, bool)])

    def laplacian(self):
        n = len(self.cell_lo)
        W = sp.coo_matrix((self.face_w, (self.faces_a, self.faces_b)), shape=(n, n)).tocsr()
        W = W + W.T
        return sp.diags(np.asarray(W.sum(axis=1)).ravel()) - W

    def prefix_values(self, order):
        """TV and Vol_1, Vol_2 of every prefix of ``order`` (prefix k holds order[:k])."""
        n = len(order)
        rank = np.empty(len(self.cell_lo), np.int64)
        rank[:] = n
        rank[order] = np.arange(n)
        ra, rb = rank[self.faces_a], rank[self.faces_b]
        lo, hi = np.minimum(ra, rb), np.maximum(ra, rb)
        valid = lo < n
        diff = np.zeros(n + 2)
        np.add.at(diff, lo[valid] + 1, self.face_w[valid])
        np.add.at(diff, np.minimum(hi[valid], n) + 1, -self.face_w[valid])
        tv = np.cumsum(diff)[: n + 1]
        vol1 = np.concatenate([[0.0], np.cumsum(self._mass[1][order])])
        vol2 = np.concatenate([[0.0], np.cumsum(self._mass[2][order])])
        return tv, vol1, vol2


_GRID_CACHE: dict = {}


def _cached_grid(dd, shape):
    key = (id(dd), tuple(shape))
    cg = _GRID_CACHE.get(key)
    if cg is None or cg.dd is not dd:
        cg = CellGrid(dd, tuple(shape))
        _GRID_CACHE[key] = cg
    return cg


def _ratio(tv, va, tot, b):
    vc = tot - va
    if b == 1:
        bal = np.minimum(va, vc) / tot
    else:
        bal = va * vc / (tot * tot)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(bal > 0, tv / np.where(bal > 0, bal, 1.0), np.inf)


def _grid_orderings(cg):
    act = np.nonzero(cg.active)[0]
    orderings = []
    for k in range(cg.dd.dim):
        orderings.append(act[np.lexsort((act, cg.centers[act, k]))])
    lo, hi = cg.dd.bbox
    if isinstance(cg.dd.shape, Box):
        for corner in corners(cg.dd.dim):
            c = np.where(np.asarray(corner, bool), hi, lo)
            dist = np.sum((cg.centers[act] - c) ** 2, axis=1)
            orderings.append(act[np.lexsort((act, dist))])
    orderings.extend(_fiedler_orderings(cg, act))
    return orderings


def _fiedler_orderings(cg, act, k=2):
    """Orderings by the first k nontrivial eigenvectors of L x = lambda M x on the active cells."""
    if len(act) <= k + 2:
        return []
    L = cg.laplacian()[act][:, act].tocsr()
    mass = cg.cell_mass(1)[act]
    M = sp.diags(mass)
    try:
        if len(act) <= 70000:
            shift = -1e-3 * float(L.diagonal().mean()) / float(mass.mean())
            v0 = np.ones(len(act)) + np.linspace(0, 1, len(act))
            _, vecs = spla.eigsh(L.tocsc(), k=k + 1, M=M.tocsc(), sigma=shift, which="LM", v0=v0)
            vecs = vecs[:, 1:]
        else:
            rng = np.random.default_rng(0)
            X = rng.standard_normal((len(act), k))
            precond = sp.diags(1.0 / L.diagonal())
            with warnings.catch_warnings():
                # level-set orderings only need rough eigenvectors
                warnings.simplefilter("ignore", UserWarning)
                _, vecs = spla.lobpcg(L, X, B=M, M=precond, Y=np.ones((len(act), 1)), largest=False, tol=1e-3, maxiter=100)
    except (RuntimeError, spla.ArpackError, np.linalg.LinAlgError):
        return []
    out = []
    for j in range(vecs.shape[1]):
        score = np.round(vecs[:, j], 12)
        if score.sum() < 0:
            score = -score
        out.append(act[np.lexsort((act, score))])
    return out


def grid_oracle(dd, objective, v=1, b=1, cells=None):
    """Best box-union set among level sets of coordinate, corner-distance and Fiedler orderings.

    Returns (value, BoxUnion).  ``objective`` is ``'che'`` or ``'mbis'``.
    """
    cg = _cached_grid(dd, (cells or default_grid_cells(dd.dim),) * dd.dim)
    best_val, best_mask = math.inf, None
    tot1, tot_v = cg.volume(cg.active, 1), cg.volume(cg.active, v)
    for order in _grid_orderings(cg):
        tv, vol1, vol2 = cg.prefix_values(order)
        volv = vol1 if v == 1 else vol2
        inner = slice(1, len(order))
        if objective == "che":
            vals = _ratio(tv[inner], volv[inner], tot_v, b)
            k = int(np.argmin(vals)) + 1
        else:
            gap = np.abs(vol1[inner] - 0.5 * tot1)
            k = int(np.argmin(gap)) + 1
            if gap[k - 1] > MBIS_CONSTRAINT_TOL:
                continue
        mask = np.zeros(len(cg.active), bool)
        mask[order[:k]] = True
        exact_tv = cg.tv(mask)
        if objective == "che":
            va = cg.volume(mask, v)
            val = float(_ratio(np.array(exact_tv), np.array(va), tot_v, b))
        else:
            val = exact_tv
        if val < best_val or (val == best_val and _lex_smaller(mask, best_mask)):
            best_val, best_mask = val, mask
    if best_mask is None:
        return math.inf, None
    return best_val, cg.boxunion(best_mask)


def _lex_smaller(a, b):
    if b is None:
        return True
    diff = np.nonzero(a != b)[0]
    return len(diff) > 0 and not a[diff[0]]


# ---------------------------------------------------------------- parametric families


def _families(dd):
    """One-parameter families of cut sets as (builder, lo, hi, vectorised measure or None).

    The measure function maps an array of parameters to (|A|, H^{d-1}(boundary of A in D))
    and exists for uniform densities only.
    """
    lo, hi = dd.bbox
    shape, d = dd.shape, dd.dim
    fams = []
    if isinstance(shape, Box):
        side = hi - lo
        for k in range(d):
            face = float(np.prod(np.delete(side, k)))
            fams.append((lambda t, k=k: Halfspace(k, t), lo[k], hi[k],
                         lambda t, k=k, face=face: ((t - lo[k]) * face, np.full_like(t, face))))
        if d == 2:
            rmax = float(np.linalg.norm(side))
            for c in corners(d):
                fams.append((lambda t, c=c: CornerBall(c, t), 0.0, rmax,
                             lambda t: _quarter_disc_measures(side[0], side[1], t)))
        elif d == 3:
            rmax = float(np.min(side))
            for c in corners(d):
                fams.append((lambda t, c=c: CornerBall(c, t), 0.0, rmax,
                             lambda t: (np.pi * t**3 / 6, np.pi * t**2 / 2)))
    elif isinstance(shape, Ball):
        if not dd.uniform:
            raise UnsupportedDomainError("continuum functionals on a ball need uniform density")
        R = shape.radius
        for k in range(d):
            for s in (1.0, -1.0):
                e = np.zeros(d)
                e[k] = s
                fams.append((lambda t, e=tuple(e): SphericalCap(e, t), -R, R,
                             lambda t: (_cap_volume(d, R, t), ball_volume(d - 1) * np.maximum(R * R - t * t, 0.0) ** ((d - 1) / 2))))
    else:
        raise UnsupportedDomainError("continuum functionals need a box or ball domain")
    return fams


def _quarter_disc_measures(w, h, R):
    """Area and arc length of the quarter disc of radius R (array) clipped to [0,w]x[0,h]."""
    R = np.asarray(R, float)
    xm = np.minimum(w, R)
    a = np.clip(np.sqrt(np.maximum(R * R - h * h, 0.0)), 0.0, xm)

    def prim(x):
        return 0.5 * (x * np.sqrt(np.maximum(R * R - x * x, 0.0)) + R * R * np.arcsin(np.clip(x / R, -1, 1)))

    area = h * a + prim(xm) - prim(a)
    t1 = np.arccos(np.minimum(1.0, w / R))
    t2 = np.maximum(t1, np.arcsin(np.minimum(1.0, h / R)))
    return area, R * (t2 - t1)


def _cap_volume(d, R, t):
    t = np.asarray(t, float) / R
    half = 0.5 * special.betainc((d + 1) / 2, 0.5, np.clip(1 - t * t, 0, 1))
    return np.where(t >= 0, half, 1.0 - half) * ball_volume(d) * R**d


def _che_value(dd, A, v, b, tot):
    tv = continuum_tv(dd, A)
    va = region_volume(dd, A, v)
    return float(_ratio(np.array(tv), np.array(va), tot, b))


def _golden(f, a, b, tol=1e-12, iters=200):
    res = optimize.minimize_scalar(f, bounds=(a, b), method="bounded", options={"xatol": tol, "maxiter": iters})
    return float(res.x), float(res.fun)


def family_cheeger(dd, v, b):
    """Minimise TV/Bal over the parametric families; returns (value, argmin, all minimizers)."""
    tot = total_volume(dd, v)
    step = SCAN_STEP if dd.uniform else SCAN_STEP_TABULATED
    results = []
    for build, a, c, measure in _families(dd):
        m = int(round(1.0 / step))
        ts = a + (c - a) * np.arange(1, m) / m
        if dd.uniform:
            vol, area = measure(ts)
            rho = dd.rho_bounds[0]
            vals = _ratio(area * rho * rho, vol * rho**v, tot, b)
        else:
            vals = np.array([_che_value(dd, build(t), v, b, tot) for t in ts])
        j = int(np.argmin(vals))
        t_best = float(ts[j])
        f_best = _che_value(dd, build(t_best), v, b, tot)
        width = (c - a) / m
        t_g, f_g = _golden(lambda t: _che_value(dd, build(t), v, b, tot), max(a, t_best - width), min(c, t_best + width))
        if f_g < f_best:
            t_best, f_best = t_g, f_g
        results.append((f_best, build(t_best)))
    return _pick(results)


def family_mbis(dd):
    results = []
    for build, a, c, _ in _families(dd):
        def gap(t):
            return region_volume(dd, build(t), 1) - 0.5
        ga, gc = gap(a + 1e-15 * (c - a)), gap(c - 1e-15 * (c - a))
        if ga * gc > 0:
            continue
        t = optimize.brentq(gap, a, c, xtol=MBIS_XTOL, rtol=4 * np.finfo(float).eps, maxiter=500)
        A = build(t)
        if abs(gap(t)) > MBIS_CONSTRAINT_TOL:
            continue
        results.append((continuum_tv(dd, A), A))
    return _pick(results)


def _pick(results):
    if not results:
        return math.inf, None, []
    best = min(r[0] for r in results)
    ties = [A for val, A in results if val <= best * (1 + TIE_RTOL)]
    return best, ties[0], ties


# ---------------------------------------------------------------- public operations


def continuum_cheeger(dd, v=1, b=1, grid_cells=None):
    """CHE_{v,b}(D, rho), as the smaller of the family scan and the grid cross-check."""
    if v not in (1, 2) or b not in (1, 2):
        raise ValueError("v and b must be 1 or 2")
    f_val, f_arg, ties = family_cheeger(dd, v, b)
    g_val, g_arg = grid_oracle(dd, "che", v, b, grid_cells) if grid_cells != 0 else (math.inf, None)
    if g_val < f_val * (1 - TIE_RTOL):
        value, argmin, ties = g_val, g_arg, [g_arg]
    else:
        value, argmin = f_val, f_arg
    return ContinuumResult(value, argmin, f"che:{v},{b}", f_val, f_arg, g_val, g_arg, ties)


def continuum_mbis(dd, grid_cells=None):
    """MBIS_nu(D): least TV(1_A) over sets with nu(A) = 1/2."""
    f_val, f_arg, ties = family_mbis(dd)
    g_val, g_arg = grid_oracle(dd, "mbis", cells=grid_cells) if grid_cells != 0 else (math.inf, None)
    if g_val < f_val * (1 - TIE_RTOL):
        value, argmin, ties = g_val, g_arg, [g_arg]
    else:
        value, argmin = f_val, f_arg
    return ContinuumResult(value, argmin, "mbis", f_val, f_arg, g_val, g_arg, ties)


def complement(A):
    return A.complement() if hasattr(A, "complement") else Complement(A)
