"""Domains with densities, i.i.d. sampling, and the geometry of cut sets."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import integrate, special
from scipy.interpolate import RegularGridInterpolator

from cheegercut.kernel import ball_volume

_GL2 = np.polynomial.legendre.leggauss(2)


class UnsupportedDomainError(ValueError):
    pass


# ---------------------------------------------------------------- shapes


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if len(self.lo) != len(self.hi) or any(a >= b for a, b in zip(self.lo, self.hi)):
            raise ValueError("box needs lo < hi in every coordinate")

    @property
    def dim(self):
        return len(self.lo)

    @property
    def bbox(self):
        return np.array(self.lo), np.array(self.hi)

    @property
    def volume(self):
        return float(np.prod(np.subtract(self.hi, self.lo)))

    @property
    def diameter(self):
        return float(np.linalg.norm(np.subtract(self.hi, self.lo)))

    @property
    def inradius(self):
        return 0.5 * float(np.min(np.subtract(self.hi, self.lo)))

    def contains(self, x):
        x = np.atleast_2d(x)
        return np.all((x > self.lo) & (x < self.hi), axis=1)


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")

    @property
    def dim(self):
        return len(self.center)

    @property
    def bbox(self):
        c = np.array(self.center)
        return c - self.radius, c + self.radius

    @property
    def volume(self):
        return ball_volume(self.dim) * self.radius**self.dim

    @property
    def diameter(self):
        return 2.0 * self.radius

    @property
    def inradius(self):
        return self.radius

    def contains(self, x):
        x = np.atleast_2d(x)
        return np.sum((x - self.center) ** 2, axis=1) < self.radius**2


@dataclass(frozen=True)
class PredicateShape:
    """An arbitrary bounded open set given by a membership test; sampling only."""

    predicate: Callable
    lo: tuple
    hi: tuple

    @property
    def dim(self):
        return len(self.lo)

    @property
    def bbox(self):
        return np.array(self.lo, float), np.array(self.hi, float)

    @property
    def diameter(self):
        return float(np.linalg.norm(np.subtract(self.hi, self.lo)))

    def contains(self, x):
        return np.asarray(self.predicate(np.atleast_2d(x)), bool)


# ---------------------------------------------------------------- densities


@dataclass(frozen=True)
class UniformDensity:
    pass


@dataclass(frozen=True, eq=False)
class TabulatedDensity:
    """Positive values on a rectilinear node grid, interpolated multilinearly.

    Values outside the node hull take the value at the nearest hull point.
    """

    nodes: tuple
    values: np.ndarray = field(repr=False)
    scale: float = 1.0

    def __post_init__(self):
        nodes = tuple(np.asarray(a, float) for a in self.nodes)
        values = np.asarray(self.values, float)
        if values.shape != tuple(len(a) for a in nodes):
            raise ValueError("density values do not match node grid")
        if any(np.any(np.diff(a) <= 0) for a in nodes):
            raise ValueError("density nodes must be strictly increasing")
        if np.any(values <= 0):
            raise ValueError("density must be positive")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_interp", RegularGridInterpolator(nodes, values, method="linear"))

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            if header[-1] != "rho" or len(header) < 3:
                raise ValueError("density file must have header x1,...,xd,rho")
            rows = np.array([[float(v) for v in row] for row in reader if row])
        d = rows.shape[1] - 1
        nodes = tuple(np.unique(rows[:, k]) for k in range(d))
        values = np.full(tuple(len(a) for a in nodes), np.nan)
        idx = tuple(np.searchsorted(nodes[k], rows[:, k]) for k in range(d))
        values[idx] = rows[:, -1]
        if np.isnan(values).any():
            raise ValueError("density file must list every point of a full rectilinear grid")
        return cls(nodes, values)

    def __call__(self, x):
        x = np.atleast_2d(x)
        clipped = np.column_stack([np.clip(x[:, k], a[0], a[-1]) for k, a in enumerate(self.nodes)])
        return self.scale * self._interp(clipped)

    def box_integral(self, lo, hi, power=1):
        """Exact integral of rho^power over an axis box, power in {1, 2}.

        The box is split along node lines so that rho is multilinear on each
        piece; two-point Gauss-Legendre per axis is then exact.
        """
        axes_pts, axes_w = [], []
        for k, grid in enumerate(self.nodes):
            a, b = float(lo[k]), float(hi[k])
            if b <= a:
                return 0.0
            cuts = np.concatenate([[a], grid[(grid > a) & (grid < b)], [b]])
            mid, half = 0.5 * (cuts[1:] + cuts[:-1]), 0.5 * np.diff(cuts)
            axes_pts.append((mid[:, None] + half[:, None] * _GL2[0][None, :]).ravel())
            axes_w.append((half[:, None] * _GL2[1][None, :]).ravel())
        mesh = np.meshgrid(*axes_pts, indexing="ij")
        wts = np.ones_like(mesh[0])
        for k, w in enumerate(axes_w):
            shape = [1] * len(axes_w)
            shape[k] = -1
            wts = wts * w.reshape(shape)
        vals = self(np.column_stack([m.ravel() for m in mesh])) ** power
        return math.fsum(wts.ravel() * vals)


# ---------------------------------------------------------------- domain + density


def rect_disc_area(x0, x1, y0, y1, cx, cy, radius):
    """Exact area of [x0,x1]x[y0,y1] intersected with the disc of given center and radius."""
    x0, x1, y0, y1 = x0 - cx, x1 - cx, y0 - cy, y1 - cy
    R = radius
    a, b = max(x0, -R), min(x1, R)
    if b <= a or y1 <= y0:
        return 0.0
    pts = {a, b}
    for y in (y0, y1):
        if abs(y) < R:
            s = math.sqrt(R * R - y * y)
            pts.update(p for p in (-s, s) if a < p < b)
    pts = sorted(pts)

    def prim(x):
        x = min(max(x, -R), R)
        return 0.5 * (x * math.sqrt(max(R * R - x * x, 0.0)) + R * R * math.asin(x / R))

    total = 0.0
    for p, q in zip(pts[:-1], pts[1:]):
        m = 0.5 * (p + q)
        g = math.sqrt(max(R * R - m * m, 0.0))
        if min(y1, g) <= max(y0, -g):
            continue
        arc = prim(q) - prim(p)
        upper = y1 * (q - p) if y1 < g else arc
        lower = y0 * (q - p) if y0 > -g else -arc
        total += upper - lower
    return total


def segment_disc_length(x0, x1, radius_sq_left):
    """Length of [x0, x1] inside (-s, s) with s^2 = radius_sq_left."""
    if radius_sq_left <= 0:
        return 0.0
    s = math.sqrt(radius_sq_left)
    return max(0.0, min(x1, s) - max(x0, -s))


@dataclass(frozen=True, eq=False)
class DomainDensity:
    """A bounded open domain together with a probability density on it."""

    shape: object
    density: object = field(default_factory=UniformDensity)

    def __post_init__(self):
        if isinstance(self.density, TabulatedDensity):
            if self.density.values.ndim != self.dim:
                raise ValueError("density dimension does not match domain")
            raw = self._raw_total(self.density)
            object.__setattr__(self, "density", TabulatedDensity(self.density.nodes, self.density.values, 1.0 / raw))

    # construction helpers
    @classmethod
    def unit_cube(cls, dim=2, density=None):
        return cls(Box((0.0,) * dim, (1.0,) * dim), density or UniformDensity())

    @classmethod
    def unit_ball(cls, dim=2, density=None):
        return cls(Ball((0.0,) * dim, 1.0), density or UniformDensity())

    @classmethod
    def from_names(cls, domain, dim=2, density="uniform"):
        """Build from CLI-style names: ``square|cube|ball`` and ``uniform|file:PATH``."""
        dens = UniformDensity() if density == "uniform" else TabulatedDensity.from_csv(density.removeprefix("file:"))
        if domain == "square":
            if dim != 2:
                raise ValueError("'square' is two-dimensional; use 'cube' for other dimensions")
            return cls.unit_cube(2, dens)
        if domain == "cube":
            return cls.unit_cube(dim, dens)
        if domain == "ball":
            return cls.unit_ball(dim, dens)
        raise ValueError(f"unknown domain {domain!r}")

    @property
    def dim(self):
        return self.shape.dim

    @property
    def uniform(self):
        return isinstance(self.density, UniformDensity)

    @property
    def bbox(self):
        return self.shape.bbox

    @property
    def diameter(self):
        return self.shape.diameter

    @property
    def inradius(self):
        return self.shape.inradius

    def contains(self, x):
        return self.shape.contains(x)

    def rho(self, x):
        x = np.atleast_2d(x)
        if self.uniform:
            return np.full(len(x), 1.0 / self.shape.volume)
        return self.density(x)

    @cached_property
    def rho_bounds(self):
        if self.uniform:
            v = 1.0 / self.shape.volume
            return v, v
        vals = self.density.values * self.density.scale
        return float(vals.min()), float(vals.max())

    def describe(self):
        kind = type(self.shape).__name__.lower()
        return {"shape": kind, "dim": self.dim, "density": "uniform" if self.uniform else "tabulated"}

    # integration
    def _raw_total(self, dens):
        if isinstance(self.shape, Box):
            return dens.box_integral(self.shape.lo, self.shape.hi, 1)
        return _midpoint_grid_integral(self, lambda x: dens(x), 1)

    def mass_in_box(self, lo, hi, power=1):
        """int over (box ∩ D) of rho^power, for an axis box [lo, hi]."""
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        shape = self.shape
        if isinstance(shape, Box):
            clo, chi = np.maximum(lo, shape.lo), np.minimum(hi, shape.hi)
            if np.any(chi <= clo):
                return 0.0
            if self.uniform:
                return float(np.prod(chi - clo)) * self.rho_bounds[0] ** power
            return self.density.box_integral(clo, chi, power)
        if isinstance(shape, Ball):
            c = np.asarray(shape.center)
            near = np.clip(c, lo, hi)
            if np.sum((near - c) ** 2) >= shape.radius**2:
                return 0.0
            far = np.maximum(np.abs(lo - c), np.abs(hi - c))
            if self.uniform:
                rho_v = self.rho_bounds[0] ** power
                if np.sum(far**2) <= shape.radius**2:
                    return float(np.prod(hi - lo)) * rho_v
                return _box_ball_volume(lo, hi, c, shape.radius) * rho_v
            return _subsample_mass(self, lo, hi, power, 8)
        raise UnsupportedDomainError("integration needs a box or ball domain")


def _box_ball_volume(lo, hi, c, R):
    d = len(lo)
    if d == 2:
        return rect_disc_area(lo[0], hi[0], lo[1], hi[1], c[0], c[1], R)
    if d == 3:
        def section(z):
            return rect_disc_area(lo[0], hi[0], lo[1], hi[1], c[0], c[1], math.sqrt(max(R * R - (z - c[2]) ** 2, 0.0)))
        a, b = max(lo[2], c[2] - R), min(hi[2], c[2] + R)
        if b <= a:
            return 0.0
        val, _ = integrate.quad(section, a, b, epsabs=1e-13, epsrel=1e-10, limit=100)
        return val
    return _subsample_volume_ball(lo, hi, c, R, 16)


def _subsample_volume_ball(lo, hi, c, R, m):
    axes = [lo[k] + (np.arange(m) + 0.5) * (hi[k] - lo[k]) / m for k in range(len(lo))]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(lo))
    inside = np.sum((mesh - c) ** 2, axis=1) < R * R
    return float(np.prod(hi - lo)) * inside.mean()


def _subsample_mass(dd, lo, hi, power, m):
    """Midpoint rule on an m^d subgrid of the box, restricted to D."""
    axes = [lo[k] + (np.arange(m) + 0.5) * (hi[k] - lo[k]) / m for k in range(len(lo))]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(lo))
    vals = np.where(dd.contains(mesh), dd.rho(mesh) ** power, 0.0)
    return float(np.prod(hi - lo)) * float(vals.mean())


def _midpoint_grid_integral(dd, fn, power, cells=None):
    d = dd.dim
    cells = cells or (1024 if d == 2 else 128 if d == 3 else 24)
    lo, hi = dd.bbox
    h = (hi - lo) / cells
    total = 0.0
    axes = [lo[k] + (np.arange(cells) + 0.5) * h[k] for k in range(d)]
    # slab-wise over the first axis to bound memory
    for x0 in axes[0]:
        rest = np.stack(np.meshgrid(*axes[1:], indexing="ij"), -1).reshape(-1, d - 1)
        pts = np.column_stack([np.full(len(rest), x0), rest])
        inside = dd.contains(pts)
        if inside.any():
            total += float(np.sum(fn(pts[inside]) ** power))
    return total * float(np.prod(h))


# ---------------------------------------------------------------- sampling


def sample_points(dd, n, seed):
    """n i.i.d. points from the density of ``dd`` by rejection from its bounding box."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    lo, hi = dd.bbox
    d = len(lo)
    rho_max = None if dd.uniform else dd.rho_bounds[1]
    out, have = [], 0
    batch = max(64, int(1.3 * n))
    while have < n:
        x = lo + (hi - lo) * rng.random((batch, d))
        keep = dd.contains(x)
        if rho_max is not None:
            keep &= rng.random(batch) * rho_max < np.where(keep, dd.rho(x), 0.0)
        x = x[keep]
        out.append(x)
        have += len(x)
    return np.concatenate(out)[:n]


# ---------------------------------------------------------------- cut sets


@dataclass(frozen=True)
class Halfspace:
    """{x : x[axis] < offset} (or > offset when ``below`` is False), intersected with D."""

    axis: int
    offset: float
    below: bool = True

    def contains(self, x):
        x = np.atleast_2d(x)
        return x[:, self.axis] < self.offset if self.below else x[:, self.axis] > self.offset

    def complement(self):
        return Halfspace(self.axis, self.offset, not self.below)

    def describe(self):
        return {"family": "halfspace", "axis": self.axis, "offset": self.offset, "side": "below" if self.below else "above"}


@dataclass(frozen=True)
class CornerBall:
    """Points of D within ``radius`` of a corner of a box domain; ``corner`` is a 0/1 tuple."""

    corner: tuple
    radius: float

    def center(self, dd):
        lo, hi = dd.bbox
        return np.where(np.asarray(self.corner, bool), hi, lo)

    def contains(self, x, dd=None):
        raise TypeError("CornerBall membership needs the domain; use cutset_contains")

    def complement(self):
        return Complement(self)

    def describe(self):
        return {"family": "corner-disc", "corner": list(self.corner), "radius": self.radius}


@dataclass(frozen=True)
class SphericalCap:
    """{x in ball : (x - center) . direction > offset}."""

    direction: tuple
    offset: float

    def complement(self):
        return SphericalCap(tuple(-np.asarray(self.direction)), -self.offset)

    def describe(self):
        return {"family": "spherical-cap", "direction": list(self.direction), "offset": self.offset}


@dataclass(frozen=True, eq=False)
class BoxUnion:
    """Union of cells of a regular grid (origin ``lo``, cell side ``h``, ``shape`` cells), intersected with D."""

    lo: tuple
    h: tuple
    shape: tuple
    cells: np.ndarray = field(repr=False)

    def __post_init__(self):
        mask = np.zeros(int(np.prod(self.shape)), bool)
        cells = np.asarray(self.cells)
        if cells.dtype == bool:
            mask = cells.reshape(-1).copy()
        else:
            mask[cells.astype(np.int64)] = True
        object.__setattr__(self, "cells", mask)

    def cell_of(self, x):
        x = np.atleast_2d(x)
        idx = np.floor((x - np.asarray(self.lo)) / np.asarray(self.h)).astype(np.int64)
        idx = np.clip(idx, 0, np.asarray(self.shape) - 1)
        return np.ravel_multi_index(idx.T, self.shape)

    def contains(self, x):
        return self.cells[self.cell_of(x)]

    def complement(self):
        return BoxUnion(self.lo, self.h, self.shape, ~self.cells)

    def describe(self):
        return {"family": "box-union", "grid": list(self.shape), "cells": int(self.cells.sum())}


@dataclass(frozen=True)
class Complement:
    base: object

    def complement(self):
        return self.base

    def describe(self):
        return {"family": "complement", "of": self.base.describe()}


def cutset_contains(dd, A, x):
    """Membership of points ``x`` (assumed in D) in the cut set A."""
    x = np.atleast_2d(x)
    if isinstance(A, (Halfspace, BoxUnion)):
        return A.contains(x)
    if isinstance(A, CornerBall):
        return np.sum((x - A.center(dd)) ** 2, axis=1) < A.radius**2
    if isinstance(A, SphericalCap):
        c = np.asarray(dd.shape.center)
        return (x - c) @ np.asarray(A.direction, float) > A.offset
    if isinstance(A, Complement):
        return ~cutset_contains(dd, A.base, x)
    if A in ("all", "none"):
        return np.full(len(x), A == "all")
    raise TypeError(f"unknown cut set {A!r}")


def total_volume(dd, v=1):
    """Vol_{nu,v}(D)."""
    if v == 1:
        return 1.0
    if dd.uniform:
        return 1.0 / dd.shape.volume
    return dd.mass_in_box(*dd.bbox, power=2)


def _cap_fraction(d, t):
    """Fraction of the unit d-ball with x_1 > t."""
    if t <= -1:
        return 1.0
    if t >= 1:
        return 0.0
    half = 0.5 * special.betainc((d + 1) / 2, 0.5, 1 - t * t)
    return half if t >= 0 else 1.0 - half


def _corner_disc_area_2d(w, h, R):
    """Area of the quarter disc of radius R at the origin, clipped to [0,w]x[0,h]."""
    return rect_disc_area(0.0, w, 0.0, h, 0.0, 0.0, R)


def _corner_arc_range(w, h, R):
    """Angles (theta1, theta2) of the quarter circle of radius R lying strictly inside (0,w)x(0,h)."""
    t1 = math.acos(min(1.0, w / R))
    t2 = math.asin(min(1.0, h / R))
    return t1, max(t1, t2)


def _require_exact(dd, A):
    if isinstance(A, CornerBall) and not isinstance(dd.shape, Box):
        raise UnsupportedDomainError("corner discs need a box domain")
    if isinstance(A, SphericalCap) and not isinstance(dd.shape, Ball):
        raise UnsupportedDomainError("spherical caps need a ball domain")
    if isinstance(A, CornerBall) and dd.dim > 3:
        raise UnsupportedDomainError("corner discs are supported for d <= 3")
    if isinstance(A, CornerBall) and dd.dim == 3:
        lo, hi = dd.bbox
        if A.radius > float(np.min(hi - lo)):
            raise UnsupportedDomainError("3-D corner balls must fit inside the box")


def region_volume(dd, A, v=1):
    """Vol_{nu,v}(A) = int_A rho^v dx."""
    if v not in (1, 2):
        raise ValueError("v must be 1 or 2")
    if isinstance(A, Complement):
        return total_volume(dd, v) - region_volume(dd, A.base, v)
    if isinstance(A, str):
        return total_volume(dd, v) if A == "all" else 0.0
    _require_exact(dd, A)
    shape, d = dd.shape, dd.dim
    if isinstance(A, BoxUnion):
        from cheegercut.continuum import CellGrid

        cg = CellGrid.for_boxunion(dd, A)
        return math.fsum(cg.cell_mass(v)[A.cells])
    if isinstance(shape, Box):
        lo, hi = dd.bbox
        if isinstance(A, Halfspace):
            alo, ahi = lo.copy(), hi.copy()
            if A.below:
                ahi[A.axis] = min(hi[A.axis], A.offset)
            else:
                alo[A.axis] = max(lo[A.axis], A.offset)
            return dd.mass_in_box(alo, ahi, v)
        if isinstance(A, CornerBall):
            side = hi - lo
            if dd.uniform:
                rho_v = dd.rho_bounds[0] ** v
                if d == 2:
                    return _corner_disc_area_2d(side[0], side[1], A.radius) * rho_v
                return ball_volume(3) * A.radius**3 / 8 * rho_v
            return _quadrature_volume(dd, A, v)
    if isinstance(shape, Ball):
        R = shape.radius
        if isinstance(A, Halfspace):
            direction = np.zeros(d)
            direction[A.axis] = -1.0 if A.below else 1.0
            off = (A.offset - shape.center[A.axis]) * (-1.0 if A.below else 1.0)
            A = SphericalCap(tuple(direction), off)
        if isinstance(A, SphericalCap):
            if not dd.uniform:
                return _quadrature_volume(dd, A, v)
            return _cap_fraction(d, A.offset / R) * shape.volume * dd.rho_bounds[0] ** v
    raise UnsupportedDomainError(f"cannot integrate {type(A).__name__} over {type(shape).__name__}")


def _quadrature_volume(dd, A, v):
    return _midpoint_grid_integral(
        dd, lambda x: np.where(cutset_contains(dd, A, x), dd.rho(x), 0.0), v
    )


def continuum_tv(dd, A):
    """TV(1_A) = int over (boundary of A) ∩ D of rho^2 dH^{d-1}."""
    if isinstance(A, Complement):
        return continuum_tv(dd, A.base)
    if isinstance(A, str):
        return 0.0
    _require_exact(dd, A)
    shape, d = dd.shape, dd.dim
    if isinstance(A, BoxUnion):
        from cheegercut.continuum import CellGrid

        return CellGrid.for_boxunion(dd, A).tv(A.cells)
    if isinstance(shape, Box):
        lo, hi = dd.bbox
        if isinstance(A, Halfspace):
            k, t = A.axis, A.offset
            if not lo[k] < t < hi[k]:
                return 0.0
            if dd.uniform:
                return float(np.prod(np.delete(hi - lo, k))) * dd.rho_bounds[0] ** 2
            return _face_integral(dd, k, t)
        if isinstance(A, CornerBall):
            side, R = hi - lo, A.radius
            corner = A.center(dd)
            sign = np.where(np.asarray(A.corner, bool), -1.0, 1.0)
            if d == 2:
                t1, t2 = _corner_arc_range(side[0], side[1], R)
                if dd.uniform:
                    return R * (t2 - t1) * dd.rho_bounds[0] ** 2
                th, wt = np.polynomial.legendre.leggauss(64)
                th = t1 + (t2 - t1) * (th + 1) / 2
                pts = corner + R * sign * np.column_stack([np.cos(th), np.sin(th)])
                return float(R * (t2 - t1) / 2 * np.sum(wt * dd.rho(pts) ** 2))
            if dd.uniform:
                return 4 * math.pi * R * R / 8 * dd.rho_bounds[0] ** 2
            u, wu = np.polynomial.legendre.leggauss(48)
            th = (u + 1) * math.pi / 4
            ph = (u + 1) * math.pi / 4
            T, P = np.meshgrid(th, ph, indexing="ij")
            W = np.outer(wu, wu) * (math.pi / 4) ** 2 * np.sin(T)
            dirs = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], -1).reshape(-1, 3)
            pts = corner + R * sign * dirs
            return float(R * R * np.sum(W.ravel() * dd.rho(pts) ** 2))
    if isinstance(shape, Ball):
        R = shape.radius
        if isinstance(A, Halfspace):
            t = A.offset - shape.center[A.axis]
        elif isinstance(A, SphericalCap):
            t = A.offset
        else:
            raise UnsupportedDomainError("unsupported cut set for a ball")
        if abs(t) >= R:
            return 0.0
        if not dd.uniform:
            raise UnsupportedDomainError("perimeter of caps needs uniform density")
        return ball_volume(d - 1) * (R * R - t * t) ** ((d - 1) / 2) * dd.rho_bounds[0] ** 2
    raise UnsupportedDomainError(f"cannot measure the boundary of {type(A).__name__}")


def _face_integral(dd, axis, t):
    """int of rho^2 over the cross-section {x_axis = t} of a box domain (exact for multilinear rho)."""
    lo, hi = dd.bbox
    dens = dd.density
    others = [k for k in range(dd.dim) if k != axis]
    axes_pts, axes_w = [], []
    for k in others:
        grid = dens.nodes[k]
        a, b = lo[k], hi[k]
        cuts = np.unique(np.concatenate([[a], grid[(grid > a) & (grid < b)], [b]]))
        mid, half = 0.5 * (cuts[1:] + cuts[:-1]), 0.5 * np.diff(cuts)
        axes_pts.append((mid[:, None] + half[:, None] * _GL2[0][None, :]).ravel())
        axes_w.append((half[:, None] * _GL2[1][None, :]).ravel())
    mesh = np.meshgrid(*axes_pts, indexing="ij")
    wts = np.ones_like(mesh[0])
    for j, w in enumerate(axes_w):
        shp = [1] * len(axes_w)
        shp[j] = -1
        wts = wts * w.reshape(shp)
    pts = np.empty((mesh[0].size, dd.dim))
    for j, k in enumerate(others):
        pts[:, k] = mesh[j].ravel()
    pts[:, axis] = t
    return math.fsum(wts.ravel() * dd.rho(pts) ** 2)


def balance_continuum(dd, A, v, b):
    """Bal_{nu,v,b}(A), with the symmetric min for b = 1."""
    tot = total_volume(dd, v)
    va = region_volume(dd, A, v)
    vc = tot - va
    if b == 1:
        return min(va, vc) / tot
    if b == 2:
        return va * vc / (tot * tot)
    raise ValueError("b must be 1 or 2")


def corners(dim):
    return list(itertools.product((0, 1), repeat=dim))
