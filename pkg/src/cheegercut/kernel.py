"""Radial weight profiles and their integral constants."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

PROFILES = ("uniform", "gaussian", "tabulated")
QUAD_TAIL_EPS = 1e-14
QUAD_ATOL = 1e-10


class NonIntegrableKernelError(ValueError):
    pass


def sphere_area(d):
    """Surface measure of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


def ball_volume(d):
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def abs_first_coord_moment(d):
    """Integral of |theta_1| over the unit sphere in R^d."""
    return 2.0 * math.pi ** ((d - 1) / 2) / math.gamma((d + 1) / 2)


@dataclass(frozen=True)
class Kernel:
    """A nonincreasing radial weight profile phi on [0, inf) in dimension ``dim``.

    Tabulated profiles interpolate linearly between nodes and vanish beyond
    the last node.
    """

    profile: str
    dim: int = 2
    t: np.ndarray | None = field(default=None, repr=False, compare=False)
    phi: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"unknown kernel profile {self.profile!r}")
        if self.dim < 2:
            raise ValueError("dimension must be at least 2")
        if self.profile == "tabulated":
            t = np.asarray(self.t, dtype=float)
            phi = np.asarray(self.phi, dtype=float)
            if t.ndim != 1 or t.shape != phi.shape or t.size < 2:
                raise ValueError("tabulated kernel needs matching 1-D t and phi arrays")
            if t[0] != 0.0:
                raise ValueError("tabulated kernel must start at t = 0")
            if np.any(np.diff(t) <= 0):
                raise ValueError("tabulated t must be strictly increasing")
            if phi[0] <= 0:
                raise ValueError("phi(0) must be positive")
            if np.any(phi < 0) or np.any(np.diff(phi) > 0):
                raise ValueError("tabulated phi must be nonnegative and nonincreasing")
            object.__setattr__(self, "t", t)
            object.__setattr__(self, "phi", phi)

    @classmethod
    def uniform(cls, dim=2):
        return cls("uniform", dim)

    @classmethod
    def gaussian(cls, dim=2):
        return cls("gaussian", dim)

    @classmethod
    def tabulated(cls, t, phi, dim=2):
        return cls("tabulated", dim, np.asarray(t, float), np.asarray(phi, float))

    @classmethod
    def from_csv(cls, path, dim=2):
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["t", "phi"]:
                raise ValueError("kernel file must have header 't,phi'")
            rows = [(float(row["t"]), float(row["phi"])) for row in reader]
        t, phi = zip(*rows)
        return cls.tabulated(t, phi, dim)

    @classmethod
    def from_spec(cls, spec, dim=2):
        """Parse ``uniform``, ``gaussian`` or ``file:PATH``."""
        if spec.startswith("file:"):
            return cls.from_csv(spec[5:], dim)
        return cls(spec, dim)

    def with_dim(self, dim):
        return Kernel(self.profile, dim, self.t, self.phi)

    def __call__(self, t):
        return evaluate(self, t)

    @property
    def phi0(self):
        return float(evaluate(self, 0.0))

    def _breakpoints(self):
        if self.profile == "uniform":
            return [1.0]
        if self.profile == "tabulated":
            return list(self.t[1:])
        return []


def evaluate(kernel, t):
    """phi(t) for scalar or array ``t >= 0``."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("kernel argument must be nonnegative")
    if kernel.profile == "uniform":
        out = (arr <= 1.0).astype(float)
    elif kernel.profile == "gaussian":
        out = np.exp(-arr * arr)
    else:
        out = np.interp(arr, kernel.t, kernel.phi, right=0.0)
        out = np.where(arr > kernel.t[-1], 0.0, out)
    return float(out) if np.ndim(out) == 0 else out


def effective_support(kernel, tail_eps=1e-12):
    """Smallest R such that phi(t) <= tail_eps for every t >= R."""
    if not 0 < tail_eps < kernel.phi0:
        raise ValueError("tail_eps must lie in (0, phi(0))")
    if kernel.profile == "uniform":
        return 1.0
    if kernel.profile == "gaussian":
        return math.sqrt(math.log(1.0 / tail_eps))
    t, phi = kernel.t, kernel.phi
    above = np.nonzero(phi > tail_eps)[0]
    k = int(above[-1])
    if k == len(t) - 1:
        return float(t[-1])
    # phi crosses tail_eps on [t_k, t_{k+1}]
    frac = (phi[k] - tail_eps) / (phi[k] - phi[k + 1])
    return float(t[k] + frac * (t[k + 1] - t[k]))


def _heavy_tail(kernel, power):
    """A table that is still positive at its last node after spanning two or more decades,
    and whose last decade decays no faster than t^-(power+1), is a truncated heavy tail."""
    if kernel.profile != "tabulated" or kernel.phi[-1] <= 0 or len(kernel.t) < 3:
        return False
    t, phi = kernel.t, kernel.phi
    if t[-1] < 100 * t[1]:
        return False
    k = int(np.searchsorted(t, t[-1] / 10))
    k = min(max(k, 1), len(t) - 2)
    slope = math.log(phi[-1] / phi[k]) / math.log(t[-1] / t[k])
    return -slope <= power + 1


def _radial_integral(kernel, power, r_max=None):
    """int_0^r_max phi(rho) rho^power d rho by adaptive Gauss-Kronrod."""
    if _heavy_tail(kernel, power):
        raise NonIntegrableKernelError(f"tail decays too slowly for a finite radial moment of order {power}")
    if r_max is None:
        r_max = effective_support(kernel, min(QUAD_TAIL_EPS, 0.5 * kernel.phi0))
    pts = sorted({0.0, *[b for b in kernel._breakpoints() if b < r_max], r_max})
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        val, _ = integrate.quad(
            lambda s: evaluate(kernel, s) * s**power, a, b, epsabs=QUAD_ATOL / len(pts), epsrel=1e-12, limit=200
        )
        total += val
    if not math.isfinite(total) or total <= 0:
        raise NonIntegrableKernelError(f"radial moment of order {power} is not finite and positive")
    return total


def surface_tension(kernel, method="auto", r_max=None):
    """sigma_phi = int phi(|x|) |x_1| dx over R^d.

    ``method='closed'`` uses the known closed forms (uniform, gaussian);
    ``'quadrature'`` reduces to a radial integral; ``'auto'`` prefers closed forms.
    """
    d = kernel.dim
    if method == "closed" or (method == "auto" and kernel.profile != "tabulated" and r_max is None):
        if kernel.profile == "uniform":
            return 2.0 * math.pi ** ((d - 1) / 2) / ((d + 1) * math.gamma((d + 1) / 2))
        if kernel.profile == "gaussian":
            return math.pi ** ((d - 1) / 2)
        raise ValueError("no closed form for tabulated kernels")
    return abs_first_coord_moment(d) * _radial_integral(kernel, d, r_max)


def total_mass(kernel, method="auto"):
    """I_phi = int phi(|x|) dx over R^d."""
    d = kernel.dim
    if method == "closed" or (method == "auto" and kernel.profile != "tabulated"):
        if kernel.profile == "uniform":
            return ball_volume(d)
        if kernel.profile == "gaussian":
            return math.pi ** (d / 2)
        raise ValueError("no closed form for tabulated kernels")
    return sphere_area(d) * _radial_integral(kernel, d - 1)


def radial_sampler(kernel, rng, size, r_max):
    """Draw ``size`` vectors from the density proportional to phi(|s|), |s| <= r_max."""
    d = kernel.dim
    if kernel.profile == "gaussian":
        out = np.empty((0, d))
        while len(out) < size:
            s = rng.normal(scale=math.sqrt(0.5), size=(size - len(out), d))
            out = np.vstack([out, s[np.einsum("ij,ij->i", s, s) <= r_max * r_max]])
        return out
    direction = rng.normal(size=(size, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    u = rng.random(size)
    if kernel.profile == "uniform":
        radius = min(1.0, r_max) * u ** (1.0 / d)
    else:
        grid = np.unique(np.concatenate([np.linspace(0, r_max, 4097), kernel.t[kernel.t < r_max]]))
        dens = evaluate(kernel, grid) * grid ** (d - 1)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
        radius = np.interp(u * cdf[-1], cdf, grid)
    return direction * radius[:, None]

