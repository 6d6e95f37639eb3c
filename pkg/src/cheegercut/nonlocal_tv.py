"""Monte Carlo quadrature of the nonlocal total variation of indicator fields."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from cheegercut.domain import continuum_tv, cutset_contains, sample_points
from cheegercut.kernel import effective_support, radial_sampler, surface_tension, total_mass

DEFAULT_SAMPLES = 10**6
BLOCK_SIZE = 2**16


@dataclass(frozen=True)
class IndicatorField:
    """u = scale * 1_A for a cut set A (or the constants 'all' / 'none')."""

    cutset: object
    scale: float = 1.0

    def __post_init__(self):
        if self.scale < 0:
            raise ValueError("scale must be nonnegative")

    def __call__(self, dd, x):
        return self.scale * cutset_contains(dd, self.cutset, x).astype(float)

    def complement(self):
        A = self.cutset
        if A in ("all", "none"):
            flip = "none" if A == "all" else "all"
        else:
            flip = A.complement()
        return IndicatorField(flip, self.scale)

    def scaled(self, a):
        return IndicatorField(self.cutset, self.scale * a)


def worker_count(requested=None):
    """Requested worker count (default: CPU count), capped by CHEEGER_THREADS."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get("CHEEGER_THREADS")
    if cap:
        n = min(n, int(cap))
    return max(1, n)


def _block(dd, kernel, r, u, size, seed, block, s_max):
    rng = np.random.default_rng(np.random.SeedSequence([seed, block]))
    x = sample_points(dd, size, rng)
    s = radial_sampler(kernel, rng, size, s_max)
    y = x + r * s
    inside = dd.contains(y)
    vals = np.zeros(size)
    if inside.any():
        yi = y[inside]
        vals[inside] = np.abs(u(dd, x[inside]) - u(dd, yi)) * dd.rho(yi)
    return math.fsum(vals), math.fsum(vals * vals)


def nonlocal_tv(dd, kernel, r, u, samples=DEFAULT_SAMPLES, seed=0, threads=None, tail_eps=1e-12):
    """Estimate r^{-d-1} iint phi(|x-y|/r) |u(x)-u(y)| nu(dx) nu(dy).

    x ~ nu and y = x + r s with s drawn from phi(|s|) restricted to |s| <= r_cut.
    Returns (estimate, standard error).
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if samples < 2:
        raise ValueError("need at least two samples")
    if kernel.dim != dd.dim:
        kernel = kernel.with_dim(dd.dim)
    if u.cutset in ("all", "none") or u.scale == 0:
        return 0.0, 0.0
    s_max = effective_support(kernel, min(tail_eps, 0.5 * kernel.phi0))
    mass = total_mass(kernel)
    sizes = [BLOCK_SIZE] * (samples // BLOCK_SIZE)
    if samples % BLOCK_SIZE:
        sizes.append(samples % BLOCK_SIZE)
    jobs = [(dd, kernel, r, u, size, seed, b, s_max) for b, size in enumerate(sizes)]
    workers = worker_count(threads)
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda a: _block(*a), jobs))
    else:
        parts = [_block(*a) for a in jobs]
    s1 = math.fsum(p[0] for p in parts)
    s2 = math.fsum(p[1] for p in parts)
    mean = s1 / samples
    var = max(s2 / samples - mean * mean, 0.0) * samples / (samples - 1)
    factor = mass / r
    return factor * mean, factor * math.sqrt(var / samples)


def tv_target(dd, kernel, u):
    """sigma_phi * TV(u): the small-r limit of the nonlocal total variation."""
    if u.cutset in ("all", "none") or u.scale == 0:
        return 0.0
    if kernel.dim != dd.dim:
        kernel = kernel.with_dim(dd.dim)
    return surface_tension(kernel) * continuum_tv(dd, u.cutset) * u.scale


def recovery_curve(dd, kernel, u, r_list, samples=DEFAULT_SAMPLES, seed=0, threads=None):
    """Rows (r, estimate, stderr, target) for each r, which must be descending."""
    r_list = [float(r) for r in r_list]
    if any(b > a for a, b in zip(r_list, r_list[1:])):
        raise ValueError("r_list must be descending")
    target = tv_target(dd, kernel, u)
    rows = []
    for r in r_list:
        est, se = nonlocal_tv(dd, kernel, r, u, samples, seed, threads)
        rows.append({"r": r, "estimate": est, "stderr": se, "target": target})
    return rows
