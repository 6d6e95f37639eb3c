"""Convergence experiments: sample, build, optimise, compare with continuum targets, report."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from cheegercut.continuum import continuum_cheeger, continuum_mbis
from cheegercut.domain import Box, DomainDensity, Halfspace, cutset_contains, sample_points, total_volume
from cheegercut.geograph import build_graph, objective, rescaled_estimator, volume
from cheegercut.granulation import GridTooCoarseError, build_grid, choose_gamma
from cheegercut.kernel import Kernel, surface_tension, total_mass
from cheegercut.nonlocal_tv import worker_count
from cheegercut.optimize import local_search_bisection, median_split, refine_pipeline

REGIME_FACTOR = 4.0


def parse_objective(tag):
    """'che:v,b' -> ('che', v, b); 'mbis' and 'vol2' pass through."""
    tag = tag.strip()
    if tag in ("mbis", "vol2"):
        return tag, None, None
    if tag.startswith("che:"):
        v, b = (int(s) for s in tag[4:].split(","))
        if v not in (1, 2) or b not in (1, 2):
            raise ValueError(f"bad objective {tag!r}")
        return "che", v, b
    raise ValueError(f"unknown objective {tag!r}")


@dataclass
class ExperimentConfig:
    domain: str = "square"
    dim: int = 2
    density: str = "uniform"
    kernel: str = "uniform"
    objectives: list = field(default_factory=lambda: ["che:1,1"])
    n: list = field(default_factory=lambda: [2000])
    r: object = field(default_factory=lambda: {"rule": "log", "c": 2.0})
    replicates: int = 1
    seed: int = 0
    method: str = "axis"
    output: str | None = None
    tail_eps: float = 1e-12
    bisection_passes: int = 50

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            raw = json.load(fh)
        known = {f.name for f in fields(cls)}
        extra = set(raw) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**raw)

    def to_json(self):
        return json.dumps(asdict(self), indent=2)

    def radius(self, n):
        if isinstance(self.r, (list, tuple)):
            return float(self.r[list(self.n).index(n)])
        if isinstance(self.r, (int, float)):
            return float(self.r)
        if self.r.get("rule") == "log":
            return float(self.r.get("c", 2.0)) * (math.log(n) / n) ** (1.0 / self.dim)
        raise ValueError(f"unknown r rule {self.r!r}")

    def domain_density(self):
        return DomainDensity.from_names(self.domain, self.dim, self.density)

    def make_kernel(self):
        return Kernel.from_spec(self.kernel, self.dim)


@dataclass
class ConvergenceRecord:
    n: int
    r: float
    gamma: float
    seed: int
    objective: str
    raw: float
    rescaled: float
    target: float
    rel_deviation: float
    method: str
    in_regime: bool
    weak_distance: float
    runtime: float = field(default=0.0, compare=False)


# runtime is wall-clock noise; it is kept on the record but left out of the files
CSV_COLUMNS = [f.name for f in fields(ConvergenceRecord) if f.name != "runtime"]


def in_regime(n, r, d):
    # the default rule r = 2 (log n / n)^(1/2) sits exactly on the boundary; do not let rounding decide
    return n * r**d >= REGIME_FACTOR * math.log(n) * (1 - 1e-9)


# ---------------------------------------------------------------- weak convergence


def _cube_cutset_mass(grid, dd, A):
    """nu(A cap Q'_j cap D) for every cube j of the grid."""
    h = grid.side
    lo_b, hi_b = dd.bbox
    clo = np.maximum((grid.cube_index - 0.5) * h, lo_b)
    chi = np.minimum((grid.cube_index + 0.5) * h, hi_b)
    if isinstance(dd.shape, Box) and dd.uniform and isinstance(A, Halfspace):
        lo, hi = clo.copy(), chi.copy()
        if A.below:
            hi[:, A.axis] = np.minimum(hi[:, A.axis], A.offset)
        else:
            lo[:, A.axis] = np.maximum(lo[:, A.axis], A.offset)
        return np.prod(np.clip(hi - lo, 0.0, None), axis=1) * dd.rho_bounds[0]
    m, d = 8, grid.dim
    offs = (np.stack(np.meshgrid(*[np.arange(m)] * d, indexing="ij"), -1).reshape(-1, d) + 0.5) / m
    out = np.empty(len(clo))
    step = max(1, 200000 // len(offs))
    for s in range(0, len(clo), step):
        lo, hi = clo[s:s + step], chi[s:s + step]
        pts = (lo[:, None, :] + offs[None] * (hi - lo)[:, None, :]).reshape(-1, d)
        inside = dd.contains(pts)
        val = np.zeros(len(pts))
        if inside.any():
            pi = pts[inside]
            val[inside] = dd.rho(pi) * cutset_contains(dd, A, pi)
        out[s:s + step] = val.reshape(len(lo), -1).mean(axis=1) * np.prod(hi - lo, axis=1)
    return out


def weak_convergence_distance(grid, members, A, dd, n=None):
    """Box-averaged L1 distance between the empirical measure of Y and nu restricted to A.

    ``A`` may be a single cut set or a list of equally good ones; the minimum over
    each set and its complement is returned.
    """
    n = grid.n_points if n is None else n
    b, _ = grid.box_counts(members)
    emp = b / n
    cands = A if isinstance(A, (list, tuple)) else [A]
    best = math.inf
    for C in cands:
        for S in (C, C.complement()):
            box_mass = np.bincount(grid.cube_box, weights=_cube_cutset_mass(grid, dd, S), minlength=grid.n_boxes)
            best = min(best, math.fsum(np.abs(emp - box_mass)))
    return best


# ---------------------------------------------------------------- runs


class _Targets:
    def __init__(self, cfg, dd, kernel):
        self.sigma = surface_tension(kernel)
        self.mass = total_mass(kernel)
        self.dd = dd
        self._cache = {}

    def get(self, tag):
        if tag not in self._cache:
            kind, v, b = parse_objective(tag)
            if kind == "vol2":
                if isinstance(self.dd.shape, Box) and self.dd.uniform:
                    rho2 = total_volume(self.dd, 2)
                else:
                    rho2 = self.dd.mass_in_box(*self.dd.bbox, power=2)
                self._cache[tag] = (rho2 * self.mass, [])
            elif kind == "che":
                res = continuum_cheeger(self.dd, v, b)
                self._cache[tag] = (0.5 * self.sigma * res.value, res.minimizers)
            else:
                res = continuum_mbis(self.dd)
                self._cache[tag] = (0.5 * self.sigma * res.value, res.minimizers)
        return self._cache[tag]


def _run_one(cfg, dd, kernel, targets, n, rep):
    seed = cfg.seed + rep
    r = cfg.radius(n)
    d = cfg.dim
    X = sample_points(dd, n, seed)
    g = build_graph(X, r, kernel, cfg.tail_eps)
    gamma = choose_gamma(n, r, d).gamma if n >= 2 else 0.5
    try:
        grid = build_grid(dd, X, r, gamma)
    except GridTooCoarseError:
        grid = None
    regime = in_regime(n, r, d)
    out = []
    for tag in cfg.objectives:
        t0 = time.perf_counter()
        kind, v, b = parse_objective(tag)
        target, minimizers = targets.get(tag)
        weak = math.nan
        if kind == "vol2":
            raw = volume(g, np.ones(n, bool), 2)
            rescaled = raw / (n * n * r**d)
            method = "exact"
        else:
            if kind == "che":
                if grid is None:
                    raise GridTooCoarseError("granulation needs at least one interior box")
                res = refine_pipeline(g, grid, v, b, cfg.method)
                raw = objective(g, res.partition, v, b)
            else:
                res = local_search_bisection(g, median_split(g), cfg.bisection_passes)
                raw = res.value
            rescaled = rescaled_estimator(raw, n, r, d)
            method = res.method
            if grid is not None and minimizers:
                weak = weak_convergence_distance(grid, res.partition, minimizers, dd, n)
        rel = (rescaled - target) / target if target else math.nan
        out.append(ConvergenceRecord(n, r, gamma, seed, tag, raw, rescaled, target, rel, method, regime, weak,
                                     time.perf_counter() - t0))
    return out


def run_convergence(cfg, threads=None):
    """One record per (n, replicate, objective), ordered by n, then replicate, then objective."""
    if not cfg.objectives:
        return []
    dd = cfg.domain_density()
    kernel = cfg.make_kernel()
    targets = _Targets(cfg, dd, kernel)
    for tag in cfg.objectives:
        targets.get(tag)
    tasks = [(n, rep) for n in cfg.n for rep in range(cfg.replicates)]
    workers = min(worker_count(threads), max(len(tasks), 1))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(lambda t: _run_one(cfg, dd, kernel, targets, *t), tasks))
    else:
        chunks = [_run_one(cfg, dd, kernel, targets, *t) for t in tasks]
    return [rec for chunk in chunks for rec in chunk]


# ---------------------------------------------------------------- output


def _fmt(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def records_to_csv(records):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rec in records:
        w.writerow([_fmt(getattr(rec, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_csv(records, path):
    with open(path, "w", newline="") as fh:
        fh.write(records_to_csv(records))


def records_to_json(records):
    rows = []
    for rec in records:
        row = {c: getattr(rec, c) for c in CSV_COLUMNS}
        row = {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in row.items()}
        rows.append(row)
    return json.dumps(rows, indent=2)


def write_json(records, path):
    with open(path, "w") as fh:
        fh.write(records_to_json(records))


def median_by_n(records, tag, key="rescaled"):
    out = {}
    for n in sorted({r.n for r in records}):
        vals = [getattr(r, key) for r in records if r.n == n and r.objective == tag]
        if vals:
            out[n] = float(np.median(vals))
    return out
