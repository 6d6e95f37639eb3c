"""Command line interface."""

from __future__ import annotations

import csv
import json
import math
import sys

import click
import numpy as np

from cheegercut.continuum import continuum_cheeger, continuum_mbis
from cheegercut.domain import DomainDensity, Halfspace, sample_points
from cheegercut.geograph import build_graph, graph_stats, rescaled_estimator
from cheegercut.granulation import build_grid, choose_gamma, classify_boxes
from cheegercut.harness import ExperimentConfig, parse_objective, records_to_csv, records_to_json, run_convergence
from cheegercut.kernel import Kernel, effective_support, surface_tension, total_mass
from cheegercut.nonlocal_tv import IndicatorField, recovery_curve
from cheegercut.optimize import (exact_cheeger, exact_mbis, local_search_bisection, median_split, refine_pipeline,
                                 sweep_cut)


def _read_points(path):
    pts = np.loadtxt(path, delimiter=",", ndmin=2)
    if pts.size and not np.isfinite(pts).all():
        raise click.BadParameter("non-finite coordinates", param_hint="--points")
    return pts


def _read_partition(path, n):
    y = np.loadtxt(path, dtype=int, ndmin=1)
    if len(y) != n or not np.isin(y, (0, 1)).all():
        raise click.BadParameter(f"partition file must hold {n} lines of 0/1", param_hint="--partition")
    return y.astype(bool)


def _write_partition(path, y):
    np.savetxt(path, y.astype(int), fmt="%d")


def _echo_json(obj):
    click.echo(json.dumps(obj, indent=2, default=float))


domain_opt = click.option("--domain", default="square", show_default=True, help="square, cube or ball")
dim_opt = click.option("--dim", default=2, show_default=True, type=int)
density_opt = click.option("--density", default="uniform", show_default=True, help="uniform or file:PATH (CSV x1..xd,rho)")
kernel_opt = click.option("--kernel", "kernel_spec", default="uniform", show_default=True,
                          help="uniform, gaussian or file:PATH (CSV t,phi)")


def _points_and_domain(points, n, seed, domain, dim, density):
    if points:
        # a point file fixes the dimension
        X = _read_points(points)
        return DomainDensity.from_names(domain, X.shape[1], density), X
    dd = DomainDensity.from_names(domain, dim, density)
    if n:
        X = sample_points(dd, n, seed)
    else:
        raise click.UsageError("give --points or --n")
    return dd, X


@click.group()
def main():
    """Graph Cheeger constants on random geometric graphs and their continuum limits."""


# ---------------------------------------------------------------- kernel


@main.group()
def kernel():
    """Kernel utilities."""


@kernel.command("info")
@kernel_opt
@dim_opt
def kernel_info(kernel_spec, dim):
    """Surface tension, total mass and effective support."""
    k = Kernel.from_spec(kernel_spec, dim)
    out = {"profile": k.profile, "dim": dim, "sigma": surface_tension(k), "mass": total_mass(k),
           "r_cut": effective_support(k)}
    if k.profile != "tabulated":
        out["sigma_quadrature"] = surface_tension(k, "quadrature")
    _echo_json(out)


# ---------------------------------------------------------------- continuum


@main.command("continuum")
@domain_opt
@dim_opt
@density_opt
@click.option("--objective", "objective_tag", default="che:1,1", show_default=True, help="che:v,b or mbis")
@click.option("--grid-cells", default=None, type=int, help="cells per axis of the grid cross-check (0 disables)")
def continuum_cmd(domain, dim, density, objective_tag, grid_cells):
    """Continuum Cheeger constant or minimum bisection (parametric upper bound)."""
    dd = DomainDensity.from_names(domain, dim, density)
    kind, v, b = parse_objective(objective_tag)
    if kind == "che":
        res = continuum_cheeger(dd, v, b, grid_cells)
    elif kind == "mbis":
        res = continuum_mbis(dd, grid_cells)
    else:
        raise click.BadParameter("objective must be che:v,b or mbis")
    _echo_json(res.summary())


# ---------------------------------------------------------------- graph


@main.group()
def graph():
    """Geometric graph utilities."""


@graph.command("stats")
@click.option("--points", default=None, type=click.Path(exists=True, dir_okay=False), help="CSV x1,...,xd")
@click.option("--n", default=None, type=int, help="sample n points instead of reading --points")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--r", "r", required=True, type=float)
@domain_opt
@dim_opt
@density_opt
@kernel_opt
def graph_stats_cmd(points, n, seed, r, domain, dim, density, kernel_spec):
    """Edge count and volume of the geometric graph."""
    dd, X = _points_and_domain(points, n, seed, domain, dim, density)
    g = build_graph(X, r, Kernel.from_spec(kernel_spec, dd.dim))
    _echo_json(graph_stats(g))


# ---------------------------------------------------------------- grid


@main.group()
def grid():
    """Box granulation utilities."""


@grid.command("inspect")
@click.option("--points", default=None, type=click.Path(exists=True, dir_okay=False), help="CSV x1,...,xd")
@click.option("--n", default=None, type=int, help="sample n points instead of reading --points")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--r", "r", required=True, type=float)
@click.option("--gamma", default=None, type=float, help="box side is gamma*r (default: automatic)")
@domain_opt
@dim_opt
@density_opt
@click.option("--partition", default=None, type=click.Path(exists=True, dir_okay=False))
def grid_inspect(points, n, seed, r, gamma, domain, dim, density, partition):
    """Interior box count, points-per-box histogram and box colours."""
    dd, X = _points_and_domain(points, n, seed, domain, dim, density)
    gamma = gamma if gamma is not None else choose_gamma(len(X), r, dd.dim).gamma
    G = build_grid(dd, X, r, gamma)
    out = {"gamma": gamma, "side": G.side, "boxes": G.n_boxes, "C": G.C,
           "histogram": {str(k): v for k, v in G.histogram().items()}}
    if partition:
        out["colors"] = classify_boxes(G, _read_partition(partition, len(X))).summary()
    _echo_json(out)


# ---------------------------------------------------------------- optimisation


def _common_run_opts(f):
    for opt in reversed([
        click.option("--points", default=None, type=click.Path(exists=True, dir_okay=False)),
        click.option("--n", default=None, type=int, help="sample n points instead of reading --points"),
        click.option("--seed", default=0, show_default=True, type=int),
        click.option("--r", "r", default=None, type=float, help="default 2 (log n / n)^(1/d)"),
        domain_opt, dim_opt, density_opt, kernel_opt,
        click.option("--out", default=None, type=click.Path(dir_okay=False), help="partition file (one 0/1 per line)"),
    ]):
        f = opt(f)
    return f


def _radius(r, n, d):
    return r if r is not None else 2.0 * (math.log(n) / n) ** (1.0 / d)


@main.command("cut")
@_common_run_opts
@click.option("--objective", "objective_tag", default="che:1,1", show_default=True)
@click.option("--method", type=click.Choice(["exact", "sweep", "refine"]), default="refine", show_default=True)
@click.option("--mode", type=click.Choice(["axis", "fiedler"]), default="axis", show_default=True)
def cut_cmd(points, n, seed, r, domain, dim, density, kernel_spec, out, objective_tag, method, mode):
    """Minimise Cut/Bal over partitions of the point cloud."""
    kind, v, b = parse_objective(objective_tag)
    if kind != "che":
        raise click.BadParameter("objective must be che:v,b", param_hint="--objective")
    dd, X = _points_and_domain(points, n, seed, domain, dim, density)
    r = _radius(r, len(X), dd.dim)
    g = build_graph(X, r, Kernel.from_spec(kernel_spec, dd.dim))
    if method == "exact":
        res = exact_cheeger(g, v, b)
    elif method == "sweep":
        res = sweep_cut(g, v, b, mode)
    else:
        G = build_grid(dd, X, r, choose_gamma(len(X), r, dd.dim).gamma)
        res = refine_pipeline(g, G, v, b, mode)
    if out:
        _write_partition(out, res.partition)
    _echo_json({"value": res.value, "rescaled": rescaled_estimator(res.value, g.n, r, g.dim),
                "method": res.method, "seed": seed, "r": r, "n": g.n})


@main.command("bisect")
@_common_run_opts
@click.option("--method", type=click.Choice(["exact", "local"]), default="local", show_default=True)
@click.option("--max-passes", default=50, show_default=True, type=int)
def bisect_cmd(points, n, seed, r, domain, dim, density, kernel_spec, out, method, max_passes):
    """Minimum bisection: least cut over subsets of size floor(n/2)."""
    dd, X = _points_and_domain(points, n, seed, domain, dim, density)
    r = _radius(r, len(X), dd.dim)
    g = build_graph(X, r, Kernel.from_spec(kernel_spec, dd.dim))
    res = exact_mbis(g) if method == "exact" else local_search_bisection(g, median_split(g), max_passes)
    if out:
        _write_partition(out, res.partition)
    _echo_json({"value": res.value, "rescaled": rescaled_estimator(res.value, g.n, r, g.dim),
                "method": res.method, "seed": seed, "r": r, "n": g.n})


# ---------------------------------------------------------------- nonlocal TV


def _parse_cut(spec):
    kind, _, args = spec.partition(":")
    if kind != "halfspace":
        raise click.BadParameter("only halfspace:axis,offset is supported", param_hint="--cut")
    axis, offset = args.split(",")
    return Halfspace(int(axis), float(offset))


@main.command("tv-nonlocal")
@domain_opt
@dim_opt
@density_opt
@kernel_opt
@click.option("--cut", "cut_spec", default="halfspace:0,0.5", show_default=True)
@click.option("--r-list", default="0.2,0.1,0.05", show_default=True)
@click.option("--samples", default=10**6, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", default=None, type=click.Path(dir_okay=False))
def tv_nonlocal_cmd(domain, dim, density, kernel_spec, cut_spec, r_list, samples, seed, out):
    """Nonlocal total variation of an indicator for a list of radii."""
    dd = DomainDensity.from_names(domain, dim, density)
    u = IndicatorField(_parse_cut(cut_spec))
    radii = sorted((float(s) for s in r_list.split(",")), reverse=True)
    rows = recovery_curve(dd, Kernel.from_spec(kernel_spec, dd.dim), u, radii, samples, seed)
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=["r", "estimate", "stderr", "target"], lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) for k, v in row.items()})
    finally:
        if out:
            fh.close()


# ---------------------------------------------------------------- convergence


@main.command("converge")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default=None, type=click.Path(dir_okay=False), help="CSV output (default: config output or stdout)")
@click.option("--json-out", default=None, type=click.Path(dir_okay=False))
@click.option("--strict", is_flag=True, help="exit with status 2 if any run is outside the theorem regime")
@click.option("--threads", default=None, type=int, help="worker threads (also capped by CHEEGER_THREADS)")
def converge_cmd(config_path, out, json_out, strict, threads):
    """Run a convergence experiment described by a JSON config."""
    cfg = ExperimentConfig.from_json(config_path)
    records = run_convergence(cfg, threads)
    out = out or cfg.output
    text = records_to_csv(records)
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)
    if json_out:
        with open(json_out, "w") as fh:
            fh.write(records_to_json(records))
    if strict and any(not rec.in_regime for rec in records):
        click.echo("sub-regime runs present", err=True)
        sys.exit(2)


if __name__ == "__main__":
    main()
