"""Cheeger cuts and minimum bisections of random geometric graphs, with their continuum limits."""

from cheegercut.continuum import continuum_cheeger, continuum_mbis
from cheegercut.domain import Ball, Box, DomainDensity, Halfspace, continuum_tv, sample_points
from cheegercut.geograph import balance, build_graph, cut_weight, objective, rescaled_estimator, volume
from cheegercut.granulation import build_grid, choose_gamma, classify_boxes, modified_cut, modified_volume
from cheegercut.harness import ExperimentConfig, run_convergence, weak_convergence_distance
from cheegercut.kernel import Kernel, surface_tension, total_mass
from cheegercut.nonlocal_tv import IndicatorField, nonlocal_tv, recovery_curve
from cheegercut.optimize import (exact_cheeger, exact_mbis, greyscale_removal, local_search_bisection,
                                 refine_pipeline, sweep_cut)

__all__ = [
    "Ball", "Box", "DomainDensity", "ExperimentConfig", "Halfspace", "IndicatorField", "Kernel",
    "balance", "build_graph", "build_grid", "choose_gamma", "classify_boxes", "continuum_cheeger",
    "continuum_mbis", "continuum_tv", "cut_weight", "exact_cheeger", "exact_mbis", "greyscale_removal",
    "local_search_bisection", "modified_cut", "modified_volume", "nonlocal_tv", "objective",
    "recovery_curve", "refine_pipeline", "rescaled_estimator", "run_convergence", "sample_points",
    "surface_tension", "sweep_cut", "total_mass", "volume", "weak_convergence_distance",
]
