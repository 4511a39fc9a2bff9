"""Numerical lab for the nonlocal phase-transition energy F_ε with s in (0, 1/2).

The package discretizes the energy on uniform grids, minimizes its sharp
interface limit, builds competitor sequences v_ε by local lifting, and checks
that ``F_ε(v_ε)/ε - m_1`` decays like ``-ε^{1-2s}``.
"""

from .config import ConfigError, RunConfig
from .construct import CaseConfig, ConstructionTrace, LiftSpec, build_v_eps, delta_star, lift_ball, varsigma
from .energy import DoubleWell, EnergyBreakdown, ExteriorDatum, PhaseField, f_eps, frac_perimeter, h_functional, kinetic, ladder
from .geometry import FarField, Grid, LipschitzGraph, SetRegion, build_grid, clean_balls, cover_boundary
from .minimize import DescentOptions, MinimizeReport, minimize_feps, minimize_sharp
from .pipeline import run
from .quadrature import CoefficientTable, adaptive_pair_integral, get_table, interval_interaction
from .verify import check_almost_min, check_mu_divergence, check_trivial_ladder, fit_scaling

__version__ = "0.1.0"

__all__ = [
    "CaseConfig", "CoefficientTable", "ConfigError", "ConstructionTrace", "DescentOptions", "DoubleWell",
    "EnergyBreakdown", "ExteriorDatum", "FarField", "Grid", "LiftSpec", "LipschitzGraph", "MinimizeReport",
    "PhaseField", "RunConfig", "SetRegion", "adaptive_pair_integral", "build_grid", "build_v_eps",
    "check_almost_min", "check_mu_divergence", "check_trivial_ladder", "clean_balls", "cover_boundary",
    "delta_star", "f_eps", "fit_scaling", "frac_perimeter", "get_table", "h_functional",
    "interval_interaction", "kinetic", "ladder", "lift_ball", "minimize_feps", "minimize_sharp", "run", "varsigma",
]
