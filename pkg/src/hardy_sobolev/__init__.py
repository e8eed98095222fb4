"""Numerics for radial p-Laplace problems with Hardy and Hardy-Sobolev terms."""

from __future__ import annotations

from .params import InvalidParameters, ProblemParams, hardy_exponents, mountain_pass_threshold
from .quadrature import RadialGrid, build_log_grid
from .profile import RadialProfile, decreasing_rearrangement, scale
from .energy import EnergyBreakdown, evaluate_energy, fiber_maximum, rayleigh_quotient, threshold_check
from .solvers import (
    SolverFailure,
    SolverOptions,
    best_constants,
    euler_lagrange_residual,
    minimize_hardy_sobolev,
    solve_double_critical,
)
from .pohozaev import PohozaevReport, identity_check, nonexistence_scan, pohozaev_functional
from .concentration import ConcentrationTriple, concentration_triple, translation_sweep

__version__ = "0.1.0"

__all__ = [
    "ConcentrationTriple",
    "EnergyBreakdown",
    "InvalidParameters",
    "PohozaevReport",
    "ProblemParams",
    "RadialGrid",
    "RadialProfile",
    "SolverFailure",
    "SolverOptions",
    "best_constants",
    "build_log_grid",
    "concentration_triple",
    "decreasing_rearrangement",
    "euler_lagrange_residual",
    "evaluate_energy",
    "fiber_maximum",
    "hardy_exponents",
    "identity_check",
    "minimize_hardy_sobolev",
    "mountain_pass_threshold",
    "nonexistence_scan",
    "pohozaev_functional",
    "rayleigh_quotient",
    "scale",
    "solve_double_critical",
    "threshold_check",
    "translation_sweep",
]
