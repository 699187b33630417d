"""Effective surface tension of surfactant-laden solid-solid interfaces.

Discretised second-gradient two-well energies, the cell problem for the
surface tension Phi(gamma), sharp-interface limit energies and recovery
sequences.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .cellproblem import CellSolution, PhiCurve, SolverOptions, solve_profile_1d, solve_profile_nd, sweep_phi
from .energy import EnergyBreakdown, energy_E, energy_F, grad_F
from .fields import DensityField, Grid, GridField
from .potential import PotentialSpec, check_assumptions, eval_W, grad_W
from .sharpinterface import Laminate, SurfactantMeasure, eval_laminate, limit_energy, rasterize
from .waterfill import solve_lambda

__all__ = [
    "CellSolution",
    "DensityField",
    "EnergyBreakdown",
    "Grid",
    "GridField",
    "Laminate",
    "PhiCurve",
    "PotentialSpec",
    "SolverOptions",
    "SurfactantMeasure",
    "check_assumptions",
    "energy_E",
    "energy_F",
    "eval_W",
    "eval_laminate",
    "grad_F",
    "grad_W",
    "limit_energy",
    "rasterize",
    "solve_lambda",
    "solve_profile_1d",
    "solve_profile_nd",
    "sweep_phi",
]
