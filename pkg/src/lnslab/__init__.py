"""Spectral laboratory for perturbed Navier-Stokes flows around weak-L^3 backgrounds."""
from .grid import Grid, ScalarField, VectorField3, build_grid, read_snapshot, sample_field, write_snapshot
from .lorentz import LorentzIndex, lorentz_quasinorm, lorentz_report, level_split, lp_norm
from .solver import SolverConfig, SolutionTrajectory, caloric, picard_solve, time_step_solve

__version__ = "0.1.0"

__all__ = [
    "Grid", "ScalarField", "VectorField3", "build_grid", "read_snapshot", "sample_field",
    "write_snapshot", "LorentzIndex", "lorentz_quasinorm", "lorentz_report", "level_split",
    "lp_norm", "SolverConfig", "SolutionTrajectory", "caloric", "picard_solve", "time_step_solve",
]
