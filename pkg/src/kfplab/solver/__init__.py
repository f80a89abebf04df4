"""Grids, sampled fields and the transport / Fokker-Planck solvers."""
from .fp import cfl_number, diffusion_matrix, solve_fp
from .grid import GridSpec, ScalarField, export_csv, read_kfp1, write_kfp1
from .residual import ResidualStats, truncate, weak_residual
from .transport import solve_transport, solve_transport_at

__all__ = [
    "GridSpec", "ScalarField", "read_kfp1", "write_kfp1", "export_csv",
    "solve_transport", "solve_transport_at", "solve_fp", "cfl_number", "diffusion_matrix",
    "truncate", "weak_residual", "ResidualStats",
]
