"""Finite element solver for a coupled electrohydrodynamic system.

Second-order implicit time stepping (variable-coefficient backward
differences with extrapolated couplings) over Taylor-Hood velocity/pressure
and quadratic potential/charge spaces, plus the manufactured-solution and
energy-decay diagnostics used to verify it.
"""

from .diagnostics import DiagnosticsLog, discrete_energy, eoc, l2_error, total_charge
from .mesh import Mesh, build_rect_mesh, mesh_size
from .mms import Forcing, ManufacturedCase, cosine_vortex_case, fd_check, forcing, stability_profile
from .scheme import (
    EhdSpaces,
    EhdState,
    EhdStepper,
    InitialData,
    ModelParams,
    TimeGrid,
    build_ehd_spaces,
    extrapolate,
    mms_initial_data,
)
from .spaces import FeSpace, build_space, interpolate, mean_functional
from .sparse import BlockSystem, SolverError, solve, triplets_to_csr

__all__ = [
    "BlockSystem",
    "DiagnosticsLog",
    "EhdSpaces",
    "EhdState",
    "EhdStepper",
    "FeSpace",
    "Forcing",
    "InitialData",
    "ManufacturedCase",
    "Mesh",
    "ModelParams",
    "SolverError",
    "TimeGrid",
    "build_ehd_spaces",
    "build_rect_mesh",
    "build_space",
    "cosine_vortex_case",
    "discrete_energy",
    "eoc",
    "extrapolate",
    "fd_check",
    "forcing",
    "interpolate",
    "l2_error",
    "mean_functional",
    "mesh_size",
    "mms_initial_data",
    "solve",
    "stability_profile",
    "total_charge",
    "triplets_to_csr",
]

__version__ = "0.1.0"
