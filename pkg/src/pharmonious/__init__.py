"""Tug-of-war-with-noise averaging schemes for p-harmonic Dirichlet problems."""

import numba

# prefer OpenMP/workqueue threading so a missing TBB runtime stays silent
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

__version__ = "0.1.0"

from .domains import Ball, Box, DomainSpec, GeometryError, Polygon, Shell, l_shape, make_domain  # noqa: E402
from .grid import BoundaryData, ConfigurationError, GridFunction, Lattice, build_lattice  # noqa: E402
from .radius import RadiusProfile, default_profile, radius_at, validate_constants  # noqa: E402
from .averaging import OperatorConfig, apply_T, ball_mean, ball_extremes, consistency_residual  # noqa: E402
from .fixed_point import SolveConfig, SolveReport, check_comparison, solve_dirichlet  # noqa: E402
from .barrier import BarrierFamily, choose_constants, phi  # noqa: E402

__all__ = [
    "Ball", "Box", "DomainSpec", "GeometryError", "Polygon", "Shell", "l_shape", "make_domain",
    "BoundaryData", "ConfigurationError", "GridFunction", "Lattice", "build_lattice",
    "RadiusProfile", "default_profile", "radius_at", "validate_constants",
    "OperatorConfig", "apply_T", "ball_mean", "ball_extremes", "consistency_residual",
    "SolveConfig", "SolveReport", "check_comparison", "solve_dirichlet",
    "BarrierFamily", "choose_constants", "phi",
]
