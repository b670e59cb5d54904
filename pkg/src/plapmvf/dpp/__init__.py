"""Fixed-radius dynamic programming principle solver."""

from .grid import COLLAR, INTERIOR, OUTSIDE, GridField, Stencil, build_grid, check_hull, make_stencil
from .kernels import BACKEND
from .problem import Domain, DppProblem, ball_domain, box_domain
from .solver import (
    Barrier,
    ComparisonResult,
    ConvergenceRow,
    DppScheme,
    MonotonicityResult,
    SolverReport,
    ball_average_field,
    barrier,
    comparison_check,
    convergence_study,
    lockstep,
    paper_initial_field,
    picard_iterate,
    pointwise_solve,
    scheme_monotonicity_check,
    scheme_residual,
    scheme_value,
)

__all__ = [
    "BACKEND", "COLLAR", "INTERIOR", "OUTSIDE", "Barrier", "ComparisonResult",
    "ConvergenceRow", "Domain", "DppProblem", "DppScheme", "GridField", "MonotonicityResult", "SolverReport",
    "Stencil", "ball_average_field", "ball_domain", "barrier", "box_domain", "build_grid",
    "check_hull", "comparison_check", "convergence_study", "lockstep", "make_stencil",
    "paper_initial_field", "picard_iterate", "pointwise_solve", "scheme_monotonicity_check",
    "scheme_residual", "scheme_value",
]
