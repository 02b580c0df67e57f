"""Numerical solvers for Caputo fractional differential equations.

Product-integration predictor-corrector and Newton-Raphson schemes with an
FFT-accelerated history convolution, a small model zoo and benchmark tools.
"""

from __future__ import annotations

from fracsolve.convolution import ConvPlan
from fracsolve.core import Diagnostics, FdeProblem, Solution, SolverConfig
from fracsolve.errors import (
    BadInitialShape,
    BadSpan,
    ConvergenceError,
    DimensionMismatch,
    Diverged,
    DomainError,
    FracSolveError,
    LengthMismatch,
    NoExactSolution,
    PlanError,
    SingularMatrix,
    UnknownModel,
    UnsupportedOrder,
    ValidationError,
)
from fracsolve.models import get_model, rmsd
from fracsolve.solvers import solve, solve_nr, solve_pc
from fracsolve.special import gamma, mittag_leffler

__all__ = [
    "BadInitialShape",
    "BadSpan",
    "ConvPlan",
    "ConvergenceError",
    "Diagnostics",
    "DimensionMismatch",
    "Diverged",
    "DomainError",
    "FdeProblem",
    "FracSolveError",
    "LengthMismatch",
    "NoExactSolution",
    "PlanError",
    "SingularMatrix",
    "Solution",
    "SolverConfig",
    "UnknownModel",
    "UnsupportedOrder",
    "ValidationError",
    "gamma",
    "get_model",
    "mittag_leffler",
    "rmsd",
    "solve",
    "solve_nr",
    "solve_pc",
]

__version__ = "0.1.0"
