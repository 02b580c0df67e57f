"""Exception hierarchy shared by every fracsolve module."""

from __future__ import annotations


class FracSolveError(Exception):
    """Base class for all library errors."""


class ValidationError(FracSolveError, ValueError):
    """An :class:`~fracsolve.core.FdeProblem` violates one of its invariants."""


class DimensionMismatch(ValidationError):
    pass


class UnsupportedOrder(ValidationError):
    pass


class BadSpan(ValidationError):
    pass


class BadInitialShape(ValidationError):
    pass


class DomainError(FracSolveError, ValueError):
    """A function was evaluated outside its mathematical domain."""


class ConvergenceError(FracSolveError, ArithmeticError):
    pass


class PlanError(FracSolveError):
    pass


class SingularMatrix(FracSolveError, ArithmeticError):
    pass


class Diverged(FracSolveError, ArithmeticError):
    """The time stepper produced a non-finite state.

    Attributes
    ----------
    step : int
        Index of the grid point at which the failure was detected.
    """

    def __init__(self, step: int, reason: str = "non-finite state") -> None:
        self.step = step
        self.reason = reason
        super().__init__(f"solver diverged at step {step}: {reason}")


class NoExactSolution(FracSolveError):
    pass


class LengthMismatch(FracSolveError, ValueError):
    pass


class UnknownModel(FracSolveError, KeyError):
    def __str__(self) -> str:
        return f"unknown model: {self.args[0]!r}" if self.args else "unknown model"
