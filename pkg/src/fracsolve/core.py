"""Problem, configuration and solution containers shared by both solvers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from fracsolve.errors import (
    BadInitialShape,
    BadSpan,
    DimensionMismatch,
    UnsupportedOrder,
)

RhsFn = Callable[[float, np.ndarray, Any], Any]
JacobianFn = Callable[[float, np.ndarray, Any], Any]

# slack when deciding whether T sits on the grid
_GRID_EPS = 1e-10


def _as_order_vector(beta: Any) -> np.ndarray:
    return np.atleast_1d(np.asarray(beta, dtype=float)).ravel()


def _as_initial_matrix(x0: Any, n_eq: int) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 0:
        return x0.reshape(1, 1)
    if x0.ndim == 1:
        # a flat vector holds one value per equation, except for a scalar
        # equation where it lists the derivatives X(t0), X'(t0), ...
        return x0.reshape(-1, 1) if n_eq == 1 else x0.reshape(1, -1)
    return x0


@dataclass(frozen=True, eq=False)
class FdeProblem:
    """Initial-value problem ``D^beta_i X_i = f_i(t, X)`` with Caputo derivatives.

    Parameters
    ----------
    rhs : callable
        ``rhs(t, X, params)`` returning the length-M derivative vector.
    t_span : (float, float)
        Initial and final time.
    x0 : array_like
        Initial values, shape ``(m, M)``; row ``j`` holds ``X^(j)(t0)``.
        Scalars and flat vectors are promoted (see ``_as_initial_matrix``).
    beta : float or array_like
        Order of each equation.
    jacobian : callable, optional
        ``jacobian(t, X, params)`` returning the ``(M, M)`` Jacobian (a scalar
        is accepted when ``M == 1``). Required by the Newton-Raphson solver.
    params : object, optional
        Forwarded untouched to ``rhs`` and ``jacobian``.
    """

    rhs: RhsFn
    t_span: tuple[float, float]
    x0: np.ndarray
    beta: np.ndarray
    jacobian: Optional[JacobianFn] = None
    params: Any = None

    def __post_init__(self) -> None:
        beta = _as_order_vector(self.beta)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "x0", _as_initial_matrix(self.x0, beta.size))
        t0, t1 = self.t_span
        object.__setattr__(self, "t_span", (float(t0), float(t1)))

    @property
    def dim(self) -> int:
        return int(self.beta.size)

    @property
    def n_initial(self) -> int:
        """Number of initial-value rows required, ``ceil(max(beta))``."""
        return max(1, math.ceil(float(np.max(self.beta)) - 1e-12))

    def eval_rhs(self, t: float, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.rhs(t, x, self.params), dtype=float).reshape(-1)

    def eval_jacobian(self, t: float, x: np.ndarray) -> np.ndarray:
        if self.jacobian is None:
            raise ValueError("problem has no Jacobian")
        jac = np.asarray(self.jacobian(t, x, self.params), dtype=float)
        return jac.reshape(self.dim, self.dim)


@dataclass(frozen=True)
class SolverConfig:
    """Step size and iteration controls.

    ``nc`` is the number of corrector sweeps of the predictor-corrector
    method; above 10 it becomes a cap and ``tol`` decides when to stop.
    ``tol`` and ``itmax`` drive the Newton-Raphson iteration.
    """

    h: float = 2.0**-6
    nc: int = 2
    tol: float = 1e-6
    itmax: int = 100

    def __post_init__(self) -> None:
        if not self.h > 0:
            raise ValueError(f"step size must be positive, got {self.h}")
        if self.nc < 1:
            raise ValueError(f"nc must be >= 1, got {self.nc}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.itmax < 1:
            raise ValueError(f"itmax must be >= 1, got {self.itmax}")


@dataclass
class Diagnostics:
    method: str
    iterations: int = 0
    wall_time: float = 0.0
    steps: int = 0
    # steps where Newton hit itmax (or the corrector hit nc) without reaching tol
    unconverged_steps: int = 0
    t_end: float = float("nan")
    endpoint_on_grid: bool = True
    conv_mode: str = "fft"


@dataclass
class Solution:
    t: np.ndarray
    x: np.ndarray
    diagnostics: Diagnostics = field(default_factory=lambda: Diagnostics("?"))

    @property
    def dim(self) -> int:
        return int(self.x.shape[1])

    def __iter__(self):
        # allows ``t, x = solve(...)``
        yield self.t
        yield self.x


def grid_points(t_span: tuple[float, float], h: float) -> tuple[int, np.ndarray]:
    """Uniform grid ``t0 + r*h`` for ``r = 0..N`` with ``t_N <= T``.

    >>> grid_points((0.0, 1.0), 0.25)[0]
    4
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t0 < t1:
        raise BadSpan(f"t0 must be smaller than T, got {t_span}")
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    ratio = (t1 - t0) / h
    n = int(math.floor(ratio + _GRID_EPS * max(1.0, ratio)))
    return n, t0 + h * np.arange(n + 1, dtype=float)


def validate_problem(problem: FdeProblem) -> FdeProblem:
    """Check the invariants of ``problem`` and return it unchanged."""
    beta = problem.beta
    if beta.size == 0:
        raise DimensionMismatch("order vector is empty")
    if not np.all(np.isfinite(beta)) or np.any(beta <= 0):
        raise UnsupportedOrder(f"orders must be positive, got {beta.tolist()}")
    if beta.size > 1 and np.any(beta > 1):
        raise UnsupportedOrder(
            f"systems only support orders in (0, 1], got {beta.tolist()}"
        )
    t0, t1 = problem.t_span
    if not t0 < t1:
        raise BadSpan(f"t0 must be smaller than T, got {problem.t_span}")
    x0 = problem.x0
    if x0.ndim != 2 or x0.shape[1] != beta.size:
        raise BadInitialShape(
            f"x0 must have {beta.size} column(s), got shape {x0.shape}"
        )
    if x0.shape[0] != problem.n_initial:
        raise BadInitialShape(
            f"x0 needs {problem.n_initial} row(s) for orders {beta.tolist()}, "
            f"got {x0.shape[0]}"
        )
    f0 = problem.eval_rhs(t0, x0[0].copy())
    if f0.size != beta.size:
        raise DimensionMismatch(
            f"rhs returned {f0.size} value(s) for a system of size {beta.size}"
        )
    return problem
