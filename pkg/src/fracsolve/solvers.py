"""Predictor-corrector and modified Newton-Raphson time stepping.

Both schemes discretize the Volterra form of the problem with product
integration on a uniform grid. At step ``n`` the trapezoidal rule reads::

    X_n = psi_n + a0 * F(t_n, X_n)
    psi_n = T(t_n) + h^beta * (c_n F_0 + sum_{j=1}^{n-1} d_{n-j} F_j)

The predictor-corrector method starts from the rectangular-rule estimate and
applies fixed-point sweeps of this equation; the Newton-Raphson method solves
it with a Jacobian frozen at the previous grid value.
"""

from __future__ import annotations

import logging
import math
import time
from typing import Callable, NamedTuple, Optional

import numpy as np

from fracsolve.convolution import ConvPlan, HistoryConvolution
from fracsolve.core import (
    Diagnostics,
    FdeProblem,
    Solution,
    SolverConfig,
    grid_points,
    validate_problem,
)
from fracsolve.errors import Diverged, DomainError
from fracsolve.linalg import lu_factor
from fracsolve.weights import build_weights, taylor_term

__all__ = ["NewtonResult", "newton_iterate", "solve", "solve_nr", "solve_pc"]

log = logging.getLogger(__name__)

# with more corrections than this, ``nc`` becomes a cap and ``tol`` decides
_FIXED_CORRECTIONS_MAX = 10


class NewtonResult(NamedTuple):
    x: np.ndarray
    iterations: int
    converged: bool


def newton_iterate(
    psi: np.ndarray,
    a0: np.ndarray,
    f_eval: Callable[[np.ndarray], np.ndarray],
    j_frozen: np.ndarray,
    x_init: np.ndarray,
    tol: float,
    itmax: int,
) -> NewtonResult:
    """Solve ``x = psi + a0 * f(x)`` by Newton steps with a frozen Jacobian.

    The matrix ``I - diag(a0) J`` is factorized once and reused. Iteration
    stops when the infinity norm of an update drops below ``tol`` (that last
    update is still applied) or after ``itmax`` updates. ``iterations`` counts
    the updates that were at least ``tol`` in size.

    Raises
    ------
    SingularMatrix
        If the Newton matrix has a negligible pivot.
    """
    a0 = np.asarray(a0, dtype=float)
    x = np.array(x_init, dtype=float)
    m = x.size
    if m == 1:
        # scalar equation: skip the LU machinery
        denom = 1.0 - float(a0[0]) * float(np.asarray(j_frozen).reshape(-1)[0])
        lu = lu_factor(np.array([[denom]]))
        for it in range(itmax):
            dx = (x - psi - a0 * f_eval(x)) / lu.lu[0, 0]
            x = x - dx
            if abs(dx[0]) < tol:
                return NewtonResult(x, it, True)
        return NewtonResult(x, itmax, False)

    lu = lu_factor(np.eye(m) - a0[:, None] * np.asarray(j_frozen, dtype=float))
    for it in range(itmax):
        dx = lu.solve(x - psi - a0 * f_eval(x))
        x = x - dx
        if np.abs(dx).max() < tol:
            return NewtonResult(x, it, True)
    return NewtonResult(x, itmax, False)


class _Stepper:
    """State shared by both time-stepping loops."""

    def __init__(
        self, problem: FdeProblem, config: SolverConfig, plan: Optional[ConvPlan]
    ) -> None:
        self.problem = validate_problem(problem)
        self.config = config
        self.plan = (plan or ConvPlan()).fresh()
        t0, t_end = problem.t_span
        self.n_steps, self.t = grid_points(problem.t_span, config.h)
        n = self.n_steps
        m = problem.dim
        self.weights = weights = build_weights(problem.beta, config.h, max(n, 1))
        hpow = weights.h_pow_beta[:, None]
        self.a0 = weights.a0
        self.taylor = taylor_term(problem.x0, t0, self.t)
        self.x = np.empty((n + 1, m))
        self.f = np.empty((n + 1, m))
        self.x[0] = problem.x0[0]
        self.f[0] = self.rhs(t0, self.x[0], 0)
        # c_n h^beta F_0: the initial node of the trapezoidal rule
        self.first_node = (hpow * weights.c).T * self.f[0]
        corr_lags = hpow * weights.d
        self.corrector_sum = HistoryConvolution(
            self.plan, corr_lags, self.f, lo=1, n_max=n, key="d"
        )
        self.t_end = t_end

    def rhs(self, t: float, x: np.ndarray, step: int) -> np.ndarray:
        try:
            fx = self.problem.eval_rhs(t, x)
        except (DomainError, OverflowError, ZeroDivisionError) as exc:
            raise Diverged(step, str(exc)) from exc
        if fx.size != x.size:
            raise Diverged(step, f"rhs returned {fx.size} values, expected {x.size}")
        return fx

    def psi(self, n: int) -> np.ndarray:
        return self.taylor[n] + self.first_node[n] + self.corrector_sum(n)

    def accept(self, n: int, x: np.ndarray) -> None:
        if not math.isfinite(float(np.sum(x))):
            raise Diverged(n)
        self.x[n] = x
        fx = self.rhs(self.t[n], x, n)
        if not math.isfinite(float(np.sum(fx))):
            raise Diverged(n, "non-finite right-hand side")
        self.f[n] = fx

    def finish(self, diag: Diagnostics, started: float) -> Solution:
        diag.wall_time = time.perf_counter() - started
        diag.steps = self.n_steps
        diag.t_end = float(self.t[-1])
        diag.endpoint_on_grid = bool(
            abs(self.t[-1] - self.t_end) <= 1e-9 * max(1.0, abs(self.t_end))
        )
        diag.conv_mode = self.plan.mode
        if not diag.endpoint_on_grid:
            log.info(
                "final time %g is not on the grid; stopped at %g", self.t_end, self.t[-1]
            )
        if diag.unconverged_steps:
            log.warning(
                "%s: %d step(s) stopped at the iteration cap without reaching tol=%g",
                diag.method,
                diag.unconverged_steps,
                self.config.tol,
            )
        return Solution(t=self.t, x=self.x, diagnostics=diag)


def solve_pc(
    problem: FdeProblem,
    config: Optional[SolverConfig] = None,
    plan: Optional[ConvPlan] = None,
) -> Solution:
    """Predictor-corrector solution (rectangular predictor, trapezoidal corrector).

    With ``config.nc <= 10`` exactly ``nc`` corrections are applied per step.
    Larger values make ``nc`` a cap: corrections stop once two successive
    iterates differ by less than ``config.tol`` in the infinity norm.
    Any Jacobian on the problem is ignored.
    """
    config = config or SolverConfig()
    started = time.perf_counter()
    st = _Stepper(problem, config, plan)
    diag = Diagnostics(method="PC")
    n_max = st.n_steps
    weights = st.weights
    pred_lags = np.zeros((problem.dim, n_max + 1))
    pred_lags[:, 1:] = weights.h_pow_beta[:, None] * weights.b
    predictor_sum = HistoryConvolution(
        st.plan, pred_lags, st.f, lo=0, n_max=n_max, key="b"
    )

    a0 = st.a0
    t = st.t
    nc = config.nc
    adaptive = nc > _FIXED_CORRECTIONS_MAX
    tol = config.tol
    iterations = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, n_max + 1):
            tn = t[n]
            x = st.taylor[n] + predictor_sum(n)
            psi = st.psi(n)
            if not adaptive:
                for _ in range(nc):
                    x = psi + a0 * st.rhs(tn, x, n)
                iterations += nc
            else:
                done = False
                for _ in range(nc):
                    x_new = psi + a0 * st.rhs(tn, x, n)
                    iterations += 1
                    done = bool(np.abs(x_new - x).max() < tol)
                    x = x_new
                    if done:
                        break
                if not done:
                    diag.unconverged_steps += 1
            st.accept(n, x)
    diag.iterations = iterations
    return st.finish(diag, started)


def solve_nr(
    problem: FdeProblem,
    config: Optional[SolverConfig] = None,
    plan: Optional[ConvPlan] = None,
) -> Solution:
    """Implicit trapezoidal product integration solved by modified Newton-Raphson.

    Each step starts from the previous grid value, evaluates the Jacobian
    there once, and iterates until the update is below ``config.tol`` or
    ``config.itmax`` updates were made. Steps that hit the cap are counted in
    ``diagnostics.unconverged_steps``; the solution is still returned.
    """
    if problem.jacobian is None:
        raise ValueError("the Newton-Raphson solver needs a Jacobian")
    config = config or SolverConfig()
    started = time.perf_counter()
    st = _Stepper(problem, config, plan)
    diag = Diagnostics(method="NR")
    a0 = st.a0
    t = st.t
    iterations = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, st.n_steps + 1):
            tn = t[n]
            x_prev = st.x[n - 1]
            psi = st.psi(n)
            jac = problem.eval_jacobian(tn, x_prev)
            if not np.all(np.isfinite(jac)):
                raise Diverged(n, "non-finite Jacobian")
            res = newton_iterate(
                psi,
                a0,
                lambda x: st.rhs(tn, x, n),
                jac,
                x_prev,
                config.tol,
                config.itmax,
            )
            iterations += res.iterations
            if not res.converged:
                diag.unconverged_steps += 1
            st.accept(n, res.x)
    diag.iterations = iterations
    return st.finish(diag, started)


def solve(
    problem: FdeProblem,
    config: Optional[SolverConfig] = None,
    plan: Optional[ConvPlan] = None,
    method: Optional[str] = None,
) -> Solution:
    """Solve with Newton-Raphson when a Jacobian is available, else PC.

    ``method`` (``"pc"`` or ``"nr"``) overrides the automatic choice.
    """
    if method is None:
        method = "nr" if problem.jacobian is not None else "pc"
    method = method.lower()
    if method == "pc":
        return solve_pc(problem, config, plan)
    if method == "nr":
        return solve_nr(problem, config, plan)
    raise ValueError(f"unknown method {method!r}; expected 'pc' or 'nr'")
