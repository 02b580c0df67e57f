"""Builtin test problems and application models.

Every factory returns a :class:`ModelSpec` bundling the right-hand side, an
analytic Jacobian, an exact solution where one is known, and default data.
Right-hand sides follow the solver convention ``rhs(t, X, params)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, is_dataclass, replace
from typing import Any, Callable, Optional, Sequence

import numpy as np

from fracsolve.core import FdeProblem, SolverConfig
from fracsolve.errors import DomainError, LengthMismatch, NoExactSolution, UnknownModel
from fracsolve.special import gamma, mittag_leffler

__all__ = [
    "CovidParams",
    "GlvParams",
    "ModelSpec",
    "MODELS",
    "covid_model",
    "get_model",
    "glv_microbial_model",
    "glv_pulse_displacement",
    "harmonic_model",
    "lv3_model",
    "nonstiff_model",
    "rmsd",
    "sir_model",
    "stiff_linear_model",
]

ExactFn = Callable[[np.ndarray, FdeProblem], np.ndarray]


@dataclass(frozen=True)
class ModelSpec:
    """A named problem with its defaults.

    ``exact(t, problem)`` returns the exact trajectory, shape ``(len(t), M)``,
    for the given problem instance (it may depend on the orders, parameters
    and initial values) or raises :class:`NoExactSolution`.
    ``bind_params(beta, params)``, when present, rebuilds the parameter bundle
    after the orders are overridden; used by models whose right-hand side
    depends on the order itself.
    """

    name: str
    rhs: Callable
    default_params: Any
    default_x0: np.ndarray
    default_beta: np.ndarray
    default_t_span: tuple[float, float]
    jacobian: Optional[Callable] = None
    exact: Optional[ExactFn] = None
    default_config: SolverConfig = field(default_factory=SolverConfig)
    bind_params: Optional[Callable[[np.ndarray, Any], Any]] = None
    labels: tuple[str, ...] = ()
    # names of the entries of a tuple or scalar parameter bundle
    param_names: tuple[str, ...] = ()

    def override_params(self, overrides: dict[str, float], params: Any = None) -> Any:
        """Return a parameter bundle with named entries replaced.

        Dataclass bundles are updated by field name; tuple and scalar bundles
        use :attr:`param_names`.
        """
        params = self.default_params if params is None else params
        if not overrides:
            return params
        if is_dataclass(params):
            known = {f.name for f in fields(params)}
            unknown = set(overrides) - known
            if unknown:
                raise KeyError(f"unknown parameter(s) {sorted(unknown)} for {self.name}")
            return replace(params, **{k: float(v) for k, v in overrides.items()})
        unknown = set(overrides) - set(self.param_names)
        if unknown:
            raise KeyError(f"unknown parameter(s) {sorted(unknown)} for {self.name}")
        values = list(np.atleast_1d(params)) if self.param_names else []
        for k, v in overrides.items():
            values[self.param_names.index(k)] = float(v)
        if np.ndim(params) == 0:
            return values[0]
        return tuple(float(v) for v in values)

    def problem(
        self,
        beta: Any = None,
        params: Any = None,
        x0: Any = None,
        t_span: Optional[tuple[float, float]] = None,
        with_jacobian: bool = True,
    ) -> FdeProblem:
        beta = np.atleast_1d(
            np.asarray(self.default_beta if beta is None else beta, dtype=float)
        )
        if beta.size == 1 and np.size(self.default_beta) > 1:
            beta = np.full(np.size(self.default_beta), beta[0])
        params = self.default_params if params is None else params
        if self.bind_params is not None:
            params = self.bind_params(beta, params)
        return FdeProblem(
            rhs=self.rhs,
            t_span=self.default_t_span if t_span is None else t_span,
            x0=self.default_x0 if x0 is None else x0,
            beta=beta,
            jacobian=self.jacobian if with_jacobian else None,
            params=params,
        )

    def exact_solution(self, t: np.ndarray, problem: Optional[FdeProblem] = None):
        if self.exact is None:
            raise NoExactSolution(f"model {self.name!r} has no exact solution")
        return self.exact(np.asarray(t, dtype=float), problem or self.problem())


def _vector(x) -> float:
    return float(np.asarray(x).reshape(-1)[0])


# --------------------------------------------------------------------------
# one-dimensional test problems


def _nonstiff_rhs(t, x, beta):
    xv = _vector(x)
    if xv < 0:
        raise DomainError(f"X^(3/2) evaluated at X={xv} < 0")
    return (
        40320.0 / gamma(9.0 - beta) * t ** (8.0 - beta)
        - 3.0 * gamma(5.0 + beta / 2) / gamma(5.0 - beta / 2) * t ** (4.0 - beta / 2)
        + 9.0 / 4.0 * gamma(beta + 1.0)
        + (1.5 * t ** (beta / 2) - t**4) ** 3
        - xv**1.5
    )


def _nonstiff_jac(t, x, beta):
    xv = _vector(x)
    if xv < 0:
        raise DomainError(f"sqrt evaluated at X={xv} < 0")
    return -1.5 * math.sqrt(xv)


def _nonstiff_exact(t, problem):
    b = float(problem.beta[0])
    return (t**8 - 3.0 * t ** (4.0 + b / 2) + 2.25 * t**b)[:, None]


def nonstiff_model() -> ModelSpec:
    """Nonlinear equation with the smooth exact solution ``t^8 - 3t^(4+b/2) + 9/4 t^b``.

    The parameter bundle is the order itself.
    """
    return ModelSpec(
        name="nonstiff",
        rhs=_nonstiff_rhs,
        jacobian=_nonstiff_jac,
        exact=_nonstiff_exact,
        default_params=0.5,
        default_x0=np.zeros((1, 1)),
        default_beta=np.array([0.5]),
        default_t_span=(0.0, 1.0),
        bind_params=lambda beta, _params: float(beta[0]),
        labels=("X",),
    )


def _linear_rhs(t, x, lam):
    return lam * np.asarray(x, dtype=float)


def _linear_jac(t, x, lam):
    return lam


def _stiff_exact(t, problem):
    b = float(problem.beta[0])
    lam = float(problem.params)
    t0 = problem.t_span[0]
    x0 = float(problem.x0[0, 0])
    z = lam * np.maximum(t - t0, 0.0) ** b
    return x0 * np.array([mittag_leffler(b, zi) for zi in z])[:, None]


def stiff_linear_model(lam: float = -10.0) -> ModelSpec:
    """``D^b X = lam X`` with the Mittag-Leffler exact solution."""
    return ModelSpec(
        name="stiff",
        rhs=_linear_rhs,
        jacobian=_linear_jac,
        exact=_stiff_exact,
        default_params=float(lam),
        default_x0=np.ones((1, 1)),
        default_beta=np.array([0.8]),
        default_t_span=(0.0, 5.0),
        default_config=SolverConfig(nc=4, tol=1e-8),
        labels=("X",),
        param_names=("lambda",),
    )


def _harmonic_rhs(t, x, params):
    k, m = params
    return -(k / m) * np.asarray(x, dtype=float)


def _harmonic_jac(t, x, params):
    k, m = params
    return -(k / m)


def _harmonic_exact(t, problem):
    if not np.allclose(problem.beta, 2.0):
        raise NoExactSolution("the harmonic oscillator is only solved exactly at order 2")
    k, m = problem.params
    omega = math.sqrt(k / m)
    x0 = problem.x0
    dt = t - problem.t_span[0]
    return (x0[0, 0] * np.cos(omega * dt) + x0[1, 0] / omega * np.sin(omega * dt))[
        :, None
    ]


def harmonic_model(k: float = 16.0, m_mass: float = 4.0) -> ModelSpec:
    """Oscillator ``D^b X = -(k/m) X``; exact solution known for ``b = 2``."""
    return ModelSpec(
        name="harmonic",
        rhs=_harmonic_rhs,
        jacobian=_harmonic_jac,
        exact=_harmonic_exact,
        default_params=(float(k), float(m_mass)),
        default_x0=np.array([[1.0], [1.0]]),
        default_beta=np.array([2.0]),
        default_t_span=(0.0, 10.0),
        labels=("X",),
        param_names=("k", "m"),
    )


# --------------------------------------------------------------------------
# three-dimensional systems


def _sir_rhs(t, y, params):
    beta, gam = params
    s, i, _ = y
    infection = beta * s * i
    return np.array([-infection, infection - gam * i, gam * i])


def _sir_jac(t, y, params):
    beta, gam = params
    s, i, _ = y
    return np.array(
        [
            [-beta * i, -beta * s, 0.0],
            [beta * i, beta * s - gam, 0.0],
            [0.0, gam, 0.0],
        ]
    )


def sir_model() -> ModelSpec:
    """Fractional SIR model with incommensurate orders."""
    i0 = 0.1
    return ModelSpec(
        name="sir",
        rhs=_sir_rhs,
        jacobian=_sir_jac,
        default_params=(0.4, 0.04),
        default_x0=np.array([[1.0 - i0, i0, 0.0]]),
        default_beta=np.array([0.9, 0.6, 0.7]),
        default_t_span=(0.0, 100.0),
        default_config=SolverConfig(tol=1e-8),
        labels=("S", "I", "R"),
        param_names=("beta", "gamma"),
    )


def _lv3_rhs(t, x, a):
    a1, a2, a3, a4, a5, a6, a7 = a
    x1, x2, x3 = x
    return np.array(
        [
            x1 * (a1 - a2 * x1 - x2 - x3),
            x2 * (1.0 - a3 + a4 * x1),
            x3 * (1.0 - a5 + a6 * x1 + a7 * x2),
        ]
    )


def _lv3_jac(t, x, a):
    a1, a2, a3, a4, a5, a6, a7 = a
    x1, x2, x3 = x
    return np.array(
        [
            [a1 - 2.0 * a2 * x1 - x2 - x3, -x1, -x1],
            [a4 * x2, 1.0 - a3 + a4 * x1, 0.0],
            [a6 * x3, a7 * x3, 1.0 - a5 + a6 * x1 + a7 * x2],
        ]
    )


def lv3_model() -> ModelSpec:
    """Three-species Lotka-Volterra system with sharp oscillations."""
    return ModelSpec(
        name="lv3",
        rhs=_lv3_rhs,
        jacobian=_lv3_jac,
        default_params=(3.0, 3.0, 3.0, 5.0, 3.0, 3.0, 3.0),
        default_x0=np.ones((1, 3)),
        default_beta=np.array([1.0, 0.9, 0.7]),
        default_t_span=(0.0, 60.0),
        default_config=SolverConfig(nc=4, tol=1e-8),
        labels=("X1", "X2", "X3"),
        param_names=tuple(f"a{i}" for i in range(1, 8)),
    )


# --------------------------------------------------------------------------
# microbial community (generalized Lotka-Volterra with Hill inhibition)


@dataclass(frozen=True)
class GlvParams:
    """Parameters of the inhibition community model.

    ``schedule`` lists ``(t_start, t_end, growth_rates)`` windows during which
    the growth rates are replaced (half-open ``[t_start, t_end)``).
    """

    growth: tuple[float, ...]
    death: tuple[float, ...]
    K: np.ndarray
    hill: float = 2.0
    schedule: tuple[tuple[float, float, tuple[float, ...]], ...] = ()

    def growth_at(self, t: float) -> np.ndarray:
        for start, end, rates in self.schedule:
            if start <= t < end:
                return np.asarray(rates, dtype=float)
        return np.asarray(self.growth, dtype=float)

    def with_pulse(self, start: float, end: float, rates: Sequence[float]) -> "GlvParams":
        return replace(
            self, schedule=self.schedule + ((float(start), float(end), tuple(rates)),)
        )


def _glv_inhibition(x: np.ndarray, p: GlvParams):
    # factor[i, k] = K_ik^n / (K_ik^n + X_k^n), with the diagonal set to 1
    kn = p.K**p.hill
    xn = np.asarray(x, dtype=float) ** p.hill
    factor = kn / (kn + xn[None, :])
    np.fill_diagonal(factor, 1.0)
    return factor, kn, xn


def _glv_rhs(t, x, p: GlvParams):
    x = np.asarray(x, dtype=float)
    factor, _, _ = _glv_inhibition(x, p)
    f = factor.prod(axis=1)
    return x * (p.growth_at(t) * f - np.asarray(p.death) * x)


def _glv_jac(t, x, p: GlvParams):
    x = np.asarray(x, dtype=float)
    b = p.growth_at(t)
    k = np.asarray(p.death)
    factor, kn, xn = _glv_inhibition(x, p)
    f = factor.prod(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        # d f_i / d X_k = -f_i * n X_k^(n-1) / (K_ik^n + X_k^n)
        dlog = -p.hill * x[None, :] ** (p.hill - 1.0) / (kn + xn[None, :])
    np.fill_diagonal(dlog, 0.0)
    jac = (x * b * f)[:, None] * dlog
    jac[np.diag_indices_from(jac)] = b * f - 2.0 * k * x
    return jac


def glv_microbial_model(n_species: int = 3) -> ModelSpec:
    """Community model ``D^b X_i = X_i (b_i f_i(X) - k_i X_i)``.

    ``f_i`` is the product of Hill inhibitions by all other species. The
    default three-species community starts dominated by the first species.
    """
    if n_species < 1:
        raise ValueError("need at least one species")
    if n_species == 3:
        growth = (1.0, 0.95, 1.05)
        x0 = np.array([[0.99, 0.01, 0.01]])
    else:
        growth = (1.0,) * n_species
        x0 = np.full((1, n_species), 0.01)
        x0[0, 0] = 0.99
    params = GlvParams(
        growth=growth,
        death=(1.0,) * n_species,
        K=np.full((n_species, n_species), 0.1),
    )
    return ModelSpec(
        name="glv",
        rhs=_glv_rhs,
        jacobian=_glv_jac,
        default_params=params,
        default_x0=x0,
        default_beta=np.full(n_species, 0.9),
        default_t_span=(0.0, 50.0),
        labels=tuple(f"X{i + 1}" for i in range(n_species)),
    )


# pulse used for the resistance experiment: species 1 slowed, species 3 boosted
GLV_PULSE_RATES = (0.5, 0.95, 2.0)
GLV_PULSE_WINDOW = (20.0, 30.0)


def glv_pulse_displacement(
    beta: float,
    window: tuple[float, float] = GLV_PULSE_WINDOW,
    rates: Sequence[float] = GLV_PULSE_RATES,
    h: float = 2**-5,
    method: str = "nr",
) -> float:
    """Largest ``||X(t) - X(0)||_inf`` over grid times inside the pulse window.

    Solves the default three-species community with commensurate order
    ``beta`` from ``t = 0`` to 20 time units past the end of the window.
    """
    from fracsolve.solvers import solve

    model = glv_microbial_model(len(rates))
    params = model.default_params.with_pulse(window[0], window[1], rates)
    problem = model.problem(beta=beta, params=params, t_span=(0.0, window[1] + 20.0))
    sol = solve(problem, SolverConfig(h=h), method=method)
    inside = (sol.t >= window[0]) & (sol.t < window[1])
    return float(np.abs(sol.x[inside] - sol.x[0]).max())


# --------------------------------------------------------------------------
# Covid-19 compartments: S E I P A H R F


@dataclass(frozen=True)
class CovidParams:
    """Rates of the super-spreader compartment model (per day unless noted).

    ``beta_inf`` is the transmission coefficient fitted to data; the default
    is only a plausible starting value.
    """

    beta_inf: float = 2.55
    l: float = 1.56  # noqa: E741 - relative transmissibility of hospitalized
    beta_prime: float = 7.65
    kappa: float = 0.25
    rho1: float = 0.58
    rho2: float = 0.001
    gamma_a: float = 0.94
    gamma_i: float = 0.27
    gamma_r: float = 0.5
    delta_i: float = 1.0 / 23.0
    delta_p: float = 1.0 / 23.0
    delta_h: float = 1.0 / 23.0
    N_pop: float = 44_000.0

    def __post_init__(self) -> None:
        for name, value in self.__dict__.items():
            if value < 0:
                raise ValueError(f"{name} must be nonnegative, got {value}")
        if self.rho1 + self.rho2 > 1.0:
            raise ValueError("rho1 + rho2 must not exceed 1")


COVID_COMPARTMENTS = ("S", "E", "I", "P", "A", "H", "R", "F")


def _covid_rhs(t, x, p: CovidParams):
    s, e, i, pp, _a, hh, _r, _f = x
    force = (p.beta_inf * i + p.l * p.beta_inf * hh + p.beta_prime * pp) / p.N_pop
    new_exposed = force * s
    remove_ip = p.gamma_a + p.gamma_i
    return np.array(
        [
            -new_exposed,
            new_exposed - p.kappa * e,
            p.kappa * p.rho1 * e - remove_ip * i - p.delta_i * i,
            p.kappa * p.rho2 * e - remove_ip * pp - p.delta_p * pp,
            p.kappa * (1.0 - p.rho1 - p.rho2) * e,
            p.gamma_a * (i + pp) - p.gamma_r * hh - p.delta_h * hh,
            p.gamma_i * (i + pp) + p.gamma_r * hh,
            p.delta_i * i + p.delta_p * pp + p.delta_h * hh,
        ]
    )


def _covid_jac(t, x, p: CovidParams):
    s, _e, i, pp, _a, hh, _r, _f = x
    n = p.N_pop
    force = (p.beta_inf * i + p.l * p.beta_inf * hh + p.beta_prime * pp) / n
    jac = np.zeros((8, 8))
    # S and E share the infection terms with opposite signs
    ds = np.zeros(8)
    ds[0] = -force
    ds[2] = -p.beta_inf * s / n
    ds[3] = -p.beta_prime * s / n
    ds[5] = -p.l * p.beta_inf * s / n
    jac[0] = ds
    jac[1] = -ds
    jac[1, 1] = -p.kappa
    jac[2, 1] = p.kappa * p.rho1
    jac[2, 2] = -(p.gamma_a + p.gamma_i + p.delta_i)
    jac[3, 1] = p.kappa * p.rho2
    jac[3, 3] = -(p.gamma_a + p.gamma_i + p.delta_p)
    jac[4, 1] = p.kappa * (1.0 - p.rho1 - p.rho2)
    jac[5, 2] = jac[5, 3] = p.gamma_a
    jac[5, 5] = -(p.gamma_r + p.delta_h)
    jac[6, 2] = jac[6, 3] = p.gamma_i
    jac[6, 5] = p.gamma_r
    jac[7, 2] = p.delta_i
    jac[7, 3] = p.delta_p
    jac[7, 5] = p.delta_h
    return jac


def covid_model(params: Optional[CovidParams] = None) -> ModelSpec:
    """Eight-compartment Covid-19 model with super-spreaders.

    The default population seeds one symptomatic and five super-spreading
    cases into an otherwise susceptible population.
    """
    params = params or CovidParams()
    n = params.N_pop
    x0 = np.array([[n - 6.0, 0.0, 1.0, 5.0, 0.0, 0.0, 0.0, 0.0]])
    return ModelSpec(
        name="covid",
        rhs=_covid_rhs,
        jacobian=_covid_jac,
        default_params=params,
        default_x0=x0,
        default_beta=np.full(8, 0.85),
        default_t_span=(0.0, 120.0),
        labels=COVID_COMPARTMENTS,
    )


# --------------------------------------------------------------------------


def rmsd(y: Sequence[float], y_hat: Sequence[float]) -> float:
    """Root mean square deviation between two equally long series."""
    y = np.asarray(y, dtype=float).ravel()
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    if y.size != y_hat.size:
        raise LengthMismatch(f"series lengths differ: {y.size} vs {y_hat.size}")
    if y.size == 0:
        raise LengthMismatch("series are empty")
    return float(np.sqrt(np.mean((y_hat - y) ** 2)))


MODELS: dict[str, Callable[[], ModelSpec]] = {
    "nonstiff": nonstiff_model,
    "stiff": stiff_linear_model,
    "harmonic": harmonic_model,
    "sir": sir_model,
    "lv3": lv3_model,
    "glv": glv_microbial_model,
    "covid": covid_model,
}


def get_model(name: str) -> ModelSpec:
    try:
        factory = MODELS[name.lower()]
    except KeyError:
        raise UnknownModel(name) from None
    return factory()
