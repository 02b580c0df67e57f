from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracsolve.core import SolverConfig, validate_problem
from fracsolve.errors import DomainError, LengthMismatch, NoExactSolution, UnknownModel
from fracsolve.models import (
    MODELS,
    CovidParams,
    covid_model,
    get_model,
    glv_microbial_model,
    harmonic_model,
    lv3_model,
    nonstiff_model,
    rmsd,
    sir_model,
    stiff_linear_model,
)
from fracsolve.solvers import solve
from fracsolve.special import mittag_leffler

# 9/4 * Gamma(3/2), symbolic evaluation
NONSTIFF_RHS_AT_ORIGIN = 1.9940105822687055307
ML_STIFF_AT_5 = 0.006224922986745356653787288


def _rhs(model, t, x, params=None):
    p = model.problem(params=params)
    return p.eval_rhs(t, np.asarray(x, dtype=float))


def _numeric_jacobian(model, t, x, params=None, eps=1e-6):
    x = np.asarray(x, dtype=float)
    jac = np.empty((x.size, x.size))
    for k in range(x.size):
        dx = np.zeros_like(x)
        dx[k] = eps * max(1.0, abs(x[k]))
        jac[:, k] = (_rhs(model, t, x + dx, params) - _rhs(model, t, x - dx, params)) / (
            2 * dx[k]
        )
    return jac


@pytest.mark.parametrize("name", sorted(MODELS))
def test_defaults_validate(name):
    model = get_model(name)
    validate_problem(model.problem())


@pytest.mark.parametrize("name", ["nonstiff", "stiff", "harmonic"])
def test_exact_solution_starts_at_initial_value(name):
    model = get_model(name)
    problem = model.problem()
    t0 = problem.t_span[0]
    assert model.exact_solution(np.array([t0]), problem)[0].tolist() == problem.x0[0].tolist()


POINTS = {
    "nonstiff": [0.3],
    "stiff": [0.7],
    "harmonic": [1.3],
    "sir": [0.6, 0.3, 0.1],
    "lv3": [0.8, 1.2, 0.5],
    "glv": [0.5, 0.2, 0.3],
    "covid": [30000.0, 500.0, 200.0, 50.0, 100.0, 80.0, 3000.0, 20.0],
}


@pytest.mark.parametrize("name", sorted(MODELS))
def test_analytic_jacobian_matches_differences(name):
    model = get_model(name)
    x = np.array(POINTS[name])
    analytic = model.problem().eval_jacobian(1.0, x)
    np.testing.assert_allclose(analytic, _numeric_jacobian(model, 1.0, x), rtol=1e-6, atol=1e-8)


def test_nonstiff_model():
    m = nonstiff_model()
    p = m.problem()
    assert m.exact_solution(np.array([0.0, 1.0]), p)[:, 0].tolist() == [0.0, 0.25]
    assert _rhs(m, 0.0, [0.0])[0] == pytest.approx(NONSTIFF_RHS_AT_ORIGIN, rel=1e-14)
    assert m.problem().eval_jacobian(0.0, np.array([4.0]))[0, 0] == -3.0
    with pytest.raises(DomainError):
        _rhs(m, 0.5, [-0.1])


def test_nonstiff_order_override_rebinds_parameters():
    p = nonstiff_model().problem(beta=0.7)
    assert p.params == 0.7
    t = np.array([0.5])
    assert nonstiff_model().exact_solution(t, p)[0, 0] == pytest.approx(
        0.5**8 - 3 * 0.5**4.35 + 2.25 * 0.5**0.7
    )


def test_stiff_model():
    m = stiff_linear_model()
    p = m.problem()
    assert m.exact_solution(np.array([0.0]), p)[0, 0] == 1.0
    assert _rhs(m, 1.0, [2.0])[0] == -20.0
    assert m.exact_solution(np.array([5.0]), p)[0, 0] == pytest.approx(ML_STIFF_AT_5, rel=1e-10)
    assert m.exact_solution(np.array([5.0]), p)[0, 0] == mittag_leffler(0.8, -10 * 5**0.8)
    assert stiff_linear_model(-2.0).default_params == -2.0


def test_harmonic_model():
    m = harmonic_model()
    p = m.problem()
    assert m.exact_solution(np.array([0.0, math.pi / 2]), p)[:, 0] == pytest.approx([1.0, -1.0])
    assert _rhs(m, 0.0, [3.0])[0] == -12.0
    with pytest.raises(NoExactSolution):
        m.exact_solution(np.array([1.0]), m.problem(beta=1.8))


def test_sir_model():
    m = sir_model()
    assert _rhs(m, 0.0, [0.9, 0.0, 0.1]).tolist() == [0.0, 0.0, 0.0]
    np.testing.assert_allclose(_rhs(m, 0.0, [0.9, 0.1, 0.0]), [-0.036, 0.032, 0.004], atol=1e-15)
    np.testing.assert_allclose(
        m.problem().eval_jacobian(0.0, np.array([0.9, 0.1, 0.0])),
        [[-0.04, -0.36, 0], [0.04, 0.32, 0], [0, 0.04, 0]],
        atol=1e-15,
    )


def test_sir_monotone_compartments():
    sol = solve(sir_model().problem(), SolverConfig(h=2**-6))
    s, r = sol.x[:, 0], sol.x[:, 2]
    assert np.all(np.diff(s) <= 0) and np.all(np.diff(r) >= 0)


def test_lv3_model():
    m = lv3_model()
    assert _rhs(m, 0.0, [0, 0, 0]).tolist() == [0, 0, 0]
    assert _rhs(m, 0.0, [1, 1, 1]).tolist() == [-2.0, 3.0, 4.0]
    assert m.problem().eval_jacobian(0.0, np.ones(3))[1, 0] == 5.0


def test_glv_model():
    m = glv_microbial_model()
    assert _rhs(m, 0.0, [0, 0, 0]).tolist() == [0, 0, 0]
    single = glv_microbial_model(1)
    x = 0.3
    assert _rhs(single, 0.0, [x])[0] == pytest.approx(x * (1.0 - x))


def test_glv_inhibition_is_absent_without_competitors():
    m = glv_microbial_model()
    x = np.array([0.4, 0.0, 0.0])
    # f_1 = 1, so species 1 grows logistically
    assert _rhs(m, 0.0, x)[0] == pytest.approx(0.4 * (1.0 - 0.4))


def test_glv_pulse_schedule():
    m = glv_microbial_model()
    params = m.default_params.with_pulse(2.0, 4.0, (0.5, 0.95, 2.0))
    assert params.growth_at(1.9).tolist() == [1.0, 0.95, 1.05]
    assert params.growth_at(2.0).tolist() == [0.5, 0.95, 2.0]
    assert params.growth_at(4.0).tolist() == [1.0, 0.95, 1.05]
    x = np.full(3, 0.2)
    before = _rhs(m, 1.0, x, params)
    during = _rhs(m, 3.0, x, params)
    assert during[0] < before[0] and during[2] > before[2]


@given(st.lists(st.floats(min_value=0, max_value=1e5), min_size=8, max_size=8))
@settings(max_examples=50, deadline=None)
def test_covid_compartments_are_conserved(state):
    total = _rhs(covid_model(), 0.0, state).sum()
    scale = max(1.0, np.abs(_rhs(covid_model(), 0.0, state)).max())
    assert abs(total) <= 1e-12 * scale


def test_covid_disease_free_state_is_fixed():
    state = [44_000.0, 0, 0, 0, 0, 0, 0, 0]
    assert not _rhs(covid_model(), 0.0, state).any()


def test_covid_exposed_equation():
    n = 1000.0
    params = CovidParams(beta_inf=1.0, N_pop=n)
    e = 7.0
    state = [n, e, n, 0, 0, 0, 0, 0]
    assert _rhs(covid_model(params), 0.0, state, params)[1] == pytest.approx(n - params.kappa * e)


def test_covid_params_validation():
    assert CovidParams().kappa == 0.25
    with pytest.raises(ValueError):
        CovidParams(rho1=0.7, rho2=0.4)
    with pytest.raises(ValueError):
        CovidParams(gamma_a=-1.0)


@pytest.mark.parametrize(
    "y, y_hat, expected",
    [([1, 2, 3], [1, 2, 3], 0.0), ([0, 0], [3, 4], math.sqrt(12.5)), ([1], [4], 3.0)],
)
def test_rmsd(y, y_hat, expected):
    assert rmsd(y, y_hat) == pytest.approx(expected)
    assert rmsd(y_hat, y) == rmsd(y, y_hat)


def test_rmsd_length_mismatch():
    with pytest.raises(LengthMismatch):
        rmsd([1, 2], [1])
    with pytest.raises(LengthMismatch):
        rmsd([], [])


def test_parameter_overrides():
    sir = sir_model()
    assert sir.override_params({"gamma": 0.1}) == (0.4, 0.1)
    assert stiff_linear_model().override_params({"lambda": -3}) == -3.0
    assert covid_model().override_params({"kappa": 2.55}).kappa == 2.55
    with pytest.raises(KeyError):
        sir.override_params({"delta": 1.0})


def test_unknown_model():
    with pytest.raises(UnknownModel, match="unknown model"):
        get_model("seirs")
