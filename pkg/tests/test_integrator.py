import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inertial_alm.dynamics import FieldSpec, PhaseState
from inertial_alm.errors import (BudgetError, DivergenceError, InputError,
                                 StiffnessError)
from inertial_alm.integrator import (IntegratorConfig, Trajectory,
                                     integrate, integrate_ode, log_grid)
from inertial_alm.problem import make_example1, solve_saddle_point_quadratic
from inertial_alm.schedules import make_linear_alpha


def damped_oscillator(t, y):
    # closed form below: y'' + 2 zeta w y' + w^2 y = 0
    w, zeta = 4.0, 0.25
    return np.array([y[1], -2 * zeta * w * y[1] - w * w * y[0]])


def damped_oscillator_exact(t):
    w, zeta = 4.0, 0.25
    wd = w * math.sqrt(1 - zeta * zeta)
    # y(0) = 1, y'(0) = 0
    return math.exp(-zeta * w * t) * (math.cos(wd * t)
                                      + zeta * w / wd * math.sin(wd * t))


def test_log_grid_endpoints():
    g = log_grid(1.0, 20.0, 200)
    assert g.size == 200
    assert g[0] == 1.0 and g[-1] == 20.0
    with pytest.raises(InputError):
        log_grid(1.0, 20.0, 1)
    with pytest.raises(InputError):
        log_grid(5.0, 2.0, 10)


@given(st.floats(0.01, 100.0), st.floats(1.1, 50.0), st.integers(2, 400))
@settings(max_examples=80, deadline=None)
def test_log_grid_strictly_increasing(t0, ratio, n):
    g = log_grid(t0, t0 * ratio, n)
    assert g.size == n
    assert np.all(np.diff(g) > 0)
    assert g[0] == t0 and g[-1] == t0 * ratio


def test_exponential_decay_accuracy():
    rhs = lambda t, y: -y
    grid = np.linspace(0.0, 5.0, 11)
    _, samples, stats = integrate_ode(rhs, 0.0, 5.0, np.array([1.0]),
                                      IntegratorConfig(), grid)
    for t, y in zip(grid, samples):
        assert y[0] == pytest.approx(math.exp(-t), abs=1e-8)
    assert stats.rejected <= stats.accepted


def test_dense_output_matches_closed_form_between_steps():
    # a fine output grid forces interpolation inside accepted steps
    grid = np.linspace(0.0, 3.0, 257)
    cfg = IntegratorConfig(rtol=1e-9, atol=1e-11)
    _, samples, _ = integrate_ode(damped_oscillator, 0.0, 3.0,
                                  np.array([1.0, 0.0]), cfg, grid)
    worst = max(abs(y[0] - damped_oscillator_exact(t))
                for t, y in zip(grid, samples))
    assert worst <= 1e-7


def test_tolerance_controls_error():
    grid = np.array([0.0, 3.0])
    errs = []
    for tol in (1e-5, 1e-7, 1e-9):
        cfg = IntegratorConfig(rtol=tol, atol=tol * 1e-2)
        _, samples, _ = integrate_ode(damped_oscillator, 0.0, 3.0,
                                      np.array([1.0, 0.0]), cfg, grid)
        errs.append(abs(samples[-1][0] - damped_oscillator_exact(3.0)))
    assert errs[0] > errs[1] > errs[2]


def test_budget_error_carries_partial_samples():
    rhs = lambda t, y: -y
    cfg = IntegratorConfig(max_steps=5, h_init=1e-3)
    grid = np.linspace(0.0, 10.0, 100)
    with pytest.raises(BudgetError) as exc:
        integrate_ode(rhs, 0.0, 10.0, np.array([1.0]), cfg, grid)
    assert exc.value.t_last is not None and exc.value.t_last < 10.0
    assert exc.value.partial is not None


def test_stiffness_error_on_step_underflow():
    # a right-hand side whose error estimate never accepts forces h below h_min
    rng = np.random.default_rng(1)
    rhs = lambda t, y: rng.standard_normal(1) * 1e6
    cfg = IntegratorConfig(h_min=1e-6, rtol=1e-12, atol=1e-14)
    with pytest.raises(StiffnessError):
        integrate_ode(rhs, 0.0, 1.0, np.array([1.0]), cfg,
                      np.array([0.0, 1.0]))


def test_divergence_error_on_nonfinite_state():
    rhs = lambda t, y: np.array([float("nan")])
    with pytest.raises(DivergenceError):
        integrate_ode(rhs, 0.0, 1.0, np.array([1.0]), IntegratorConfig(),
                      np.array([0.0, 1.0]))


def test_config_validation():
    with pytest.raises(InputError):
        IntegratorConfig(rtol=-1.0)
    with pytest.raises(InputError):
        IntegratorConfig(h_min=1.0, h_max=0.1)
    with pytest.raises(InputError):
        integrate_ode(lambda t, y: -y, 0.0, 1.0, np.array([float("inf")]),
                      IntegratorConfig(), np.array([0.0, 1.0]))
    with pytest.raises(InputError):
        integrate_ode(lambda t, y: -y, 0.0, 1.0, np.array([1.0]),
                      IntegratorConfig(), np.array([0.5, 0.2]))


def test_phase_space_wrapper_round_trip():
    p = make_example1()
    sp = solve_saddle_point_quadratic(p)
    fs = FieldSpec(problem=p, schedule=make_linear_alpha(0.5))
    Z0 = PhaseState(sp.x_star, sp.y_star, sp.lambda_star,
                    np.zeros(2), np.zeros(2), np.zeros(2))
    traj = integrate(fs, 1.0, 5.0, Z0, output_grid=log_grid(1.0, 5.0, 20))
    assert isinstance(traj, Trajectory)
    assert len(traj) == 20
    # the saddle is an equilibrium: the state never moves
    for state in traj.states:
        assert np.linalg.norm(state.flatten() - Z0.flatten()) <= 1e-9


def test_integrate_rejects_start_before_schedule():
    fs = FieldSpec(problem=make_example1(), schedule=make_linear_alpha(0.5, t0=2.0))
    with pytest.raises(InputError):
        integrate(fs, 1.0, 5.0, PhaseState.zeros(make_example1()))
