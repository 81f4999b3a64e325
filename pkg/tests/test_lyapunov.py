import math

import numpy as np
import pytest

from inertial_alm.dynamics import FieldSpec, PhaseState
from inertial_alm.errors import ContractError, FitError, InputError
from inertial_alm.integrator import integrate, log_grid
from inertial_alm.lyapunov import (DiagnosticsRow, diagnostics,
                                   early_window_reference, energy, fit_rate,
                                   strong_convergence_check,
                                   velocity_bound_check)
from inertial_alm.problem import make_example1, solve_saddle_point_quadratic
from inertial_alm.schedules import (make_constant_alpha, make_custom_schedule,
                                    make_linear_alpha)


def synthetic_rows(values, times=None):
    times = np.geomspace(1.0, 20.0, len(values)) if times is None else times
    return [DiagnosticsRow(t=float(t), energy=0.0, v_norm=0.0,
                           lagrangian_gap=float(v), feasibility=float(v),
                           objective_error=0.0, velocity_norm=float(v),
                           distance_to_saddle=0.0, predicted=1.0,
                           primal_distance=0.0)
            for t, v in zip(times, values)]


@pytest.fixture(scope="module")
def saddle_setup():
    p = make_example1()
    sp = solve_saddle_point_quadratic(p)
    fs = FieldSpec(problem=p, schedule=make_linear_alpha(0.5))
    return fs, sp


def test_energy_zero_at_saddle(saddle_setup):
    fs, sp = saddle_setup
    Z = PhaseState(sp.x_star, sp.y_star, sp.lambda_star,
                   np.zeros(2), np.zeros(2), np.zeros(2))
    for t in (1.0, 5.0, 20.0):
        assert energy(fs, sp, t, Z) == pytest.approx(0.0, abs=1e-14)


def test_energy_positive_off_saddle(saddle_setup):
    fs, sp = saddle_setup
    rng = np.random.default_rng(4)
    for _ in range(10):
        Z = PhaseState.from_flat(rng.standard_normal(12), fs.problem)
        assert energy(fs, sp, 2.0, Z) > 0.0


def test_energy_hand_value(saddle_setup):
    """Velocity-only perturbation at the saddle isolates the mixed term:
    E = ||delta * w_dot||^2 / 2."""
    fs, sp = saddle_setup
    wd = np.array([1.0, -2.0, 0.5, 0.0, 3.0, 1.0])
    Z = PhaseState(sp.x_star, sp.y_star, sp.lambda_star, wd[:2], wd[2:4], wd[4:])
    t = 3.0
    d = fs.schedule.sigma(t) * fs.schedule.alpha(t)
    assert energy(fs, sp, t, Z) == pytest.approx(0.5 * d * d * float(wd @ wd))


def test_energy_rejects_negative_xi(saddle_setup):
    _, sp = saddle_setup
    bad = make_custom_schedule(gamma=lambda t: 0.5 / t, alpha=lambda t: t,
                               b=lambda t: 1.0, sigma=lambda t: 1.0, t0=1.0,
                               alpha_dot=lambda t: 1.0, sigma_dot=lambda t: 0.0,
                               b_dot=lambda t: 0.0)
    fs = FieldSpec(problem=make_example1(), schedule=bad)
    Z = PhaseState.zeros(make_example1())
    with pytest.raises(ContractError):
        energy(fs, sp, 2.0, Z)


def test_diagnostics_rows_align_with_trajectory(saddle_setup):
    fs, sp = saddle_setup
    Z0 = PhaseState.zeros(fs.problem)
    traj = integrate(fs, 1.0, 8.0, Z0, output_grid=log_grid(1.0, 8.0, 40))
    rows = diagnostics(fs, sp, traj)
    assert len(rows) == 40
    assert rows[0].t == 1.0 and rows[-1].t == 8.0
    assert rows[0].predicted == pytest.approx(1.0)
    for row in rows:
        assert row.objective_error >= -np.linalg.norm(sp.lambda_star) * row.feasibility - 1e-9
        assert row.energy >= 0.0


def test_fit_power_slope_exact():
    t = np.geomspace(1.0, 20.0, 120)
    rows = synthetic_rows(t ** -2.0, t)
    fit = fit_rate(rows, "lagrangian_gap", "power", (1.0, 20.0))
    assert fit.slope == pytest.approx(-2.0, abs=1e-6)
    assert fit.residual_rms <= 1e-10
    assert fit.n_clipped == 0


def test_fit_exponential_slope_exact():
    # constant alpha = 1 makes the exponential abscissa tau = t - t0
    s = make_constant_alpha(1.0)
    t = np.geomspace(1.0, 10.0, 80)
    rows = synthetic_rows(np.exp(-t), t)
    fit = fit_rate(rows, "lagrangian_gap", "exponential", (1.0, 10.0), schedule=s)
    assert fit.slope == pytest.approx(-1.0, abs=1e-9)


def test_fit_clips_tiny_values():
    t = np.geomspace(1.0, 20.0, 50)
    vals = t ** -2.0
    vals[-5:] = 1e-16
    fit = fit_rate(synthetic_rows(vals, t), "lagrangian_gap", "power", (1.0, 20.0))
    assert fit.n_clipped == 5
    assert fit.slope == pytest.approx(-2.0, abs=1e-6)


def test_fit_degenerate_when_all_clipped():
    t = np.geomspace(1.0, 20.0, 30)
    fit = fit_rate(synthetic_rows(np.zeros(30), t), "lagrangian_gap",
                   "power", (1.0, 20.0))
    assert fit.degenerate


def test_fit_errors():
    t = np.geomspace(1.0, 20.0, 30)
    rows = synthetic_rows(t ** -1.0, t)
    with pytest.raises(FitError):
        fit_rate(rows, "lagrangian_gap", "power", (19.0, 20.0))
    with pytest.raises(InputError):
        fit_rate(rows, "lagrangian_gap", "exponential", (1.0, 20.0))
    with pytest.raises(InputError):
        fit_rate(rows, "lagrangian_gap", "cubic", (1.0, 20.0))


def test_velocity_bound_and_early_reference():
    s = make_linear_alpha(1.0)
    t = np.linspace(1.0, 20.0, 20)
    rows = synthetic_rows(1.0 / t, t)  # velocity_norm = 1/t
    # velocity_norm * alpha * sigma = 1/t * t = 1 at every row
    assert velocity_bound_check(rows, s) == pytest.approx(1.0)
    assert early_window_reference(rows, s) == pytest.approx(1.0)


def test_strong_convergence_requires_modulus(saddle_setup):
    fs, sp = saddle_setup
    rows = synthetic_rows(np.ones(20))
    with pytest.raises(ContractError):
        strong_convergence_check(rows, fs.schedule, None, "power", (1.0, 20.0))
    with pytest.raises(ContractError):
        strong_convergence_check(rows, fs.schedule, 0.0, "power", (1.0, 20.0))


def test_strong_convergence_degenerate_from_saddle(saddle_setup):
    fs, sp = saddle_setup
    Z0 = PhaseState(sp.x_star, sp.y_star, sp.lambda_star,
                    np.zeros(2), np.zeros(2), np.zeros(2))
    traj = integrate(fs, 1.0, 5.0, Z0, output_grid=log_grid(1.0, 5.0, 30))
    rows = diagnostics(fs, sp, traj)
    fit = strong_convergence_check(rows, fs.schedule,
                                   fs.problem.strong_convexity, "power", (1.0, 5.0))
    assert fit.degenerate
