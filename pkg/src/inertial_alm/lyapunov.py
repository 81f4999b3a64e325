"""Lyapunov energy, per-trajectory diagnostics and rate fitting.

The energy combines the weighted augmented-Lagrangian gap at the oracle
multiplier, the mixed position-velocity quadratic and the anchor term.
Convergence-rate claims are verified empirically as least-squares slope
fits of log(quantity) against log t (power model) or against the
closed-form integral of 1/alpha (exponential model).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dynamics import FieldSpec, PhaseState
from .errors import ContractError, FitError, InputError
from .integrator import Trajectory
from .problem import SaddlePoint, aug_lagrangian, lagrangian
from .schedules import Schedule, delta, predicted_rate, xi

CLIP_FLOOR = 1e-15

MODEL_POWER = "power"
MODEL_EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class DiagnosticsRow:
    t: float
    energy: float
    v_norm: float
    lagrangian_gap: float
    feasibility: float
    objective_error: float
    velocity_norm: float
    distance_to_saddle: float
    predicted: float
    # Extra diagnostic (not part of the CSV schema): primal-only distance,
    # used by the strong-convergence check.
    primal_distance: float = 0.0


@dataclass(frozen=True)
class RateFit:
    quantity: str
    model: str
    slope: float
    intercept: float
    residual_rms: float
    window: Tuple[float, float]
    n_used: int
    n_clipped: int
    degenerate: bool = False


def energy(fs: FieldSpec, sp: SaddlePoint, t: float, Z: PhaseState) -> float:
    """delta^2 b * augmented-Lagrangian gap + ||v||^2/2 + xi ||w - w*||^2 / 2."""
    s = fs.schedule
    x = xi(s, t)
    if x < -1e-12:
        raise ContractError(f"xi(t)={x:.3e} < 0 at t={t}: schedule violates G1")
    d = delta(s, t)
    gap_mu = (aug_lagrangian(fs.problem, Z.x, Z.y, sp.lambda_star)
              - aug_lagrangian(fs.problem, sp.x_star, sp.y_star, sp.lambda_star))
    dw = Z.w - sp.w_star
    v = s.sigma(t) * dw + d * Z.w_dot
    return d * d * fs.schedule.b(t) * gap_mu + 0.5 * float(v @ v) + 0.5 * x * float(dw @ dw)


def diagnostics(fs: FieldSpec, sp: SaddlePoint, traj: Trajectory) -> List[DiagnosticsRow]:
    """One row per trajectory sample."""
    p = fs.problem
    s = fs.schedule
    l_star = lagrangian(p, sp.x_star, sp.y_star, sp.lambda_star)
    rows = []
    for t, Z in zip(traj.times, traj.states):
        t = float(t)
        r = p.residual(Z.x, Z.y)
        dw = Z.w - sp.w_star
        d = delta(s, t)
        v = s.sigma(t) * dw + d * Z.w_dot
        obj = p.objective(Z.x, Z.y)
        primal = math.hypot(float(np.linalg.norm(Z.x - sp.x_star)),
                            float(np.linalg.norm(Z.y - sp.y_star)))
        rows.append(DiagnosticsRow(
            t=t,
            energy=energy(fs, sp, t, Z),
            v_norm=float(np.linalg.norm(v)),
            lagrangian_gap=obj + float(sp.lambda_star @ r) - l_star,
            feasibility=float(np.linalg.norm(r)),
            objective_error=obj - sp.F_star,
            velocity_norm=float(np.linalg.norm(Z.w_dot)),
            distance_to_saddle=float(np.linalg.norm(dw)),
            predicted=predicted_rate(s, t),
            primal_distance=primal,
        ))
    return rows


def _values(rows: Sequence[DiagnosticsRow], quantity: str) -> np.ndarray:
    return np.array([getattr(row, quantity) for row in rows], dtype=float)


def fit_rate(rows: Sequence[DiagnosticsRow], quantity: str, model: str,
             window: Tuple[float, float],
             schedule: Optional[Schedule] = None) -> RateFit:
    """Least-squares slope of log(quantity) on the chosen abscissa.

    Power model: abscissa log t. Exponential model: abscissa the integral
    of 1/alpha (requires the schedule). Values at or below the clip floor
    are discarded and counted.
    """
    return _fit_series(_values(rows, "t"), _values(rows, quantity),
                       quantity, model, window, schedule)


def _fit_series(times: np.ndarray, vals: np.ndarray, quantity: str, model: str,
                window: Tuple[float, float],
                schedule: Optional[Schedule]) -> RateFit:
    t_lo, t_hi = window
    in_window = (times >= t_lo) & (times <= t_hi)
    usable = in_window & (vals > CLIP_FLOOR)
    n_clipped = int(np.count_nonzero(in_window) - np.count_nonzero(usable))

    if np.count_nonzero(in_window) >= 10 and np.all(vals[in_window] <= CLIP_FLOOR):
        return RateFit(quantity, model, 0.0, 0.0, 0.0, window,
                       0, n_clipped, degenerate=True)
    if np.count_nonzero(usable) < 10:
        raise FitError(f"only {np.count_nonzero(usable)} usable samples for "
                       f"{quantity} on window [{t_lo}, {t_hi}]")

    ts = times[usable]
    logv = np.log(vals[usable])
    if model == MODEL_POWER:
        abscissa = np.log(ts)
    elif model == MODEL_EXPONENTIAL:
        if schedule is None:
            raise InputError("exponential model needs the schedule for its abscissa")
        abscissa = np.array([schedule.inv_alpha_integral_at(t) for t in ts])
    else:
        raise InputError(f"unknown model {model!r}")

    coeffs = np.polyfit(abscissa, logv, 1)
    slope, intercept = float(coeffs[0]), float(coeffs[1])
    resid = logv - (slope * abscissa + intercept)
    return RateFit(quantity, model, slope, intercept,
                   float(np.sqrt(np.mean(resid ** 2))), window,
                   int(np.count_nonzero(usable)), n_clipped)


def velocity_bound_check(rows: Sequence[DiagnosticsRow], schedule: Schedule) -> float:
    """max over rows of velocity_norm * alpha(t) * sigma(t)."""
    return max(row.velocity_norm * schedule.alpha(row.t) * schedule.sigma(row.t)
               for row in rows)


def early_window_reference(rows: Sequence[DiagnosticsRow], schedule: Schedule,
                           fraction: float = 0.25) -> float:
    """Reference scale for boundedness checks: the weighted velocity max
    over the first `fraction` of samples (deterministic transient cut)."""
    k = max(1, int(len(rows) * fraction))
    return velocity_bound_check(rows[:k], schedule)


def strong_convergence_check(rows: Sequence[DiagnosticsRow], schedule: Schedule,
                             modulus: float, model: str,
                             window: Tuple[float, float]) -> RateFit:
    """Fit the decay of the squared primal distance against the predicted
    rate; only valid for strongly convex objectives (modulus > 0)."""
    if modulus is None or modulus <= 0:
        raise ContractError("strong convergence check needs a positive convexity modulus")
    return _fit_series(_values(rows, "t"), _values(rows, "primal_distance") ** 2,
                       "primal_distance_sq", model, window, schedule)
