"""Adaptive Dormand-Prince 5(4) integration of the phase-space ODE.

A fixed embedded pair is implemented here (rather than delegating to a
library solver) so the step-control, dense-output and failure-reporting
contracts are fully pinned: identical inputs give bitwise-identical
trajectories, step underflow and budget exhaustion are first-class errors,
and the 4th-order interpolant is evaluated exactly on the requested output
grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .dynamics import FieldSpec, PhaseState, flat_field
from .errors import BudgetError, DivergenceError, InputError, StiffnessError

Vector = np.ndarray

# Dormand-Prince 5(4) tableau (Hairer-Norsett-Wanner, "Solving ODEs I").
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.array([
    [0, 0, 0, 0, 0, 0],
    [1 / 5, 0, 0, 0, 0, 0],
    [3 / 40, 9 / 40, 0, 0, 0, 0],
    [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
])
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# 5th-order minus embedded 4th-order weights (includes the FSAL stage).
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
               -17253 / 339200, 22 / 525, -1 / 40])
# Quartic interpolant coefficients of the pair (same convention as the
# published dense output: y(t + theta h) = y + h K^T P [theta..theta^4]).
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_BETA = 0.04          # PI controller memory exponent
_EXPO = 0.2 - 0.75 * _BETA


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-8
    atol: float = 1e-10
    h_init: float = 1e-3
    h_min: float = 1e-13
    h_max: float = float("inf")
    max_steps: int = 2_000_000

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise InputError("rtol and atol must be positive")
        if not 0 < self.h_min <= self.h_max:
            raise InputError("require 0 < h_min <= h_max")


@dataclass(frozen=True)
class StepStats:
    accepted: int
    rejected: int
    max_error_estimate: float


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: List[PhaseState]
    step_stats: StepStats

    def __len__(self) -> int:
        return len(self.states)


def log_grid(t_start: float, t_end: float, n: int) -> np.ndarray:
    """n log-spaced points including both endpoints."""
    if not (t_end > t_start > 0):
        raise InputError(f"need t_end > t_start > 0, got [{t_start}, {t_end}]")
    if n < 2:
        raise InputError(f"need n >= 2, got {n}")
    grid = np.geomspace(t_start, t_end, n)
    grid[0], grid[-1] = t_start, t_end
    return grid


def integrate_ode(rhs: Callable[[float, Vector], Vector], t_start: float,
                  t_end: float, y0: Vector, cfg: IntegratorConfig,
                  output_grid: Sequence[float]):
    """Core adaptive loop on flat vectors.

    Returns (grid, samples, stats) where samples[i] is the dense-output
    state at grid[i]. Raises StiffnessError / BudgetError / DivergenceError
    with the last good time and the partial samples attached.
    """
    grid = np.asarray(output_grid, dtype=float)
    if grid.size == 0 or grid[0] < t_start - 1e-12 or grid[-1] > t_end + 1e-12:
        raise InputError("output grid must be non-empty and inside [t_start, t_end]")
    if np.any(np.diff(grid) <= 0):
        raise InputError("output grid must be strictly increasing")
    y = np.asarray(y0, dtype=float).copy()
    if not np.all(np.isfinite(y)):
        raise InputError("non-finite initial state")

    t = t_start
    f = rhs(t, y)
    h = min(cfg.h_init, cfg.h_max, t_end - t_start)
    err_prev = 1e-4
    accepted = rejected = 0
    max_err = 0.0
    samples: List[Vector] = []
    gi = 0
    while gi < grid.size and grid[gi] <= t + 1e-14 * max(1.0, abs(t)):
        samples.append(y.copy())
        gi += 1

    K = np.empty((7, y.size))
    nsteps = 0
    while t < t_end:
        if nsteps >= cfg.max_steps:
            raise BudgetError(f"max_steps={cfg.max_steps} exhausted at t={t:.6g}",
                              t_last=t, partial=samples)
        nsteps += 1
        h = min(h, t_end - t)

        K[0] = f
        for i in range(1, 6):
            K[i] = rhs(t + _C[i] * h, y + h * (_A[i, :i] @ K[:i]))
        y_new = y + h * (_B @ K[:6])
        f_new = rhs(t + h, y_new)
        K[6] = f_new

        if not np.all(np.isfinite(y_new)):
            raise DivergenceError(f"non-finite state after step at t={t:.6g}",
                                  t_last=t, partial=samples)

        scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((h * (_E @ K) / scale) ** 2)))

        if err <= 1.0:
            # Dense output over the accepted step, then advance.
            if gi < grid.size and grid[gi] <= t + h:
                Q = K.T @ _P
                while gi < grid.size and grid[gi] <= t + h + 1e-14 * max(1.0, abs(t + h)):
                    theta = (grid[gi] - t) / h
                    powers = np.array([theta, theta**2, theta**3, theta**4])
                    samples.append(y + h * (Q @ powers))
                    gi += 1
            t += h
            y, f = y_new, f_new
            accepted += 1
            max_err = max(max_err, err)
            err_clip = max(err, 1e-10)
            factor = _SAFETY * err_clip ** (-_EXPO) * err_prev ** _BETA
            h *= min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
            err_prev = err_clip
        else:
            rejected += 1
            h *= max(_MIN_FACTOR, _SAFETY * err ** (-0.2))
        h = min(h, cfg.h_max)
        if h < cfg.h_min and t < t_end:
            raise StiffnessError(f"step underflow (h={h:.3e} < h_min) at t={t:.6g}",
                                 t_last=t, partial=samples)

    # Endpoint samples can be left pending by roundoff in the loop guard.
    while gi < grid.size:
        samples.append(y.copy())
        gi += 1
    return grid, samples, StepStats(accepted, rejected, max_err)


def integrate(fs: FieldSpec, t_start: float, t_end: float, Z0: PhaseState,
              cfg: Optional[IntegratorConfig] = None,
              output_grid: Optional[Sequence[float]] = None) -> Trajectory:
    """Integrate the phase-space system, sampling on output_grid."""
    if cfg is None:
        cfg = IntegratorConfig()
    if t_start < fs.schedule.t0:
        raise InputError(f"t_start={t_start} precedes schedule t0={fs.schedule.t0}")
    if output_grid is None:
        output_grid = log_grid(t_start, t_end, 200)
    rhs = flat_field(fs)
    try:
        grid, samples, stats = integrate_ode(rhs, t_start, t_end, Z0.flatten(),
                                             cfg, output_grid)
    except (StiffnessError, BudgetError, DivergenceError) as exc:
        if exc.partial is not None:
            n = len(exc.partial)
            exc.partial = Trajectory(
                times=np.asarray(output_grid, dtype=float)[:n],
                states=[PhaseState.from_flat(z, fs.problem) for z in exc.partial],
                step_stats=StepStats(0, 0, float("nan")),
            )
        raise
    states = [PhaseState.from_flat(z, fs.problem) for z in samples]
    return Trajectory(times=grid, states=states, step_stats=stats)
