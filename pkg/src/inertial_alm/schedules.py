"""Time-dependent coefficient schedules and their certification.

A schedule bundles the damping gamma(t), extrapolation alpha(t), time
scaling b(t) and the Lyapunov weight sigma(t), with analytic first
derivatives. Three closed-form families are provided (constant, linear and
power-law alpha); custom schedules fall back to finite-difference
derivatives with a degraded-precision note in the condition report.

Condition checking is a sampled certification on a log grid, not a
symbolic proof. Inequality conditions report the worst violation (<= tol
passes); the time-scaling equality reports the worst relative residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np
from scipy.integrate import quad

from .errors import InputError

ScalarFn = Callable[[float], float]

DEFAULT_ETA = 1.1

FAMILY_CONSTANT = "constant_alpha"
FAMILY_LINEAR = "linear_alpha"
FAMILY_POWER = "power_alpha"
FAMILY_CUSTOM = "custom"


@dataclass(frozen=True)
class Schedule:
    gamma: ScalarFn
    alpha: ScalarFn
    b: ScalarFn
    sigma: ScalarFn
    alpha_dot: ScalarFn
    sigma_dot: ScalarFn
    b_dot: ScalarFn
    t0: float
    family_tag: str = FAMILY_CUSTOM
    eta: Optional[float] = None
    # gamma*alpha - alpha_dot, supplied in closed form by the named families
    # so cancellation cannot pollute the condition residuals.
    balance: Optional[ScalarFn] = None
    # log b(t) and d/dt log b(t): keep condition checks finite when b
    # overflows a double (exponential families on wide grids).
    log_b: Optional[ScalarFn] = None
    b_log_derivative: Optional[ScalarFn] = None
    # integral of 1/alpha over [t0, t]; closed form for the named families.
    inv_alpha_integral: Optional[ScalarFn] = None
    fd_derivatives: bool = False

    def balance_at(self, t: float) -> float:
        if self.balance is not None:
            return self.balance(t)
        return self.gamma(t) * self.alpha(t) - self.alpha_dot(t)

    def log_b_at(self, t: float) -> float:
        if self.log_b is not None:
            return self.log_b(t)
        return math.log(self.b(t))

    def b_log_derivative_at(self, t: float) -> float:
        if self.b_log_derivative is not None:
            return self.b_log_derivative(t)
        return self.b_dot(t) / self.b(t)

    def inv_alpha_integral_at(self, t: float) -> float:
        if self.inv_alpha_integral is not None:
            return self.inv_alpha_integral(t)
        val, _ = quad(lambda s: 1.0 / self.alpha(s), self.t0, t, limit=200)
        return val


def delta(s: Schedule, t: float) -> float:
    """Velocity weight of the Lyapunov mixed term: sigma * alpha."""
    return s.sigma(t) * s.alpha(t)


def xi(s: Schedule, t: float) -> float:
    """Anchor-term weight: sigma^2 (gamma alpha - alpha_dot - 1) - 2 alpha sigma sigma_dot."""
    sig = s.sigma(t)
    return sig * sig * (s.balance_at(t) - 1.0) - 2.0 * s.alpha(t) * sig * s.sigma_dot(t)


# --- Named families ------------------------------------------------------


def make_constant_alpha(alpha0: float, eta: float = DEFAULT_ETA,
                        sigma0: float = 1.0, t0: float = 1.0) -> Schedule:
    """alpha = alpha0, gamma = eta/alpha0, b(t) = exp(t/alpha0), sigma = sigma0."""
    if alpha0 <= 0:
        raise InputError(f"alpha0 must be positive, got {alpha0}")
    _check_eta_sigma(eta, sigma0)
    return Schedule(
        gamma=lambda t: eta / alpha0,
        alpha=lambda t: alpha0,
        b=lambda t: math.exp(t / alpha0),
        sigma=lambda t: sigma0,
        alpha_dot=lambda t: 0.0,
        sigma_dot=lambda t: 0.0,
        b_dot=lambda t: math.exp(t / alpha0) / alpha0,
        t0=t0,
        family_tag=FAMILY_CONSTANT,
        eta=eta,
        balance=lambda t: eta,
        log_b=lambda t: t / alpha0,
        b_log_derivative=lambda t: 1.0 / alpha0,
        inv_alpha_integral=lambda t: (t - t0) / alpha0,
    )


def make_linear_alpha(alpha0: float, eta: float = DEFAULT_ETA,
                      sigma0: float = 1.0, t0: float = 1.0) -> Schedule:
    """alpha = alpha0 t, gamma = (eta+alpha0)/(alpha0 t), b = t^(1/alpha0 - 2)."""
    if alpha0 <= 0:
        raise InputError(f"alpha0 must be positive, got {alpha0}")
    _check_eta_sigma(eta, sigma0)
    p = 1.0 / alpha0 - 2.0
    return Schedule(
        gamma=lambda t: (eta + alpha0) / (alpha0 * t),
        alpha=lambda t: alpha0 * t,
        b=lambda t: t ** p,
        sigma=lambda t: sigma0,
        alpha_dot=lambda t: alpha0,
        sigma_dot=lambda t: 0.0,
        b_dot=lambda t: p * t ** (p - 1.0),
        t0=t0,
        family_tag=FAMILY_LINEAR,
        eta=eta,
        balance=lambda t: eta,
        log_b=lambda t: p * math.log(t),
        b_log_derivative=lambda t: p / t,
        inv_alpha_integral=lambda t: math.log(t / t0) / alpha0,
    )


def make_power_alpha(r: float, eta: float = DEFAULT_ETA,
                     sigma0: float = 1.0, t0: float = 1.0) -> Schedule:
    """alpha = t^r (0 < r < 1), gamma = eta/t^r + r/t,
    b = t^(-2r) exp(t^(1-r)/(1-r))."""
    if not 0.0 < r < 1.0:
        raise InputError(f"r must lie in (0, 1), got {r}")
    _check_eta_sigma(eta, sigma0)

    def b(t):
        return math.exp(t ** (1.0 - r) / (1.0 - r)) * t ** (-2.0 * r)

    return Schedule(
        gamma=lambda t: eta / t ** r + r / t,
        alpha=lambda t: t ** r,
        b=b,
        sigma=lambda t: sigma0,
        alpha_dot=lambda t: r * t ** (r - 1.0),
        sigma_dot=lambda t: 0.0,
        b_dot=lambda t: b(t) * (t ** (-r) - 2.0 * r / t),
        t0=t0,
        family_tag=FAMILY_POWER,
        eta=eta,
        balance=lambda t: eta,
        log_b=lambda t: t ** (1.0 - r) / (1.0 - r) - 2.0 * r * math.log(t),
        b_log_derivative=lambda t: t ** (-r) - 2.0 * r / t,
        inv_alpha_integral=lambda t: (t ** (1.0 - r) - t0 ** (1.0 - r)) / (1.0 - r),
    )


def make_custom_schedule(gamma: ScalarFn, alpha: ScalarFn, b: ScalarFn,
                         sigma: ScalarFn, t0: float,
                         alpha_dot: Optional[ScalarFn] = None,
                         sigma_dot: Optional[ScalarFn] = None,
                         b_dot: Optional[ScalarFn] = None) -> Schedule:
    """Wrap user callables; missing derivatives fall back to central
    differences (step max(1e-6, 1e-6 t)) and flag degraded precision."""
    fd = alpha_dot is None or sigma_dot is None or b_dot is None
    return Schedule(
        gamma=gamma, alpha=alpha, b=b, sigma=sigma,
        alpha_dot=alpha_dot or _fd(alpha),
        sigma_dot=sigma_dot or _fd(sigma),
        b_dot=b_dot or _fd(b),
        t0=t0,
        family_tag=FAMILY_CUSTOM,
        fd_derivatives=fd,
    )


def _check_eta_sigma(eta: float, sigma0: float) -> None:
    if eta <= 1.0:
        raise InputError(f"eta must exceed 1, got {eta}")
    if sigma0 <= 0:
        raise InputError(f"sigma0 must be positive, got {sigma0}")


def _fd(fn: ScalarFn) -> ScalarFn:
    def dot(t, fn=fn):
        h = max(1e-6, 1e-6 * t)
        return (fn(t + h) - fn(t - h)) / (2.0 * h)
    return dot


# --- Condition certification ---------------------------------------------

CONDITION_NAMES = ("G1", "G1+", "G2", "G3", "G4", "G4+", "G5")


@dataclass(frozen=True)
class ConditionCheck:
    residual: float   # worst violation (inequalities) or |relative residual| (G4)
    passed: bool
    worst_t: float
    undetermined: bool = False


@dataclass(frozen=True)
class ConditionReport:
    checks: Dict[str, ConditionCheck]
    grid: np.ndarray
    degraded_precision: bool = False

    def __getitem__(self, name: str) -> ConditionCheck:
        return self.checks[name]

    def all_passed(self, names=("G1+", "G2", "G3", "G4", "G5")) -> bool:
        return all(self.checks[n].passed for n in names)


def default_grid(s: Schedule, n: int = 200, span: float = 100.0) -> np.ndarray:
    return np.geomspace(s.t0, span * s.t0, n)


def check_conditions(s: Schedule, grid: Optional[np.ndarray] = None,
                     tol: float = 1e-12, tol_equality: float = 1e-9) -> ConditionReport:
    """Evaluate the coefficient conditions at every grid point.

    Inequality conditions store the maximal violation (<= tol passes);
    the time-scaling equality G4 stores the maximal relative residual
    (<= tol_equality passes). Worst offenders are reported at the smallest
    offending t on ties.
    """
    if grid is None:
        grid = default_grid(s)
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2 or np.any(grid < s.t0):
        raise InputError("grid must contain >= 2 points inside [t0, inf)")

    def g1_inner(t):
        sig = s.sigma(t)
        return sig * (s.balance_at(t) - 1.0) - 2.0 * s.alpha(t) * s.sigma_dot(t)

    def g2_lhs(t):
        sig = s.sigma(t)
        return sig * (s.balance_at(t) - 1.0) - s.alpha(t) * s.sigma_dot(t)

    def g3_inner(t):
        sig = s.sigma(t)
        return sig * (sig * s.balance_at(t) - 2.0 * s.alpha(t) * s.sigma_dot(t))

    def g3_lhs(t):
        h = max(1e-6, 1e-6 * t)
        return -(g3_inner(t + h) - g3_inner(t - h)) / (2.0 * h)

    def g4_relative(t):
        # 1 - d/dt(alpha^2 sigma^2 b) / (alpha sigma^2 b), assembled from
        # logarithmic derivatives so b never overflows.
        sig = s.sigma(t)
        a = s.alpha(t)
        return 1.0 - (2.0 * s.alpha_dot(t)
                      + 2.0 * a * s.sigma_dot(t) / sig
                      + a * s.b_log_derivative_at(t))

    checks: Dict[str, ConditionCheck] = {}
    checks["G1"] = _worst_violation(grid, lambda t: -g1_inner(t), tol)
    checks["G1+"] = _worst_violation(grid, lambda t: -(s.sigma(t) * g1_inner(t)), tol)
    checks["G2"] = _worst_violation(grid, lambda t: -g2_lhs(t), tol)
    checks["G3"] = _worst_violation(grid, lambda t: -g3_lhs(t), tol)
    checks["G4"] = _worst_violation(grid, lambda t: abs(g4_relative(t)), tol_equality)
    checks["G4+"] = _worst_violation(grid, lambda t: g4_relative(t), tol)
    checks["G5"] = _worst_violation(grid, lambda t: -s.alpha(t), tol)
    return ConditionReport(checks=checks, grid=grid, degraded_precision=s.fd_derivatives)


def _worst_violation(grid: np.ndarray, violation: ScalarFn, tol: float) -> ConditionCheck:
    worst = -math.inf
    worst_t = grid[0]
    for t in grid:
        try:
            val = violation(float(t))
        except (ArithmeticError, ValueError):
            return ConditionCheck(math.nan, False, float(t), undetermined=True)
        if not math.isfinite(val):
            return ConditionCheck(math.nan, False, float(t), undetermined=True)
        if val > worst:
            worst = val
            worst_t = float(t)
    return ConditionCheck(worst, worst <= tol, worst_t)


# --- Derived rate quantities ---------------------------------------------


def log_rate_factor(s: Schedule, t: float) -> float:
    """log of a(t)/a(t0) with a = alpha^2 sigma^2 b."""
    def la(u):
        return 2.0 * math.log(s.alpha(u)) + 2.0 * math.log(s.sigma(u)) + s.log_b_at(u)
    return la(t) - la(s.t0)


def scaling_identity_residual(s: Schedule, t: float) -> float:
    """Relative mismatch between a(t)/a(t0) and exp(integral of 1/alpha),
    evaluated in log space so exponential growth stays finite."""
    return abs(-math.expm1(s.inv_alpha_integral_at(t) - log_rate_factor(s, t)))


def predicted_rate(s: Schedule, t: float) -> float:
    """1/(alpha^2 sigma^2 b) normalized to 1 at t0."""
    if t < s.t0:
        raise InputError(f"t={t} precedes schedule start t0={s.t0}")
    return math.exp(-log_rate_factor(s, t))
