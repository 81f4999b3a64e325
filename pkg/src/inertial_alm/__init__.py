"""Inertial augmented-Lagrangian dynamics for linearly constrained convex
minimization: problem oracles, coefficient schedules, nonsmooth smoothing,
the second-order vector field, an adaptive Runge-Kutta integrator, energy
diagnostics and an experiment CLI."""

from .dynamics import FieldSpec, PhaseState, vector_field
from .errors import (BudgetError, ConfigError, ContractError, DivergenceError,
                     FitError, InputError, IntegrationError, OracleError,
                     StiffnessError)
from .integrator import IntegratorConfig, Trajectory, integrate, log_grid
from .lyapunov import DiagnosticsRow, RateFit, diagnostics, energy, fit_rate
from .problem import (ProblemSpec, ProxBlock, SaddlePoint, SmoothBlock,
                      aug_lagrangian, feasibility_gap, grad_aug_lagrangian,
                      kkt_residual, lagrangian, make_example1, make_example2,
                      solve_saddle_point_quadratic,
                      solve_saddle_point_reference)
from .schedules import (Schedule, check_conditions, make_constant_alpha,
                        make_custom_schedule, make_linear_alpha,
                        make_power_alpha, predicted_rate,
                        scaling_identity_residual)
from .smoothing import (MoreauBlock, l1_block, make_example1_l1, moreau_grad,
                        moreau_value, smooth_problem)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
