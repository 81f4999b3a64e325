"""Exception types shared across the package."""


class InputError(ValueError):
    """Bad user input: dimension mismatch, parameter out of range."""


class ContractError(RuntimeError):
    """An operation was called outside its contract (e.g. gradient of a
    non-smooth block)."""


class OracleError(RuntimeError):
    """A reference solve failed (singular system, non-convergence)."""


class IntegrationError(RuntimeError):
    """Base class of integrator failures. Carries the last good time."""

    def __init__(self, message, t_last=None, partial=None):
        super().__init__(message)
        self.t_last = t_last
        self.partial = partial


class StiffnessError(IntegrationError):
    """Step size underflow (h < h_min)."""


class BudgetError(IntegrationError):
    """Step budget (max_steps) exhausted."""


class DivergenceError(IntegrationError):
    """Non-finite state encountered."""


class FitError(RuntimeError):
    """A rate fit had too few usable samples."""


class ConfigError(ValueError):
    """Invalid harness configuration."""
