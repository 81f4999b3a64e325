"""Moreau envelope smoothing of prox-capable blocks.

Turns a ProxBlock into a SmoothBlock with (1/theta)-Lipschitz gradient so
the non-smooth problem can be integrated as a smooth one. Also hosts the
built-in closed-form prox blocks (l1, box indicator, scaled quadratic) and
the l1-regularized variant of the quadratic example.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InputError
from .problem import (ProblemSpec, ProxBlock, SmoothBlock, make_example1)

Vector = np.ndarray

DEFAULT_THETA = 1e-3


@dataclass(frozen=True)
class MoreauBlock:
    base: ProxBlock
    theta: float

    def __post_init__(self):
        if self.theta <= 0:
            raise InputError(f"theta must be positive, got {self.theta}")


def moreau_value(m: MoreauBlock, x: Vector) -> float:
    """Envelope value f(p) + ||x - p||^2 / (2 theta), p = prox(theta, x)."""
    p = m.base.prox(m.theta, x)
    d = x - p
    return float(m.base.value(p)) + float(d @ d) / (2.0 * m.theta)


def moreau_grad(m: MoreauBlock, x: Vector) -> Vector:
    """(x - prox(theta, x)) / theta."""
    return (x - m.base.prox(m.theta, x)) / m.theta


def as_smooth_block(m: MoreauBlock) -> SmoothBlock:
    return SmoothBlock(
        value=lambda x, m=m: moreau_value(m, x),
        grad=lambda x, m=m: moreau_grad(m, x),
    )


def smooth_problem(p: ProblemSpec, theta: float = DEFAULT_THETA) -> ProblemSpec:
    """Replace every ProxBlock by its Moreau-envelope SmoothBlock.

    Fully smooth problems pass through unchanged (identity).
    """
    if p.is_smooth:
        return p
    changes = {}
    for name in ("f_block", "g_block"):
        block = getattr(p, name)
        if isinstance(block, SmoothBlock):
            continue
        if isinstance(block, ProxBlock):
            changes[name] = as_smooth_block(MoreauBlock(block, theta))
        else:
            raise InputError(f"{name} is neither smooth nor prox-capable: {type(block)!r}")
    return replace(p, **changes)


# --- Built-in prox blocks -------------------------------------------------


def l1_block(weight: float = 1.0, shift: Vector | None = None) -> ProxBlock:
    """weight * ||x - shift||_1, prox = shifted soft thresholding."""
    if weight <= 0:
        raise InputError(f"weight must be positive, got {weight}")

    def value(x):
        z = x if shift is None else x - shift
        return weight * float(np.sum(np.abs(z)))

    def prox(theta, x):
        z = x if shift is None else x - shift
        out = np.sign(z) * np.maximum(np.abs(z) - weight * theta, 0.0)
        return out if shift is None else out + shift

    return ProxBlock(value=value, prox=prox)


def box_block(lo: Vector, hi: Vector) -> ProxBlock:
    """Indicator of the box [lo, hi]; prox is the projection."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise InputError("box bounds must satisfy lo <= hi")

    def value(x):
        return 0.0 if np.all((x >= lo - 1e-12) & (x <= hi + 1e-12)) else float("inf")

    def prox(theta, x):
        return np.clip(x, lo, hi)

    return ProxBlock(value=value, prox=prox)


def quadratic_prox_block(scale: float = 1.0, center: Vector | None = None) -> ProxBlock:
    """(scale/2) ||x - center||^2 with its closed-form prox."""
    if scale <= 0:
        raise InputError(f"scale must be positive, got {scale}")

    def value(x):
        z = x if center is None else x - center
        return 0.5 * scale * float(z @ z)

    def prox(theta, x):
        z = x if center is None else x - center
        out = z / (1.0 + theta * scale)
        return out if center is None else out + center

    return ProxBlock(value=value, prox=prox)


def make_example1_l1(mu: float = 10.0) -> ProblemSpec:
    """l1 variant of the quadratic example: ||x - (1,1)||_1 + ||y||^2.

    Non-smooth fixture for exercising the smoothing layer; not one of the
    frozen experiment instances.
    """
    base = make_example1(mu=mu)
    return replace(base, f_block=l1_block(shift=np.ones(2)), strong_convexity=None)
