"""Phase-space vector field of the inertial augmented-Lagrangian system.

The second-order system is flattened to Zdot = field(t, Z) on the doubled
state Z = (x, y, lambda, u, v, nu). Gradients are evaluated at mixed
extrapolated points: the primal equations see the extrapolated multiplier
lambda + alpha(t) nu, the multiplier equation sees the extrapolated primals
(x + alpha u, y + alpha v) -- never fully extrapolated states.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractError, InputError
from .problem import ProblemSpec, SmoothBlock
from .schedules import Schedule

Vector = np.ndarray


@dataclass(frozen=True)
class PhaseState:
    x: Vector
    y: Vector
    lam: Vector
    u: Vector
    v: Vector
    nu: Vector

    def flatten(self) -> Vector:
        return np.concatenate([self.x, self.y, self.lam, self.u, self.v, self.nu])

    @staticmethod
    def zeros(p: ProblemSpec) -> "PhaseState":
        return PhaseState(np.zeros(p.dim_x), np.zeros(p.dim_y), np.zeros(p.dim_z),
                          np.zeros(p.dim_x), np.zeros(p.dim_y), np.zeros(p.dim_z))

    @staticmethod
    def from_flat(z: Vector, p: ProblemSpec) -> "PhaseState":
        nx, ny, nz = p.dim_x, p.dim_y, p.dim_z
        n = nx + ny + nz
        if z.shape != (2 * n,):
            raise InputError(f"flat state has shape {z.shape}, expected {(2 * n,)}")
        return PhaseState(z[:nx], z[nx:nx + ny], z[nx + ny:n],
                          z[n:n + nx], z[n + nx:n + nx + ny], z[n + nx + ny:])

    @property
    def w(self) -> Vector:
        """Position triple (x, y, lambda)."""
        return np.concatenate([self.x, self.y, self.lam])

    @property
    def w_dot(self) -> Vector:
        """Velocity triple (u, v, nu)."""
        return np.concatenate([self.u, self.v, self.nu])


@dataclass(frozen=True)
class FieldSpec:
    problem: ProblemSpec
    schedule: Schedule

    def __post_init__(self):
        if not self.problem.is_smooth:
            raise ContractError("vector field requires smooth blocks; smooth the problem first")


def flat_field(fs: FieldSpec) -> Callable[[float, Vector], Vector]:
    """Right-hand side closure on flat state vectors (hot path for the
    integrator: no per-call validation)."""
    p = fs.problem
    s = fs.schedule
    c, mu = p.c, p.mu
    grad_f = p.f_block.grad
    grad_g = p.g_block.grad
    nx, ny, nz = p.dim_x, p.dim_y, p.dim_z
    n = nx + ny + nz
    m = nx + ny
    # Stacked constraint operator: r = K @ (x, y) - c, and K^T fans the
    # shifted multiplier back onto both primal blocks in one product.
    K = np.hstack([p.A, p.B])
    KT = K.T.copy()
    gamma, alpha, b = s.gamma, s.alpha, s.b

    def rhs(t: float, z: Vector) -> Vector:
        prim = z[:m]
        lam = z[m:n]
        prim_dot = z[n:n + m]
        nu = z[n + m:]
        g = gamma(t)
        a = alpha(t)
        bt = b(t)
        r = K @ prim - c
        shifted = lam + a * nu + mu * r
        grads = KT @ shifted
        grads[:nx] += grad_f(z[:nx])
        grads[nx:] += grad_g(z[nx:m])
        out = np.empty_like(z)
        out[:n] = z[n:]
        out[n:n + m] = -g * prim_dot - bt * grads
        out[n + m:] = -g * nu + bt * (r + a * (K @ prim_dot))
        return out

    return rhs


def vector_field(fs: FieldSpec, t: float, Z: PhaseState) -> PhaseState:
    """Derivative (u, v, nu, xddot, yddot, lamddot) at time t."""
    z = Z.flatten()
    if not np.all(np.isfinite(z)):
        raise InputError("non-finite phase state")
    if t < fs.schedule.t0:
        raise InputError(f"t={t} precedes schedule start t0={fs.schedule.t0}")
    dz = flat_field(fs)(t, z)
    return PhaseState.from_flat(dz, fs.problem)


def sum_decoupling_check(fs: FieldSpec, t: float, Z: PhaseState) -> float:
    """Structural regression check on the zero-objective fixture with
    A = -B = I, c = 0: the primal sum s = x + y then obeys
    sddot + gamma(t) sdot = 0, so ||(xddot + yddot) + gamma (u + v)|| must
    vanish. Raises on non-conforming fixtures."""
    p = fs.problem
    if p.dim_x != p.dim_y:
        raise ContractError("decoupling fixture needs dim_x == dim_y")
    eye = np.eye(p.dim_x)
    if not (np.array_equal(p.A, eye) and np.array_equal(p.B, -eye)
            and np.all(p.c == 0.0)):
        raise ContractError("decoupling fixture requires A = I, B = -I, c = 0")
    for block, point in ((p.f_block, Z.x), (p.g_block, Z.y)):
        if np.any(block.grad(point) != 0.0):
            raise ContractError("decoupling fixture requires zero objective blocks")
    d = vector_field(fs, t, Z)
    # In the derivative, the velocity slots hold the accelerations.
    return float(np.linalg.norm((d.u + d.v) + fs.schedule.gamma(t) * (Z.u + Z.v)))


def make_decoupling_fixture(dim: int = 2, mu: float = 10.0) -> ProblemSpec:
    """Zero objective, A = I, B = -I, c = 0 (constraint x = y)."""
    zero = SmoothBlock(value=lambda z: 0.0, grad=lambda z: np.zeros_like(z))
    return ProblemSpec(dim_x=dim, dim_y=dim, dim_z=dim,
                       f_block=zero, g_block=zero,
                       A=np.eye(dim), B=-np.eye(dim), c=np.zeros(dim), mu=mu)
