"""Constrained problem instances, Lagrangian evaluation and saddle oracles.

A problem is  min f(x) + g(y)  subject to  A x + B y = c,  together with an
augmentation parameter mu > 0.  Blocks are either smooth (value + gradient)
or prox-capable (value + proximal map); non-smooth problems must be smoothed
before gradient-based operations are used (see the smoothing module).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import ContractError, InputError, OracleError

Vector = np.ndarray


@dataclass(frozen=True)
class SmoothBlock:
    """Convex C^1 block with value and analytic gradient."""

    value: Callable[[Vector], float]
    grad: Callable[[Vector], Vector]


@dataclass(frozen=True)
class ProxBlock:
    """Convex block accessed through its proximal map.

    ``prox(theta, x)`` minimizes value(xi) + ||x - xi||^2 / (2 theta).
    """

    value: Callable[[Vector], float]
    prox: Callable[[float, Vector], Vector]


Block = Union[SmoothBlock, ProxBlock]


@dataclass(frozen=True)
class ProblemSpec:
    """Immutable description of one constrained problem instance."""

    dim_x: int
    dim_y: int
    dim_z: int
    f_block: Block
    g_block: Block
    A: Vector
    B: Vector
    c: Vector
    mu: float
    # Quadratic convexity modulus of f(x)+g(y) when known, else None.
    strong_convexity: Optional[float] = None

    def __post_init__(self):
        if self.mu <= 0:
            raise InputError(f"mu must be positive, got {self.mu}")
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        c = np.asarray(self.c, dtype=float)
        if A.shape != (self.dim_z, self.dim_x):
            raise InputError(f"A has shape {A.shape}, expected {(self.dim_z, self.dim_x)}")
        if B.shape != (self.dim_z, self.dim_y):
            raise InputError(f"B has shape {B.shape}, expected {(self.dim_z, self.dim_y)}")
        if c.shape != (self.dim_z,):
            raise InputError(f"c has shape {c.shape}, expected {(self.dim_z,)}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "c", c)

    @property
    def is_smooth(self) -> bool:
        return isinstance(self.f_block, SmoothBlock) and isinstance(self.g_block, SmoothBlock)

    def objective(self, x: Vector, y: Vector) -> float:
        return float(self.f_block.value(x) + self.g_block.value(y))

    def residual(self, x: Vector, y: Vector) -> Vector:
        return self.A @ x + self.B @ y - self.c


@dataclass(frozen=True)
class SaddlePoint:
    x_star: Vector
    y_star: Vector
    lambda_star: Vector
    F_star: float

    @property
    def w_star(self) -> Vector:
        return np.concatenate([self.x_star, self.y_star, self.lambda_star])


def _check_dims(p: ProblemSpec, x: Vector, y: Vector, lam: Optional[Vector] = None) -> None:
    if np.shape(x) != (p.dim_x,):
        raise InputError(f"x has shape {np.shape(x)}, expected {(p.dim_x,)}")
    if np.shape(y) != (p.dim_y,):
        raise InputError(f"y has shape {np.shape(y)}, expected {(p.dim_y,)}")
    if lam is not None and np.shape(lam) != (p.dim_z,):
        raise InputError(f"lambda has shape {np.shape(lam)}, expected {(p.dim_z,)}")


def lagrangian(p: ProblemSpec, x: Vector, y: Vector, lam: Vector) -> float:
    """f(x) + g(y) + <lam, Ax + By - c>."""
    _check_dims(p, x, y, lam)
    return p.objective(x, y) + float(lam @ p.residual(x, y))


def aug_lagrangian(p: ProblemSpec, x: Vector, y: Vector, lam: Vector) -> float:
    """Lagrangian plus (mu/2) ||Ax + By - c||^2."""
    _check_dims(p, x, y, lam)
    r = p.residual(x, y)
    return p.objective(x, y) + float(lam @ r) + 0.5 * p.mu * float(r @ r)


def grad_aug_lagrangian(p: ProblemSpec, x: Vector, y: Vector, lam: Vector):
    """Partial gradients (g_x, g_y, g_lam) of the augmented Lagrangian.

    g_x = grad f(x) + A^T (lam + mu r),  g_y = grad g(y) + B^T (lam + mu r),
    g_lam = r, with r = Ax + By - c.
    """
    _check_dims(p, x, y, lam)
    if not p.is_smooth:
        raise ContractError("grad_aug_lagrangian requires smooth blocks; smooth the problem first")
    r = p.residual(x, y)
    shifted = lam + p.mu * r
    g_x = p.f_block.grad(x) + p.A.T @ shifted
    g_y = p.g_block.grad(y) + p.B.T @ shifted
    return g_x, g_y, r


def feasibility_gap(p: ProblemSpec, x: Vector, y: Vector) -> float:
    """||Ax + By - c|| (norm, not squared)."""
    _check_dims(p, x, y)
    return float(np.linalg.norm(p.residual(x, y)))


def kkt_residual(p: ProblemSpec, x: Vector, y: Vector, lam: Vector) -> float:
    """Euclidean norm of the stacked first-order optimality residuals."""
    _check_dims(p, x, y, lam)
    if not p.is_smooth:
        raise ContractError("kkt_residual requires smooth blocks")
    rx = p.f_block.grad(x) + p.A.T @ lam
    ry = p.g_block.grad(y) + p.B.T @ lam
    rz = p.residual(x, y)
    return float(np.sqrt(rx @ rx + ry @ ry + rz @ rz))


def _kkt_map(p: ProblemSpec, w: Vector) -> Vector:
    nx, ny = p.dim_x, p.dim_y
    x, y, lam = w[:nx], w[nx:nx + ny], w[nx + ny:]
    return np.concatenate([
        p.f_block.grad(x) + p.A.T @ lam,
        p.g_block.grad(y) + p.B.T @ lam,
        p.residual(x, y),
    ])


def solve_saddle_point_quadratic(p: ProblemSpec, residual_tol: float = 1e-8) -> SaddlePoint:
    """Direct linear solve of the optimality system for quadratic f, g.

    The constant Hessians are recovered from the gradient oracle (which is
    affine for quadratic blocks), so no Hessian callable is required.
    """
    if not p.is_smooth:
        raise ContractError("quadratic saddle oracle requires smooth blocks")
    nx, ny, nz = p.dim_x, p.dim_y, p.dim_z
    qf = p.f_block.grad(np.zeros(nx))
    qg = p.g_block.grad(np.zeros(ny))
    Hf = np.column_stack([p.f_block.grad(e) - qf for e in np.eye(nx)])
    Hg = np.column_stack([p.g_block.grad(e) - qg for e in np.eye(ny)])
    n = nx + ny + nz
    K = np.zeros((n, n))
    K[:nx, :nx] = Hf
    K[nx:nx + ny, nx:nx + ny] = Hg
    K[:nx, nx + ny:] = p.A.T
    K[nx:nx + ny, nx + ny:] = p.B.T
    K[nx + ny:, :nx] = p.A
    K[nx + ny:, nx:nx + ny] = p.B
    rhs = np.concatenate([-qf, -qg, p.c])
    try:
        w = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise OracleError(f"singular KKT matrix: {exc}") from exc
    x, y, lam = w[:nx], w[nx:nx + ny], w[nx + ny:]
    res = kkt_residual(p, x, y, lam)
    if res > residual_tol:
        raise OracleError(
            f"KKT solve residual {res:.3e} exceeds {residual_tol:.1e}; "
            "blocks are probably not quadratic"
        )
    return SaddlePoint(x, y, lam, p.objective(x, y))


def solve_saddle_point_reference(
    p: ProblemSpec,
    tol: float = 1e-10,
    w0: Optional[Vector] = None,
    max_iter: int = 200,
) -> SaddlePoint:
    """Damped-Newton reference solve of the optimality system.

    Works for any smooth convex problem satisfying strong duality. The
    Jacobian is assembled by forward differences of the optimality map; the
    step is backtracked on the residual norm.
    """
    if not p.is_smooth:
        raise ContractError("reference saddle oracle requires smooth blocks")
    n = p.dim_x + p.dim_y + p.dim_z
    w = np.zeros(n) if w0 is None else np.asarray(w0, dtype=float).copy()
    if w.shape != (n,):
        raise InputError(f"warm start has shape {w.shape}, expected {(n,)}")

    res = _kkt_map(p, w)
    for _ in range(max_iter):
        norm = np.linalg.norm(res)
        if norm <= tol:
            break
        J = np.empty((n, n))
        for j in range(n):
            h = 1e-7 * max(1.0, abs(w[j]))
            wj = w.copy()
            wj[j] += h
            J[:, j] = (_kkt_map(p, wj) - res) / h
        try:
            step = np.linalg.solve(J, -res)
        except np.linalg.LinAlgError as exc:
            raise OracleError(f"singular Newton system: {exc}") from exc
        # Backtracking on the residual norm.
        alpha = 1.0
        for _ in range(60):
            trial = w + alpha * step
            trial_res = _kkt_map(p, trial)
            if np.linalg.norm(trial_res) < norm:
                w, res = trial, trial_res
                break
            alpha *= 0.5
        else:
            raise OracleError("Newton line search stalled")
    else:
        raise OracleError(f"reference solve did not reach tol={tol:.1e} in {max_iter} iterations")

    nx, ny = p.dim_x, p.dim_y
    x, y, lam = w[:nx], w[nx:nx + ny], w[nx + ny:]
    return SaddlePoint(x, y, lam, p.objective(x, y))


# --- Built-in desk-scale instances -------------------------------------

# The shared constraint y = x + (-x2, 0)^T is canonicalized to Ax + By = c
# by moving all terms left: A = [[-1, 1], [0, -1]], B = I2, c = 0.
_CONSTRAINT_A = np.array([[-1.0, 1.0], [0.0, -1.0]])
_CONSTRAINT_B = np.eye(2)
_CONSTRAINT_C = np.zeros(2)


def _squared_distance_block(center: Vector) -> SmoothBlock:
    center = np.asarray(center, dtype=float)
    return SmoothBlock(
        value=lambda z, c=center: float(np.sum((z - c) ** 2)),
        grad=lambda z, c=center: 2.0 * (z - c),
    )


def make_example1(mu: float = 10.0) -> ProblemSpec:
    """Strongly convex quadratic: ||x - (1,1)||^2 + ||y||^2 with the shared
    affine coupling constraint."""
    return ProblemSpec(
        dim_x=2, dim_y=2, dim_z=2,
        f_block=_squared_distance_block(np.ones(2)),
        g_block=_squared_distance_block(np.zeros(2)),
        A=_CONSTRAINT_A, B=_CONSTRAINT_B, c=_CONSTRAINT_C,
        mu=mu,
        strong_convexity=2.0,
    )


def _logistic_block() -> SmoothBlock:
    a = np.ones(2)

    def value(x):
        u = float(a @ x)
        # log(1 + exp(-u)) computed stably for both signs of u.
        return float(np.logaddexp(0.0, -u))

    def grad(x):
        u = float(a @ x)
        s = -1.0 / (1.0 + np.exp(u))
        return s * a

    return SmoothBlock(value=value, grad=grad)


def make_example2(mu: float = 10.0) -> ProblemSpec:
    """Convex (not strongly convex) logistic objective with the same
    constraint: log(1 + exp(-<(1,1), x>)) + ||y||^2."""
    return ProblemSpec(
        dim_x=2, dim_y=2, dim_z=2,
        f_block=_logistic_block(),
        g_block=_squared_distance_block(np.zeros(2)),
        A=_CONSTRAINT_A, B=_CONSTRAINT_B, c=_CONSTRAINT_C,
        mu=mu,
        strong_convexity=None,
    )
