import numpy as np
import pytest

from inertial_alm.errors import ContractError, InputError, OracleError
from inertial_alm.problem import (ProblemSpec, ProxBlock, SmoothBlock,
                                  aug_lagrangian, feasibility_gap,
                                  grad_aug_lagrangian, kkt_residual,
                                  lagrangian, make_example1, make_example2,
                                  solve_saddle_point_quadratic,
                                  solve_saddle_point_reference)

# Hand-solved optimum of the quadratic instance: eliminating the constraint
# y1 = x1 - x2, y2 = x2 and minimizing (x1-1)^2 + (x2-1)^2 + (x1-x2)^2 + x2^2
# gives x* = (0.8, 0.6); lambda* follows from grad f(x*) + A^T lambda* = 0.
X_STAR = np.array([0.8, 0.6])
Y_STAR = np.array([0.2, 0.6])
LAM_STAR = np.array([-0.4, -1.2])
F_STAR = 0.6


def test_example1_dimensions_and_constraint():
    p = make_example1()
    assert (p.dim_x, p.dim_y, p.dim_z) == (2, 2, 2)
    assert p.mu == 10.0
    assert p.is_smooth
    # the constraint encodes y = x + (-x2, 0): residual vanishes there
    x = np.array([3.0, 5.0])
    y = np.array([x[0] - x[1], x[1]])
    assert feasibility_gap(p, x, y) == 0.0


def test_lagrangian_hand_value():
    p = make_example1()
    x = np.array([1.0, 0.0])
    y = np.array([0.0, 1.0])
    lam = np.array([2.0, -1.0])
    # f = 0+1, g = 0+1, r = A x + y = (-1, 0) + (0, 1) = (-1, 1)
    r = np.array([-1.0, 1.0])
    assert lagrangian(p, x, y, lam) == pytest.approx(2.0 + lam @ r)
    assert aug_lagrangian(p, x, y, lam) == pytest.approx(2.0 + lam @ r + 5.0 * (r @ r))


def test_aug_lagrangian_exceeds_lagrangian_when_infeasible():
    p = make_example1()
    rng = np.random.default_rng(7)
    for _ in range(20):
        x, y = rng.standard_normal(2), rng.standard_normal(2)
        lam = rng.standard_normal(2)
        gap = aug_lagrangian(p, x, y, lam) - lagrangian(p, x, y, lam)
        assert gap == pytest.approx(0.5 * p.mu * feasibility_gap(p, x, y) ** 2)


@pytest.mark.parametrize("make", [make_example1, make_example2])
def test_grad_matches_finite_differences(make):
    p = make()
    rng = np.random.default_rng(11)
    h = 1e-6
    for _ in range(25):
        x, y = rng.standard_normal(2), rng.standard_normal(2)
        lam = rng.standard_normal(2)
        g_x, g_y, g_lam = grad_aug_lagrangian(p, x, y, lam)
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            fd = (aug_lagrangian(p, x + e, y, lam) - aug_lagrangian(p, x - e, y, lam)) / (2 * h)
            assert g_x[i] == pytest.approx(fd, rel=1e-6, abs=1e-8)
            fd = (aug_lagrangian(p, x, y + e, lam) - aug_lagrangian(p, x, y - e, lam)) / (2 * h)
            assert g_y[i] == pytest.approx(fd, rel=1e-6, abs=1e-8)
            fd = (aug_lagrangian(p, x, y, lam + e) - aug_lagrangian(p, x, y, lam - e)) / (2 * h)
            assert g_lam[i] == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_quadratic_saddle_oracle_hand_solution():
    sp = solve_saddle_point_quadratic(make_example1())
    np.testing.assert_allclose(sp.x_star, X_STAR, atol=1e-12)
    np.testing.assert_allclose(sp.y_star, Y_STAR, atol=1e-12)
    np.testing.assert_allclose(sp.lambda_star, LAM_STAR, atol=1e-12)
    assert sp.F_star == pytest.approx(F_STAR, abs=1e-12)


def test_reference_oracle_agrees_with_direct_solve():
    p = make_example1()
    direct = solve_saddle_point_quadratic(p)
    newton = solve_saddle_point_reference(p, tol=1e-12)
    np.testing.assert_allclose(newton.w_star, direct.w_star, atol=1e-8)
    assert kkt_residual(p, newton.x_star, newton.y_star, newton.lambda_star) <= 1e-8


def test_reference_oracle_example2_kkt():
    p = make_example2()
    sp = solve_saddle_point_reference(p, tol=1e-10)
    assert kkt_residual(p, sp.x_star, sp.y_star, sp.lambda_star) <= 1e-8
    # unconstrained optimum of the logistic block alone is at infinity,
    # so the multiplier must be active
    assert np.linalg.norm(sp.lambda_star) > 1e-3


def test_kkt_residual_zero_only_at_saddle():
    p = make_example1()
    sp = solve_saddle_point_quadratic(p)
    assert kkt_residual(p, sp.x_star, sp.y_star, sp.lambda_star) <= 1e-12
    assert kkt_residual(p, sp.x_star + 0.1, sp.y_star, sp.lambda_star) > 1e-3


def test_quadratic_oracle_rejects_non_quadratic():
    with pytest.raises(OracleError):
        solve_saddle_point_quadratic(make_example2())


def test_quadratic_oracle_rejects_singular_kkt():
    zero = SmoothBlock(value=lambda z: 0.0, grad=lambda z: np.zeros_like(z))
    p = ProblemSpec(dim_x=1, dim_y=1, dim_z=1, f_block=zero, g_block=zero,
                    A=np.zeros((1, 1)), B=np.zeros((1, 1)), c=np.zeros(1), mu=1.0)
    with pytest.raises(OracleError):
        solve_saddle_point_quadratic(p)


def test_validation_errors():
    p = make_example1()
    with pytest.raises(InputError):
        lagrangian(p, np.zeros(3), np.zeros(2), np.zeros(2))
    with pytest.raises(InputError):
        grad_aug_lagrangian(p, np.zeros(2), np.zeros(2), np.zeros(1))
    with pytest.raises(InputError):
        ProblemSpec(dim_x=2, dim_y=2, dim_z=2, f_block=p.f_block,
                    g_block=p.g_block, A=p.A, B=p.B, c=p.c, mu=-1.0)
    with pytest.raises(InputError):
        ProblemSpec(dim_x=2, dim_y=2, dim_z=2, f_block=p.f_block,
                    g_block=p.g_block, A=np.eye(3), B=p.B, c=p.c, mu=1.0)


def test_smooth_contract_enforced():
    nonsmooth = ProxBlock(value=lambda x: float(np.sum(np.abs(x))),
                          prox=lambda theta, x: x)
    p = make_example1()
    q = ProblemSpec(dim_x=2, dim_y=2, dim_z=2, f_block=nonsmooth,
                    g_block=p.g_block, A=p.A, B=p.B, c=p.c, mu=10.0)
    assert not q.is_smooth
    with pytest.raises(ContractError):
        grad_aug_lagrangian(q, np.zeros(2), np.zeros(2), np.zeros(2))
    with pytest.raises(ContractError):
        kkt_residual(q, np.zeros(2), np.zeros(2), np.zeros(2))
    with pytest.raises(ContractError):
        solve_saddle_point_quadratic(q)
