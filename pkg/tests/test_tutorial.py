"""Closed-form benchmark: analytic solution identities and KKT checks."""

import math

import numpy as np
import pytest

from scptrack.errors import UsageError
from scptrack.jacobians import finite_difference_jacobian
from scptrack.problem import PrimalDual, kkt_residual
from scptrack.region import region_violation
from scptrack.tutorial import TutorialGroundTruth, tutorial_problem, tutorial_solution


def test_problem_shape():
    problem = tutorial_problem()
    assert (problem.n, problem.m, problem.p) == (2, 1, 1)
    np.testing.assert_allclose(problem.c, [-1.0, 0.0])
    np.testing.assert_allclose(problem.M, [[-4.0]])
    np.testing.assert_allclose(problem.region.lower, [0.0, 0.0])
    assert len(problem.region.cones) == 1


def test_closed_form_satisfies_equality_and_cone():
    problem = tutorial_problem()
    for xi in np.linspace(1.2, 6.0, 40):
        gt = TutorialGroundTruth.at(xi)
        x = gt.x_star
        # equality: x1^2 + 2 x2 + 2 - 4 xi = 0 by construction
        assert abs(problem.g(x)[0] - 4.0 * xi) <= 1e-10 * max(1.0, 4.0 * xi)
        # cone active: ||(x1, 1)|| = x2
        assert math.hypot(x[0], 1.0) == pytest.approx(x[1], abs=1e-12)
        assert region_violation(problem.region, x) <= 1e-12
        assert x[0] >= 0.0 and x[1] >= 0.0


def test_closed_form_multipliers_balance_gradient():
    # c + y1 grad g + y2 grad(x1^2 + 1 - x2^2) = 0: the cone multiplier is
    # normalized against the squared residual, hence y1 = y2 x2
    for xi in (1.2, 1.7, 2.5, 4.0):
        gt = TutorialGroundTruth.at(xi)
        x1, x2 = gt.x_star
        grad_g = np.array([2.0 * x1, 2.0])
        grad_sq = np.array([2.0 * x1, -2.0 * x2])
        total = np.array([-1.0, 0.0]) + gt.y1_star * grad_g + gt.y2_star * grad_sq
        np.testing.assert_allclose(total, np.zeros(2), atol=1e-10)
        assert gt.y2_star > 0.0
        assert gt.y1_star == pytest.approx(gt.y2_star * x2, rel=1e-12)


def test_closed_form_formulas():
    xi = 2.0
    gt = TutorialGroundTruth.at(xi)
    root = math.sqrt(xi)
    np.testing.assert_allclose(
        gt.x_star, [2.0 * math.sqrt(xi - root), 2.0 * root - 1.0]
    )
    den = 8.0 * math.sqrt(xi * xi - xi * root)
    assert gt.y1_star == pytest.approx((2.0 * root - 1.0) / den)
    assert gt.y2_star == pytest.approx(1.0 / den)


def test_kkt_residual_small_on_sweep():
    problem = tutorial_problem()
    for k in range(10):
        xi = 1.2 + 0.25 * k
        z, _ = tutorial_solution(xi)
        assert kkt_residual(problem, z, xi).total <= 1e-8


def test_kkt_residual_flags_wrong_point():
    problem = tutorial_problem()
    z, _ = tutorial_solution(1.5)
    wrong = PrimalDual(z.x + np.array([0.05, 0.0]), z.y)
    assert kkt_residual(problem, wrong, 1.5).total > 1e-3


def test_domain_guard():
    with pytest.raises(UsageError):
        TutorialGroundTruth.at(1.19)
    with pytest.raises(UsageError):
        tutorial_solution(1.0)


def test_derivative_callbacks():
    problem = tutorial_problem()
    rng = np.random.default_rng(55)
    for _ in range(5):
        x = np.abs(rng.normal(size=2)) + 0.2
        fd = finite_difference_jacobian(problem.g, x, 1, 1e-7)
        np.testing.assert_allclose(problem.g_jac(x), fd, atol=1e-5)
        y = rng.normal(size=1)
        np.testing.assert_allclose(
            problem.g_adjoint(x, y), problem.g_jac(x).T @ y, atol=1e-12
        )
        np.testing.assert_allclose(
            problem.lagrangian_hessian(x, y), np.diag([2.0 * y[0], 0.0])
        )
