"""Problem description, natural-map residual, objective reformulation."""

import numpy as np
import pytest

from scptrack.errors import DimensionError, UnsupportedObjectiveError
from scptrack.problem import (
    LinearObjective,
    ParametricNLP,
    PrimalDual,
    QuadraticObjective,
    eval_constraints,
    kkt_residual,
    slack_reformulate,
)
from scptrack.region import ConvexRegion, region_violation, project_region


def _simplex_problem():
    # min x1  s.t.  x1 + x2 - xi = 0,  x >= 0; optimum (0, xi) with y = 0
    return ParametricNLP(
        c=[1.0, 0.0],
        g=lambda x: np.array([x[0] + x[1]]),
        g_adjoint=lambda x, y: y[0] * np.array([1.0, 1.0]),
        M=[[-1.0]],
        region=ConvexRegion(lower=[0.0, 0.0], upper=[np.inf, np.inf]),
        g_jac=lambda x: np.array([[1.0, 1.0]]),
    )


def test_dimensions_and_checks():
    problem = _simplex_problem()
    assert (problem.n, problem.m, problem.p) == (2, 1, 1)
    np.testing.assert_allclose(problem.check_xi(1.0), [1.0])
    with pytest.raises(DimensionError):
        problem.check_xi([1.0, 2.0])
    with pytest.raises(DimensionError):
        eval_constraints(problem, np.zeros(3), 1.0)


def test_eval_constraints_value():
    problem = _simplex_problem()
    r = eval_constraints(problem, np.array([0.25, 0.5]), 1.0)
    np.testing.assert_allclose(r, [-0.25])


def test_kkt_residual_hand_computed():
    problem = _simplex_problem()
    z_star = PrimalDual([0.0, 1.0], [0.0])
    kkt = kkt_residual(problem, z_star, 1.0)
    # active bound absorbs the cost gradient, the rest vanishes exactly
    assert kkt.total <= 1e-12

    z_bad = PrimalDual([0.0, 1.0], [0.5])
    kkt = kkt_residual(problem, z_bad, 1.0)
    # gradient (1 + y, y) projects to a point 0.5 away in the second slot
    assert kkt.stationarity == pytest.approx(0.5, abs=1e-9)
    assert kkt.equality == 0.0

    z_off = PrimalDual([0.5, 1.0], [0.0])
    kkt = kkt_residual(problem, z_off, 1.0)
    assert kkt.equality == pytest.approx(0.5)


def test_kkt_region_distance_reports_infeasible_point():
    problem = _simplex_problem()
    kkt = kkt_residual(problem, PrimalDual([-0.3, 1.3], [0.0]), 1.0)
    assert kkt.region_distance == pytest.approx(0.3, abs=1e-9)


def test_multiplier_shape_is_enforced():
    problem = _simplex_problem()
    with pytest.raises(DimensionError):
        kkt_residual(problem, PrimalDual([0.0, 1.0], [0.0, 0.0]), 1.0)


def test_linear_objective_and_reformulation():
    problem = _simplex_problem()
    obj = LinearObjective([2.0, 1.0], offset=3.0)
    assert obj.value(np.array([1.0, 1.0])) == pytest.approx(6.0)
    np.testing.assert_allclose(obj.gradient(np.zeros(2)), [2.0, 1.0])
    new = slack_reformulate(obj, problem)
    assert new.n == 2
    np.testing.assert_allclose(new.c, [2.0, 1.0])
    # same cost vector: problem returned unchanged
    assert slack_reformulate(LinearObjective([1.0, 0.0]), problem) is problem


def test_quadratic_objective_gradient_matches_fd():
    rng = np.random.default_rng(5)
    B = rng.normal(size=(3, 3))
    obj = QuadraticObjective(B @ B.T, rng.normal(size=3), offset=0.7)
    x = rng.normal(size=3)
    g = obj.gradient(x)
    h = 1e-6
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd = (obj.value(x + e) - obj.value(x - e)) / (2.0 * h)
        assert g[i] == pytest.approx(fd, rel=1e-6, abs=1e-7)


def test_quadratic_reformulation_epigraph_geometry():
    problem = _simplex_problem()
    rng = np.random.default_rng(6)
    B = rng.normal(size=(2, 2))
    obj = QuadraticObjective(B @ B.T + 0.1 * np.eye(2), [0.3, -0.2], offset=0.4)
    new = slack_reformulate(obj, problem)

    assert new.n == 3
    np.testing.assert_allclose(new.c, [0.0, 0.0, 1.0])
    # cost is the slack; the appended member is exactly f(x) <= s
    member = new.region.cones[-1]
    for _ in range(50):
        x = rng.normal(size=2)
        fx = obj.value(x)
        above = np.concatenate([x, [fx + abs(fx) * 1e-9 + 1e-9]])
        below = np.concatenate([x, [fx - max(0.1, 0.1 * abs(fx))]])
        assert member.violation(above) <= 1e-8
        assert member.violation(below) > 0.0

    # constraint data untouched by the slack coordinate
    x = rng.normal(size=2)
    xs = np.concatenate([x, [5.0]])
    np.testing.assert_allclose(new.g(xs), problem.g(x))
    np.testing.assert_allclose(new.g_jac(xs), np.array([[1.0, 1.0, 0.0]]))
    np.testing.assert_allclose(new.g_adjoint(xs, [2.0]), [2.0, 2.0, 0.0])


def test_reformulation_rejects_bad_objectives():
    problem = _simplex_problem()
    with pytest.raises(UnsupportedObjectiveError):
        slack_reformulate(QuadraticObjective([[-1.0, 0.0], [0.0, 1.0]], [0.0, 0.0]), problem)
    with pytest.raises(UnsupportedObjectiveError):
        slack_reformulate(object(), problem)
    with pytest.raises(DimensionError):
        slack_reformulate(LinearObjective([1.0, 2.0, 3.0]), problem)


def test_zero_curvature_quadratic_degrades_to_linear():
    problem = _simplex_problem()
    new = slack_reformulate(QuadraticObjective(np.zeros((2, 2)), [2.0, 0.0]), problem)
    assert new.n == 2
    np.testing.assert_allclose(new.c, [2.0, 0.0])
