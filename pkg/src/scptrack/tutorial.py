"""Analytic benchmark: a two-variable nonconvex problem with closed forms.

min -x1  s.t.  x1^2 + 2 x2 + 2 - 4 xi = 0,  ||(x1, 1)|| <= x2,  x >= 0.

For xi >= 1.2 the cone member is active at the unique solution and every
piece of the KKT point has a closed form, which makes this the reference
instance for step-by-step verification of the tracking algorithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .problem import ParametricNLP, PrimalDual
from .region import ConvexRegion, SecondOrderCone


def tutorial_problem():
    """The two-variable instance with analytic derivatives attached."""

    def g(x):
        return np.array([x[0] * x[0] + 2.0 * x[1] + 2.0])

    def g_jac(x):
        return np.array([[2.0 * x[0], 2.0]])

    def g_adjoint(x, y):
        return np.array([2.0 * x[0] * y[0], 2.0 * y[0]])

    def lagrangian_hessian(x, y):
        h = np.zeros((2, 2))
        h[0, 0] = 2.0 * y[0]
        return h

    cone = SecondOrderCone(
        D=[[1.0, 0.0], [0.0, 0.0]], d=[0.0, 1.0], e=[0.0, 1.0], f=0.0
    )
    region = ConvexRegion(lower=np.zeros(2), upper=np.full(2, np.inf), cones=(cone,))
    return ParametricNLP(
        c=np.array([-1.0, 0.0]),
        g=g,
        g_adjoint=g_adjoint,
        M=np.array([[-4.0]]),
        region=region,
        g_jac=g_jac,
        lagrangian_hessian=lagrangian_hessian,
        name="tutorial",
    )


@dataclass(frozen=True)
class TutorialGroundTruth:
    """Closed-form KKT point at one parameter value (valid for xi >= 1.2).

    y1_star multiplies the equality row, y2_star the cone member; the
    library's primal-dual pairs carry equality multipliers only, so the
    cone multiplier travels separately for diagnostics.
    """

    xi: float
    x_star: np.ndarray
    y1_star: float
    y2_star: float

    @classmethod
    def at(cls, xi):
        xi = float(xi)
        if xi < 1.2:
            raise UsageError("closed form requires xi >= 1.2")
        root = math.sqrt(xi)
        x = np.array([2.0 * math.sqrt(xi - root), 2.0 * root - 1.0])
        den = 8.0 * math.sqrt(xi * xi - xi * root)
        return cls(xi, x, (2.0 * root - 1.0) / den, 1.0 / den)


def tutorial_solution(xi):
    """Closed-form solution of the tutorial problem at xi >= 1.2.

    Returns (z, y2) where z carries the primal point and the equality
    multiplier and y2 is the cone multiplier.
    """
    gt = TutorialGroundTruth.at(xi)
    return PrimalDual(gt.x_star, np.array([gt.y1_star])), gt.y2_star
