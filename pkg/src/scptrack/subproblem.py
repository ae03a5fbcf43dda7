"""Convex tracking subproblem: linearized equalities, exact region.

min  c.x + m.(x - x_ref) + 0.5 (x - x_ref).H.(x - x_ref)
s.t. A_eq (x - x_ref) + b_eq = 0,   x in region
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .region import ConvexRegion


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITER = "max_iter"


@dataclass(frozen=True, eq=False)
class SolverOptions:
    tol: float = 1e-8
    max_iter: int = 200
    step_fraction: float = 0.99
    tikhonov: float = 0.0
    tikhonov_retry: bool = True
    warm_start: bool = True
    verbose: bool = False


@dataclass(frozen=True, eq=False)
class ConvexSubproblem:
    c: np.ndarray
    m_corr: np.ndarray
    H: np.ndarray
    x_ref: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    region: ConvexRegion

    def __post_init__(self):
        for name in ("c", "m_corr", "x_ref", "b_eq"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), float)))
        object.__setattr__(self, "H", np.atleast_2d(np.asarray(self.H, dtype=float)))
        object.__setattr__(self, "A_eq", np.atleast_2d(np.asarray(self.A_eq, dtype=float)))
        n = self.c.size
        if self.m_corr.size != n or self.x_ref.size != n:
            raise DimensionError("gradient pieces disagree on dimension")
        if self.H.shape != (n, n):
            raise DimensionError("curvature matrix has wrong shape")
        if self.A_eq.shape != (self.b_eq.size, n):
            raise DimensionError("equality blocks disagree on dimension")
        if self.region.n != n:
            raise DimensionError("region dimension mismatch")

    @property
    def n(self):
        return self.c.size

    @property
    def m(self):
        return self.b_eq.size

    @property
    def grad_const(self):
        """Constant part of the gradient: c + m_corr - H.x_ref."""
        return self.c + self.m_corr - self.H @ self.x_ref

    def gradient(self, x):
        return self.grad_const + self.H @ x

    def objective(self, x):
        dx = x - self.x_ref
        return float((self.c + self.m_corr) @ x + 0.5 * dx @ self.H @ dx)


@dataclass(frozen=True)
class SubproblemResiduals:
    stationarity: float
    equality: float
    region_distance: float
    comp_gap: float

    @property
    def total(self):
        return max(self.stationarity, self.equality, self.region_distance, self.comp_gap)


@dataclass(frozen=True, eq=False)
class SubproblemSolution:
    x: np.ndarray
    y: np.ndarray
    status: SolveStatus
    iterations: int
    residuals: SubproblemResiduals
    regularized: bool = False


def build_subproblem(problem, state, xi):
    """Subproblem at parameter xi around the carried iterate.

    Equality right-hand side is g(x_k) + M.xi; the cached g value in the
    state keeps this at zero extra g evaluations per step.
    """
    xi = problem.check_xi(xi)
    x_ref = state.z.x
    g_x = state.g_x
    if g_x is None:
        g_x = np.atleast_1d(np.asarray(problem.g(x_ref), dtype=float))
    if g_x.shape != (problem.m,):
        raise DimensionError("cached g value has wrong shape")
    return ConvexSubproblem(
        c=problem.c,
        m_corr=state.m_corr,
        H=state.H,
        x_ref=x_ref,
        A_eq=state.A,
        b_eq=g_x + problem.M @ xi,
        region=problem.region,
    )
