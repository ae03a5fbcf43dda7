"""Jacobian and curvature models for the tracking iteration.

The correction vector m = g'(x)^T y - A^T y repairs an inexact equality
Jacobian A in the subproblem gradient: the adjoint product supplies the
exact directional information while A may be frozen, finite-differenced
or secant-updated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionError, UsageError
from .problem import PrimalDual

_JAC_KINDS = ("exact", "fd", "frozen", "broyden")
_HESS_KINDS = ("zero", "fixed", "projected")


@dataclass(frozen=True, eq=False)
class JacobianStrategy:
    """How the equality Jacobian model A_k evolves across steps.

    exact   recompute g'(x) every step (g_jac, or finite differences);
    fd      forward finite differences every step;
    frozen  keep the initial matrix;
    broyden rank-one secant updates, optional periodic reset to exact.
    """

    kind: str = "exact"
    fd_step: float = 1e-7
    reset_period: int = 0
    skip_threshold: Optional[float] = None

    def __post_init__(self):
        if self.kind not in _JAC_KINDS:
            raise UsageError(f"unknown jacobian strategy {self.kind!r}")
        if self.fd_step <= 0.0:
            raise UsageError("fd_step must be positive")
        if self.reset_period < 0:
            raise UsageError("reset_period must be >= 0")


@dataclass(frozen=True, eq=False)
class HessianStrategy:
    """Curvature model H_k: zero, a fixed PSD matrix, or the Lagrangian
    Hessian projected to the PSD cone (eigenvalues clamped at eig_floor)."""

    kind: str = "zero"
    matrix: Optional[np.ndarray] = None
    eig_floor: float = 0.0

    def __post_init__(self):
        if self.kind not in _HESS_KINDS:
            raise UsageError(f"unknown hessian strategy {self.kind!r}")
        if self.kind == "fixed":
            if self.matrix is None:
                raise UsageError("fixed hessian strategy needs a matrix")
            m = np.atleast_2d(np.asarray(self.matrix, dtype=float))
            m = (m + m.T) / 2.0
            if np.linalg.eigvalsh(m)[0] < -1e-10 * max(1.0, np.linalg.norm(m)):
                raise UsageError("fixed hessian matrix must be positive semidefinite")
            object.__setattr__(self, "matrix", m)
        if self.eig_floor < 0.0:
            raise UsageError("eig_floor must be >= 0")


@dataclass
class EvalCounters:
    """Work counters for one tracking run (diagnostic calls excluded)."""

    g_evals: int = 0
    jacobian_evals: int = 0
    adjoint_evals: int = 0
    solver_iters: int = 0


@dataclass(frozen=True, eq=False)
class IterateState:
    """Everything one step carries to the next: iterate, models, correction."""

    z: PrimalDual
    A: np.ndarray
    H: np.ndarray
    m_corr: np.ndarray
    k: int = 0
    g_x: Optional[np.ndarray] = None  # cached g(x), one evaluation per step


def adjoint_product(problem, x, y):
    """g'(x)^T y through the problem's adjoint oracle."""
    x = np.asarray(x, dtype=float)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != (problem.n,) or y.shape != (problem.m,):
        raise DimensionError("adjoint product received wrong shapes")
    out = np.asarray(problem.g_adjoint(x, y), dtype=float)
    if out.shape != (problem.n,):
        raise DimensionError(f"adjoint returned shape {out.shape}, expected ({problem.n},)")
    return out


def correction_vector(problem, x, y, A):
    """m = g'(x)^T y - A^T y; zero when A is the exact Jacobian."""
    if A.shape != (problem.m, problem.n):
        raise DimensionError("jacobian model has wrong shape")
    return adjoint_product(problem, x, y) - A.T @ y


def finite_difference_jacobian(g, x, m, step_scale=1e-7):
    """Forward differences with per-coordinate step step_scale*(1+|x_j|)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    jac = np.empty((m, n))
    g0 = np.atleast_1d(np.asarray(g(x), dtype=float))
    if g0.shape != (m,):
        raise DimensionError(f"g returned shape {g0.shape}, expected ({m},)")
    for j in range(n):
        h = step_scale * (1.0 + abs(x[j]))
        xp = np.array(x)
        xp[j] += h
        jac[:, j] = (np.asarray(g(xp), dtype=float) - g0) / h
    return jac


def full_jacobian(problem, x, fd_step=1e-7, counters=None):
    """Exact Jacobian: g_jac when provided, otherwise finite differences."""
    if counters is not None:
        counters.jacobian_evals += 1
    if problem.g_jac is not None:
        jac = np.atleast_2d(np.asarray(problem.g_jac(x), dtype=float))
        if jac.shape != (problem.m, problem.n):
            raise DimensionError(f"g_jac returned shape {jac.shape}")
        return jac
    return finite_difference_jacobian(problem.g, x, problem.m, fd_step)


def update_jacobian(strategy, problem, A, x_old, x_new, g_old, g_new, k, counters=None):
    """Next Jacobian model after the step x_old -> x_new."""
    if strategy.kind == "frozen":
        return A
    if strategy.kind == "exact" and problem.g_jac is not None:
        if counters is not None:
            counters.jacobian_evals += 1
        return np.atleast_2d(np.asarray(problem.g_jac(x_new), dtype=float))
    if strategy.kind in ("exact", "fd"):
        if counters is not None:
            counters.jacobian_evals += 1
        return finite_difference_jacobian(problem.g, x_new, problem.m, strategy.fd_step)
    # broyden
    if strategy.reset_period > 0 and k > 0 and k % strategy.reset_period == 0:
        return full_jacobian(problem, x_new, strategy.fd_step, counters)
    dx = x_new - x_old
    nrm = np.linalg.norm(dx)
    skip = strategy.skip_threshold
    if skip is None:
        skip = 1e-12 * (1.0 + np.linalg.norm(x_new))
    if nrm <= skip:
        return A
    dg = g_new - g_old
    return A + np.outer(dg - A @ dx, dx) / (nrm * nrm)


def update_hessian(strategy, problem, x, y):
    """Next curvature model at (x, y)."""
    n = problem.n
    if strategy.kind == "zero":
        return np.zeros((n, n))
    if strategy.kind == "fixed":
        return np.array(strategy.matrix)
    if problem.lagrangian_hessian is None:
        raise UsageError(
            "projected hessian strategy needs the problem's lagrangian_hessian callback"
        )
    h = np.atleast_2d(np.asarray(problem.lagrangian_hessian(x, y), dtype=float))
    if h.shape != (n, n):
        raise DimensionError(f"lagrangian_hessian returned shape {h.shape}")
    h = (h + h.T) / 2.0
    lam, u = np.linalg.eigh(h)
    return (u * np.maximum(lam, strategy.eig_floor)) @ u.T


def init_state(problem, z0, jacobian, hessian, counters=None):
    """State before the first step: model matrices built at z0.

    The exact Jacobian at x0 seeds every strategy except fd (which
    differences immediately); the correction vector is consistent with the
    seeded A, hence zero for exact initialization.
    """
    x0, y0 = z0.x, z0.y
    if jacobian.kind == "fd":
        if counters is not None:
            counters.jacobian_evals += 1
        A0 = finite_difference_jacobian(problem.g, x0, problem.m, jacobian.fd_step)
    else:
        A0 = full_jacobian(problem, x0, jacobian.fd_step, counters)
    H0 = update_hessian(hessian, problem, x0, y0)
    m0 = correction_vector(problem, x0, y0, A0)
    if counters is not None:
        counters.adjoint_evals += 1
        counters.g_evals += 1
    g0 = np.atleast_1d(np.asarray(problem.g(x0), dtype=float))
    return IterateState(z=z0, A=A0, H=H0, m_corr=m0, k=0, g_x=g0)
