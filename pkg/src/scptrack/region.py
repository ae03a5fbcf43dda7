"""Closed convex regions built from box, affine, second-order-cone and
ellipsoid members, with exact member projections and Dykstra's alternating
projection onto the intersection.

Member projections are computed from a 1D secular equation in the Lagrange
multiplier (eigendecomposition cached per member); Dykstra then combines them.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import brentq, nnls

from .errors import DimensionError, ProjectionError, UsageError

_ROOT_RTOL = 4 * np.finfo(float).eps


def _freeze(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _scan_roots(gfun, grid):
    """Roots of gfun bracketed by sign changes over an increasing grid."""
    roots = []
    g_prev, lam_prev = gfun(grid[0]), grid[0]
    if g_prev == 0.0:
        roots.append(lam_prev)
    for lam in grid[1:]:
        g = gfun(lam)
        if g == 0.0:
            roots.append(lam)
        elif np.isfinite(g) and np.isfinite(g_prev) and g_prev * g < 0.0:
            roots.append(brentq(gfun, lam_prev, lam, rtol=_ROOT_RTOL, maxiter=200))
        g_prev, lam_prev = g, lam
    return roots


def _secular_root(gfun, pole, accept):
    """First multiplier lam >= 0 with gfun(lam) = 0 passing the accept test.

    The secular function is rational in lam with at most one positive pole;
    the search scans a geometric grid on both sides of the pole (or over
    [0, inf) when there is none) and refines sign changes by Brent's method.
    """
    if pole < np.inf:
        seg_a = pole * (1.0 - 2.0 ** -np.arange(0, 48))
        seg_b = pole * (1.0 + 2.0 ** np.concatenate([-np.arange(48, 0, -1), np.arange(0, 64)]))
        grids = [seg_a, seg_b]
    else:
        grids = [np.concatenate([[0.0], 2.0 ** np.arange(-40, 64)])]
    for grid in grids:
        for lam in _scan_roots(gfun, grid):
            if accept(lam):
                return lam
    return None


@dataclass(frozen=True, eq=False)
class AffineInequality:
    """Halfspace {x : a.x <= b}."""

    a: np.ndarray
    b: float

    def __post_init__(self):
        object.__setattr__(self, "a", _freeze(np.atleast_1d(self.a)))
        object.__setattr__(self, "b", float(self.b))
        if self.a.ndim != 1:
            raise DimensionError("affine member coefficient must be a vector")

    def violation(self, x):
        return float(self.a @ x - self.b)

    def project(self, v):
        gap = self.a @ v - self.b
        if gap <= 0.0:
            return np.array(v)
        return v - (gap / (self.a @ self.a)) * self.a


@dataclass(frozen=True, eq=False)
class SecondOrderCone:
    """Member {x : ||D x + d|| <= e.x + f}."""

    D: np.ndarray
    d: np.ndarray
    e: np.ndarray
    f: float

    def __post_init__(self):
        object.__setattr__(self, "D", _freeze(np.atleast_2d(self.D)))
        object.__setattr__(self, "d", _freeze(np.atleast_1d(self.d)))
        object.__setattr__(self, "e", _freeze(np.atleast_1d(self.e)))
        object.__setattr__(self, "f", float(self.f))
        if self.D.shape != (self.d.size, self.e.size):
            raise DimensionError("cone member shapes are inconsistent")

    @cached_property
    def _eig(self):
        # curvature matrix of the squared-residual secular equation; a
        # rank-one downdate of D'D, so it has at most one negative eigenvalue
        m = self.D.T @ self.D - np.outer(self.e, self.e)
        lam, u = np.linalg.eigh((m + m.T) / 2.0)
        return lam, u

    @cached_property
    def _vertex(self):
        # affine set {D x = -d, e.x = -f}; empty for every member this
        # package constructs, kept for closure of the projection
        E = np.vstack([self.D, self.e])
        r = np.concatenate([-self.d, [-self.f]])
        sol, *_ = np.linalg.lstsq(E, r, rcond=None)
        attained = np.linalg.norm(E @ sol - r) <= 1e-9 * (1.0 + np.linalg.norm(r))
        return attained, E, r

    def violation(self, x):
        return float(np.linalg.norm(self.D @ x + self.d) - (self.e @ x + self.f))

    def project(self, v):
        t = float(self.e @ v + self.f)
        if t >= 0.0 and np.linalg.norm(self.D @ v + self.d) <= t:
            return np.array(v)
        lam_m, u = self._eig
        vu = u.T @ v
        wu = u.T @ (self.D.T @ self.d - self.f * self.e)
        pole = np.inf if lam_m[0] >= 0.0 else 1.0 / -lam_m[0]

        def point(lam):
            return u @ ((vu - lam * wu) / (1.0 + lam * lam_m))

        def gap(lam):
            x = point(lam)
            return float(np.sum((self.D @ x + self.d) ** 2) - (self.e @ x + self.f) ** 2)

        def on_cone(lam):
            x = point(lam)
            return self.e @ x + self.f >= -1e-10 * (1.0 + np.linalg.norm(x))

        root = _secular_root(gap, pole, on_cone)
        if root is not None:
            return point(root)
        if pole < np.inf:
            hard = self._hard_case(v, vu, wu, lam_m, u, pole)
            if hard is not None:
                return hard
        attained, E, r = self._vertex
        if not attained:
            raise ProjectionError("cone member projection found no valid root", best=v)
        corr, *_ = np.linalg.lstsq(E, E @ v - r, rcond=None)
        return v - corr

    def _hard_case(self, v, vu, wu, lam_m, u, pole):
        # multiplier exactly at the pole: the stationarity system is singular
        # there and the solution keeps a free component along the pole
        # eigenvector (the trust-region "hard case" analogue)
        rhs = vu - pole * wu
        if abs(rhs[0]) > 1e-9 * (1.0 + np.linalg.norm(rhs)):
            return None
        denom = 1.0 + pole * lam_m
        coords = np.zeros_like(rhs)
        coords[1:] = rhs[1:] / denom[1:]
        x_p = u @ coords
        u_neg = u[:, 0]
        r0 = self.D @ x_p + self.d
        du = self.D @ u_neg
        t0 = self.e @ x_p + self.f
        eu = self.e @ u_neg
        a = du @ du - eu * eu  # = lam_m[0] < 0
        b = 2.0 * (r0 @ du - t0 * eu)
        c = r0 @ r0 - t0 * t0
        disc = b * b - 4.0 * a * c
        if disc < 0.0:
            return None
        best = None
        for tau in ((-b - np.sqrt(disc)) / (2.0 * a), (-b + np.sqrt(disc)) / (2.0 * a)):
            x = x_p + tau * u_neg
            if self.e @ x + self.f >= -1e-10 * (1.0 + np.linalg.norm(x)):
                d2 = float(np.sum((x - v) ** 2))
                if best is None or d2 < best[0]:
                    best = (d2, x)
        return None if best is None else best[1]


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """Member {x : (x - center).shape.(x - center) <= radius}."""

    center: np.ndarray
    shape: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _freeze(np.atleast_1d(self.center)))
        s = np.atleast_2d(np.asarray(self.shape, dtype=float))
        s = (s + s.T) / 2.0
        object.__setattr__(self, "shape", _freeze(s))
        object.__setattr__(self, "radius", float(self.radius))
        if s.shape != (self.center.size, self.center.size):
            raise DimensionError("ellipsoid shape matrix size mismatch")
        if self.radius <= 0.0:
            raise UsageError("ellipsoid radius must be positive")
        lam = np.linalg.eigvalsh(s)
        if lam[0] < -1e-10 * max(1.0, lam[-1]):
            raise UsageError("ellipsoid shape matrix must be positive semidefinite")

    @cached_property
    def _eig(self):
        lam, u = np.linalg.eigh(self.shape)
        return np.maximum(lam, 0.0), u

    def violation(self, x):
        dx = x - self.center
        return float(dx @ self.shape @ dx - self.radius)

    def project(self, v):
        if self.violation(v) <= 0.0:
            return np.array(v)
        lam_s, u = self._eig
        vu = u.T @ (v - self.center)

        def gap(lam):
            coords = vu / (1.0 + lam * lam_s)
            return float(np.sum(lam_s * coords**2) - self.radius)

        # strictly decreasing on [0, inf): the single root is the multiplier
        root = _secular_root(gap, np.inf, lambda lam: True)
        if root is None:
            raise ProjectionError("ellipsoid projection bracket failed", best=v)
        return self.center + u @ (vu / (1.0 + root * lam_s))


@dataclass(frozen=True, eq=False)
class ConvexRegion:
    """Intersection of a box with affine, cone and ellipsoid members."""

    lower: np.ndarray
    upper: np.ndarray
    affine: tuple = ()
    cones: tuple = ()
    ellipsoids: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "lower", _freeze(np.atleast_1d(self.lower)))
        object.__setattr__(self, "upper", _freeze(np.atleast_1d(self.upper)))
        object.__setattr__(self, "affine", tuple(self.affine))
        object.__setattr__(self, "cones", tuple(self.cones))
        object.__setattr__(self, "ellipsoids", tuple(self.ellipsoids))
        n = self.lower.size
        if self.upper.size != n:
            raise DimensionError("box bounds have different lengths")
        if np.any(self.lower > self.upper):
            raise UsageError("box has lower > upper")
        for m in self.affine:
            if m.a.size != n:
                raise DimensionError("affine member dimension mismatch")
        for m in self.cones:
            if m.e.size != n:
                raise DimensionError("cone member dimension mismatch")
        for m in self.ellipsoids:
            if m.center.size != n:
                raise DimensionError("ellipsoid member dimension mismatch")

    @property
    def n(self):
        return self.lower.size

    @property
    def members(self):
        return tuple(self.affine) + tuple(self.cones) + tuple(self.ellipsoids)

    def clip_box(self, v):
        return np.clip(v, self.lower, self.upper)

    @classmethod
    def unbounded(cls, n):
        return cls(np.full(n, -np.inf), np.full(n, np.inf))


def region_violation(region, x):
    """Signed worst-case violation over all members (<= 0 means feasible)."""
    worst = float(np.max(np.maximum(region.lower - x, x - region.upper), initial=-np.inf))
    for m in region.members:
        worst = max(worst, m.violation(x))
    return worst


def _active_normals(region, x, eps):
    """Outward normals of the members active at x (within eps)."""
    normals = []
    lo, up = region.lower, region.upper
    for j in np.flatnonzero(np.isfinite(lo)):
        if x[j] - lo[j] <= eps:
            row = np.zeros(region.n)
            row[j] = -1.0
            normals.append(row)
    for j in np.flatnonzero(np.isfinite(up)):
        if up[j] - x[j] <= eps:
            row = np.zeros(region.n)
            row[j] = 1.0
            normals.append(row)
    for m in region.affine:
        if m.b - m.a @ x <= eps:
            normals.append(np.array(m.a))
    for m in region.cones:
        if m.violation(x) >= -eps:
            u = m.D @ x + m.d
            nu = np.linalg.norm(u)
            normals.append((m.D.T @ u / nu if nu > 0.0 else np.zeros(region.n)) - m.e)
    for m in region.ellipsoids:
        if m.violation(x) >= -eps:
            normals.append(2.0 * m.shape @ (x - m.center))
    return normals


def _verify_projection(region, v, cand, scale):
    """cand if it is provably the projection of v (KKT with nonneg weights)."""
    if region_violation(region, cand) > 1e-11 * scale:
        return None
    r = v - cand
    if np.linalg.norm(r) <= 1e-11 * scale:
        return cand
    normals = _active_normals(region, cand, 1e-9 * scale)
    if not normals:
        return None
    _, rnorm = nnls(np.array(normals).T, r)
    if rnorm <= 1e-9 * (1.0 + np.linalg.norm(r)):
        return cand
    return None


def _boundary_terms(m, p, scale):
    """(value, gradient, hessian) of a curved member's boundary function at p."""
    if isinstance(m, SecondOrderCone):
        u = m.D @ p + m.d
        nu = np.linalg.norm(u)
        if nu <= 1e-12 * scale:
            return None
        uh = u / nu
        grad = m.D.T @ uh - m.e
        hess = m.D.T @ (m.D - np.outer(uh, uh @ m.D)) / nu
        return m.violation(p), grad, hess
    diff = p - m.center
    return m.violation(p), 2.0 * m.shape @ diff, 2.0 * m.shape


def _active_rows(region, x, eps_act):
    """Guessed active set at x: linear rows (A, b with A x = b) and curved members."""
    n = region.n
    rows, rhs = [], []
    lo, up = region.lower, region.upper
    for j in np.flatnonzero(np.isfinite(lo)):
        if x[j] - lo[j] <= eps_act:
            row = np.zeros(n)
            row[j] = 1.0
            rows.append(row)
            rhs.append(lo[j])
    for j in np.flatnonzero(np.isfinite(up)):
        if up[j] - x[j] <= eps_act:
            row = np.zeros(n)
            row[j] = 1.0
            rows.append(row)
            rhs.append(up[j])
    for m in region.affine:
        if m.b - m.a @ x <= eps_act:
            rows.append(np.array(m.a))
            rhs.append(m.b)
    curved = [
        m
        for m in tuple(region.cones) + tuple(region.ellipsoids)
        if m.violation(x) >= -eps_act
    ]
    A = np.vstack(rows) if rows else np.zeros((0, n))
    return A, np.asarray(rhs, dtype=float), curved


def _polish_projection(region, v, x, eps_act, scale):
    """Exact projection candidate from the active set near x.

    Newton's method on the projection KKT system of the guessed active rows
    (box and affine actives as equalities, curved members by their boundary
    equations); the candidate is returned only when it passes the KKT
    verification, so a wrong guess costs nothing.
    """
    n = region.n
    A, b, curved = _active_rows(region, x, eps_act)
    la, k = A.shape[0], len(curved)
    if la + k == 0:
        return None

    p = np.array(x)
    w = np.zeros(la)
    mu = np.zeros(k)
    for _ in range(40):
        terms = [_boundary_terms(m, p, scale) for m in curved]
        if any(t is None for t in terms):
            return None
        grads = np.array([t[1] for t in terms]) if k else np.zeros((0, n))
        hsum = sum(m_i * t[2] for m_i, t in zip(mu, terms)) if k else 0.0
        F = np.concatenate(
            [
                p - v + A.T @ w + grads.T @ mu,
                A @ p - b,
                np.array([t[0] for t in terms]),
            ]
        )
        if np.max(np.abs(F)) <= 1e-13 * scale:
            break
        J = np.zeros((n + la + k, n + la + k))
        J[:n, :n] = np.eye(n) + hsum
        J[:n, n : n + la] = A.T
        J[:n, n + la :] = grads.T
        J[n : n + la, :n] = A
        J[n + la :, :n] = grads
        step, *_ = np.linalg.lstsq(J, -F, rcond=None)
        if not np.all(np.isfinite(step)):
            return None
        p = p + step[:n]
        w = w + step[n : n + la]
        mu = mu + step[n + la :]
    else:
        return None
    return _verify_projection(region, v, p, scale)


def project_region(region, v, tol=1e-10, max_iter=10000):
    """Euclidean projection of v onto the region via Dykstra's iteration.

    Sweeps cycle through the box and every member.  The iteration stops when
    a full sweep moves the iterate by at most tol and the iterate is feasible;
    for slow sweeps an active-set candidate is tried and accepted when it
    passes an exact optimality check (nearly parallel halfspaces make plain
    Dykstra creep, and the candidate then short-circuits the crawl).
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (region.n,):
        raise DimensionError(f"point has shape {v.shape}, region dimension {region.n}")
    members = region.members
    if not members:
        return region.clip_box(v)
    if region_violation(region, v) <= 0.0:
        return np.array(v)

    scale = 1.0 + float(np.linalg.norm(v))
    projectors = [region.clip_box] + [m.project for m in members]
    x = np.array(v)
    corrections = [np.zeros_like(v) for _ in projectors]
    best = (np.inf, np.inf, x)
    stalled = 0
    for sweep in range(1, max_iter + 1):
        x_prev = x
        for i, proj in enumerate(projectors):
            y = proj(x + corrections[i])
            corrections[i] = x + corrections[i] - y
            x = y
        change = float(np.max(np.abs(x - x_prev)))
        viol = max(region_violation(region, x), 0.0)
        key = (viol, float(np.linalg.norm(x - v)), x)
        if key[:2] < best[:2]:
            best = key
        if change <= tol or sweep % 20 == 0:
            # the ladder reaches far because sweeps can creep: tiny steps do
            # not mean the iterate is near the projection, so wide active-set
            # guesses are tried and the verification keeps wrong ones out
            for eps_act in (1e-9, 1e-6, 1e-3, 3e-2, 3e-1):
                cand = _polish_projection(region, v, x, eps_act * scale, scale)
                if cand is not None:
                    return cand
        if change <= tol and viol <= 1e-9 * scale:
            cand = _verify_projection(region, v, np.array(x), scale)
            if cand is not None:
                return cand
        stalled = stalled + 1 if change <= tol else 0
        if stalled >= 50:
            break
    if best[0] <= 1e-9 * scale:
        return best[2]
    raise ProjectionError(
        f"Dykstra projection did not reach tol={tol} in {max_iter} sweeps", best=best[2]
    )


def extend_region(region, extra):
    """Same region viewed in extra trailing coordinates that are left free."""
    pad = np.zeros(extra)
    affine = tuple(
        AffineInequality(np.concatenate([m.a, pad]), m.b) for m in region.affine
    )
    cones = tuple(
        SecondOrderCone(
            np.hstack([m.D, np.zeros((m.D.shape[0], extra))]),
            m.d,
            np.concatenate([m.e, pad]),
            m.f,
        )
        for m in region.cones
    )
    ellipsoids = []
    for m in region.ellipsoids:
        n = m.center.size
        shape = np.zeros((n + extra, n + extra))
        shape[:n, :n] = m.shape
        ellipsoids.append(Ellipsoid(np.concatenate([m.center, pad]), shape, m.radius))
    return ConvexRegion(
        np.concatenate([region.lower, np.full(extra, -np.inf)]),
        np.concatenate([region.upper, np.full(extra, np.inf)]),
        affine,
        cones,
        tuple(ellipsoids),
    )
