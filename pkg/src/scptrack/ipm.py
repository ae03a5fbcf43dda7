"""Primal-dual interior-point solver for the convex tracking subproblems.

The region is compiled to conic standard form

    min 0.5 x.P.x + q.x   s.t.  A x = b,   G x + s = h,   s in K,

with K a product of a nonnegative orthant (finite bounds, affine members)
and second-order cones (cone members; ellipsoids via a square root of the
shape matrix).  Steps are Mehrotra predictor-corrector with Nesterov-Todd
scaling and a 0.99 fraction-to-boundary rule.  Numerically dependent
equality rows are removed up front by rank-revealing QR.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import ProjectionError
from .region import _active_normals, _active_rows, _boundary_terms, project_region
from .subproblem import (
    SolveStatus,
    SolverOptions,
    SubproblemResiduals,
    SubproblemSolution,
)

_DIVERGE_DUAL = 1e10
_DIVERGE_OBJ = -1e10
_STALL_PRES = 1e-6


def _quad_max_step(a, b, c):
    """Largest alpha >= 0 with a*alpha^2 + b*alpha + c >= 0 given c >= 0."""
    if abs(a) < 1e-300:
        if b >= 0.0:
            return np.inf
        return c / -b
    disc = b * b - 4.0 * a * c
    if a > 0.0:
        # feasible outside the root interval
        if disc <= 0.0:
            return np.inf
        sq = np.sqrt(disc)
        r1 = (-b - sq) / (2.0 * a)
        r2 = (-b + sq) / (2.0 * a)
        if r2 <= 0.0:
            return np.inf
        return r1 if r1 > 0.0 else 0.0
    # a < 0: feasible between the roots, which straddle alpha = 0
    sq = np.sqrt(max(disc, 0.0))
    return max((-b - sq) / (2.0 * a), 0.0)


class _Cones:
    """Block structure and Jordan/NT operations for R^l_+ x SOC x ... x SOC."""

    def __init__(self, l, soc_dims):
        self.l = l
        self.soc_dims = list(soc_dims)
        self.slices = []
        start = l
        for d in self.soc_dims:
            self.slices.append(slice(start, start + d))
            start += d
        self.dim = start
        self.degree = l + len(self.soc_dims)

    def unit(self):
        e = np.zeros(self.dim)
        e[: self.l] = 1.0
        for sl in self.slices:
            e[sl.start] = 1.0
        return e

    def margin(self, u):
        vals = [np.inf]
        if self.l:
            vals.append(np.min(u[: self.l]))
        for sl in self.slices:
            blk = u[sl]
            vals.append(blk[0] - np.linalg.norm(blk[1:]))
        return min(vals)

    def max_step(self, u, du):
        alpha = np.inf
        # overflow to inf in the ratios is the intended limit behaviour
        with np.errstate(over="ignore", divide="ignore"):
            if self.l:
                neg = du[: self.l] < 0.0
                if np.any(neg):
                    alpha = np.min(-u[: self.l][neg] / du[: self.l][neg])
            for sl in self.slices:
                ub, db = u[sl], du[sl]
                a = db[0] ** 2 - db[1:] @ db[1:]
                b = 2.0 * (ub[0] * db[0] - ub[1:] @ db[1:])
                c = ub[0] ** 2 - ub[1:] @ ub[1:]
                alpha = min(alpha, _quad_max_step(a, b, max(c, 0.0)))
        return alpha

    def prod(self, a, b):
        out = np.empty(self.dim)
        out[: self.l] = a[: self.l] * b[: self.l]
        for sl in self.slices:
            ab, bb = a[sl], b[sl]
            out[sl.start] = ab @ bb
            out[sl.start + 1 : sl.stop] = ab[0] * bb[1:] + bb[0] * ab[1:]
        return out

    def inv_prod(self, lam, d):
        """Solve lam o x = d blockwise."""
        out = np.empty(self.dim)
        out[: self.l] = d[: self.l] / lam[: self.l]
        for sl in self.slices:
            lb, db = lam[sl], d[sl]
            det = lb[0] ** 2 - lb[1:] @ lb[1:]
            x0 = (lb[0] * db[0] - lb[1:] @ db[1:]) / det
            out[sl.start] = x0
            out[sl.start + 1 : sl.stop] = (db[1:] - x0 * lb[1:]) / lb[0]
        return out


class _Scaling:
    """Nesterov-Todd scaling point: W z = W^{-1} s = lam."""

    def __init__(self, cones, s, z):
        self.cones = cones
        if cones.l:
            # iterates headed for an unboundedness verdict can drive one of the
            # pair to a denormal; the clamp keeps the scaling finite until the
            # divergence guards fire
            with np.errstate(over="ignore", divide="ignore"):
                ratio = np.clip(s[: cones.l] / z[: cones.l], 1e-280, 1e280)
            self.w_orth = np.sqrt(ratio)
        else:
            self.w_orth = np.empty(0)
        self.soc_W = []
        self.soc_Winv = []
        for sl in cones.slices:
            sb, zb = s[sl], z[sl]
            js = max((sb[0] - np.linalg.norm(sb[1:])) * (sb[0] + np.linalg.norm(sb[1:])), 1e-280)
            jz = max((zb[0] - np.linalg.norm(zb[1:])) * (zb[0] + np.linalg.norm(zb[1:])), 1e-280)
            sbar, zbar = sb / np.sqrt(js), zb / np.sqrt(jz)
            gamma = np.sqrt((1.0 + sbar @ zbar) / 2.0)
            wbar = np.array(sbar)
            wbar[0] += zbar[0]
            wbar[1:] -= zbar[1:]
            wbar /= 2.0 * gamma
            v = np.array(wbar)
            v[0] += 1.0
            v /= np.sqrt(2.0 * (wbar[0] + 1.0))
            eta = (js / jz) ** 0.25
            jmat = np.diag(np.concatenate([[1.0], -np.ones(sl.stop - sl.start - 1)]))
            W = eta * (2.0 * np.outer(v, v) - jmat)
            Winv = (2.0 * np.outer(jmat @ v, jmat @ v) - jmat) / eta
            self.soc_W.append(W)
            self.soc_Winv.append(Winv)
        self.lam = self.mul_w(z)

    def mul_w(self, u):
        out = np.empty(self.cones.dim)
        out[: self.cones.l] = self.w_orth * u[: self.cones.l]
        for W, sl in zip(self.soc_W, self.cones.slices):
            out[sl] = W @ u[sl]
        return out

    def mul_winv2(self, u):
        out = np.empty(self.cones.dim)
        out[: self.cones.l] = u[: self.cones.l] / self.w_orth**2
        for Winv, sl in zip(self.soc_Winv, self.cones.slices):
            out[sl] = Winv @ (Winv @ u[sl])
        return out

    def winv2_mat(self, G):
        out = np.empty_like(G)
        out[: self.cones.l] = G[: self.cones.l] / self.w_orth[:, None] ** 2
        for Winv, sl in zip(self.soc_Winv, self.cones.slices):
            out[sl] = Winv @ (Winv @ G[sl])
        return out


def assemble_cones(region):
    """Conic rows (G, h) and block structure for a region."""
    n = region.n
    rows, rhs = [], []
    for i in np.flatnonzero(np.isfinite(region.lower)):
        row = np.zeros(n)
        row[i] = -1.0
        rows.append(row)
        rhs.append(-region.lower[i])
    for i in np.flatnonzero(np.isfinite(region.upper)):
        row = np.zeros(n)
        row[i] = 1.0
        rows.append(row)
        rhs.append(region.upper[i])
    for m in region.affine:
        rows.append(np.array(m.a))
        rhs.append(m.b)
    l = len(rows)
    soc_dims = []
    for m in region.cones:
        rows.append(-m.e)
        rhs.append(m.f)
        for r, dval in zip(m.D, m.d):
            rows.append(-r)
            rhs.append(dval)
        soc_dims.append(m.D.shape[0] + 1)
    for m in region.ellipsoids:
        lam, u = np.linalg.eigh(m.shape)
        keep = lam > 1e-14 * max(1.0, lam[-1])
        dm = (np.sqrt(lam[keep])[:, None]) * u[:, keep].T
        rows.append(np.zeros(n))
        rhs.append(np.sqrt(m.radius))
        off = dm @ m.center
        for r, o in zip(dm, off):
            rows.append(-r)
            rhs.append(-o)
        soc_dims.append(dm.shape[0] + 1)
    if rows:
        G = np.vstack(rows)
        h = np.asarray(rhs, dtype=float)
    else:
        G = np.zeros((0, n))
        h = np.zeros(0)
    return G, h, _Cones(l, soc_dims)


def _presolve_equalities(A, b):
    """Rows kept by rank-revealing QR (threshold 1e-10 * ||A||)."""
    m = A.shape[0]
    if m == 0:
        return np.array([], dtype=int)
    _, r, piv = scipy.linalg.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    thresh = 1e-10 * max(np.linalg.norm(A, 2), 1e-300)
    rank = int(np.sum(diag > thresh))
    return np.sort(piv[:rank])


def _solve_bordered(Hm, A, rhs):
    n, p = Hm.shape[0], A.shape[0]
    K = np.zeros((n + p, n + p))
    K[:n, :n] = Hm
    if p:
        K[:n, n:] = A.T
        K[n:, :n] = A
    for reg in (0.0, 1e-12, 1e-8):
        Kr = np.array(K)
        if reg:
            Kr[:n, :n] += reg * max(1.0, np.abs(Hm).max()) * np.eye(n)
            if p:
                Kr[n:, n:] -= reg * np.eye(p)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            try:
                lu = scipy.linalg.lu_factor(Kr)
            except (scipy.linalg.LinAlgError, ValueError):
                continue
            sol = scipy.linalg.lu_solve(lu, rhs)
        if np.all(np.isfinite(sol)):
            return sol, lu
    raise np.linalg.LinAlgError("bordered KKT system is numerically singular")


def _safe_project(region, v):
    try:
        return project_region(region, v)
    except ProjectionError as err:  # non-converged iterates can sit far out
        return err.best


def _polish_duals(sp, x, grad0):
    """Equality multipliers refit against the active normals at x.

    The interior-point duals for constraints that sit on zero rows of the
    conic matrix converge slowly; a bounded least-squares refit of
    grad0 + A_eq' y + N' lam = 0 (lam >= 0) recovers the limit multipliers
    directly once x is accurate.
    """
    normals = _active_normals(sp.region, x, 1e-7 * (1.0 + float(np.linalg.norm(x))))
    nmat = np.array(normals).T if normals else np.zeros((sp.n, 0))
    m, k = sp.m, nmat.shape[1]
    if m + k == 0:
        return None
    M = np.hstack([sp.A_eq.T, nmat])
    lb = np.concatenate([np.full(m, -np.inf), np.zeros(k)])
    ub = np.full(m + k, np.inf)
    try:
        res = scipy.optimize.lsq_linear(M, -grad0, bounds=(lb, ub))
    except (ValueError, np.linalg.LinAlgError):
        return None
    if not np.all(np.isfinite(res.x)):
        return None
    return res.x[:m]


def _primal_polish(sp, x, y, tik):
    """Newton refinement of (x, y) on the KKT system of the active set at x.

    The interior-point iterate is accurate to about sqrt(mu) when a curved
    member is active; one Newton solve on the boundary equations restores
    full precision.  Candidates are screened by the caller through the
    natural-map residuals, so a wrong active-set guess is harmless.
    """
    region = sp.region
    n, m = sp.n, sp.m
    scale = 1.0 + float(np.linalg.norm(x))
    for eps_act in (1e-7 * scale, 1e-5 * scale, 1e-3 * scale):
        A, b, curved = _active_rows(region, x, eps_act)
        la, k = A.shape[0], len(curved)
        p = np.array(x)
        yy = np.array(y)
        w = np.zeros(la)
        mu = np.zeros(k)
        ok = False
        for _ in range(40):
            terms = [_boundary_terms(mm, p, scale) for mm in curved]
            if any(t is None for t in terms):
                break
            grads = np.array([t[1] for t in terms]) if k else np.zeros((0, n))
            hsum = sum(m_i * t[2] for m_i, t in zip(mu, terms)) if k else 0.0
            F = np.concatenate(
                [
                    sp.gradient(p) + tik * p + sp.A_eq.T @ yy + A.T @ w + grads.T @ mu,
                    sp.A_eq @ (p - sp.x_ref) + sp.b_eq,
                    A @ p - b,
                    np.array([t[0] for t in terms]),
                ]
            )
            if np.max(np.abs(F)) <= 1e-12 * scale:
                ok = True
                break
            J = np.zeros((n + m + la + k, n + m + la + k))
            J[:n, :n] = sp.H + tik * np.eye(n) + hsum
            J[:n, n : n + m] = sp.A_eq.T
            J[:n, n + m : n + m + la] = A.T
            J[:n, n + m + la :] = grads.T
            J[n : n + m, :n] = sp.A_eq
            J[n + m : n + m + la, :n] = A
            J[n + m + la :, :n] = grads
            step, *_ = np.linalg.lstsq(J, -F, rcond=None)
            if not np.all(np.isfinite(step)):
                break
            p = p + step[:n]
            yy = yy + step[n : n + m]
            w = w + step[n + m : n + m + la]
            mu = mu + step[n + m + la :]
        if ok:
            return p, yy
    return None


def _finish(sp, x, y_kept, kept, s, z, status, iters, opts, regularized=False):
    y = np.zeros(sp.m)
    if kept.size:
        y[kept] = y_kept
    # residuals are measured against the objective actually solved, so a
    # tikhonov term (when active) belongs in the gradient
    grad0 = sp.gradient(x) + opts.tikhonov * x
    grad = grad0 + sp.A_eq.T @ y
    stat = float(np.linalg.norm(x - _safe_project(sp.region, x - grad)))
    if stat > opts.tol and status in (SolveStatus.OPTIMAL, SolveStatus.MAX_ITER):
        y2 = _polish_duals(sp, x, grad0)
        if y2 is not None:
            grad2 = grad0 + sp.A_eq.T @ y2
            stat2 = float(np.linalg.norm(x - _safe_project(sp.region, x - grad2)))
            if stat2 < stat:
                y, stat = y2, stat2
    if stat > 10.0 * opts.tol and status in (SolveStatus.OPTIMAL, SolveStatus.MAX_ITER):
        pol = _primal_polish(sp, x, y, opts.tikhonov)
        if pol is not None:
            x3, y3 = pol
            grad3 = sp.gradient(x3) + opts.tikhonov * x3 + sp.A_eq.T @ y3
            stat3 = float(np.linalg.norm(x3 - _safe_project(sp.region, x3 - grad3)))
            dist3 = float(np.linalg.norm(x3 - _safe_project(sp.region, x3)))
            if stat3 < stat and dist3 <= opts.tol:
                x, y, stat = x3, y3, stat3
    r_eq = sp.A_eq @ (x - sp.x_ref) + sp.b_eq
    eq = float(np.linalg.norm(r_eq))
    eq_kept = float(np.linalg.norm(r_eq[kept])) if kept.size < sp.m else eq
    dist = float(np.linalg.norm(x - _safe_project(sp.region, x)))
    gap = float(s @ z) if s is not None else 0.0
    res = SubproblemResiduals(stat, eq, dist, gap)
    # the internal conic gap is reported but never gated on: natural-map
    # stationarity of the returned (x, y) already certifies complementarity,
    # while s.z can stall above tol when a cone is active at the solution
    within = stat <= 10.0 * opts.tol and eq <= opts.tol and dist <= opts.tol
    bad_eq = eq > 1e-6 * (1.0 + np.linalg.norm(sp.b_eq))
    if status is SolveStatus.OPTIMAL:
        # dependent rows were dropped; an inconsistent right-hand side
        # surfaces here as a large equality residual
        if bad_eq:
            status = SolveStatus.INFEASIBLE
    elif status is SolveStatus.MAX_ITER:
        if bad_eq and eq_kept <= 1e-6 * (1.0 + np.linalg.norm(sp.b_eq)):
            # the reduced system was solved, only dropped rows are violated
            status = SolveStatus.INFEASIBLE
        elif within:
            # the iteration stalled on a point that already meets the contract
            status = SolveStatus.OPTIMAL
    return SubproblemSolution(
        x=x, y=y, status=status, iterations=iters, residuals=res, regularized=regularized
    )


def _solve_no_cones(sp, P, q, A, b, kept, opts):
    """Equality-constrained QP fallback for regions without members."""
    n = sp.n
    x_ls, *_ = np.linalg.lstsq(A, b, rcond=None) if A.shape[0] else (np.zeros(n),)
    if A.shape[0] and np.linalg.norm(A @ x_ls - b) > 1e-8 * (1.0 + np.linalg.norm(b)):
        return _finish(sp, x_ls, np.zeros(kept.size), kept, None, None,
                       SolveStatus.INFEASIBLE, 0, opts)
    if A.shape[0]:
        _, sv, vt = np.linalg.svd(A)
        rank = int(np.sum(sv > 1e-12 * (sv[0] if sv.size else 1.0)))
        N = vt[rank:].T
    else:
        N = np.eye(n)
    Hr = N.T @ P @ N
    gr = N.T @ (P @ x_ls + q)
    lam, u = np.linalg.eigh((Hr + Hr.T) / 2.0) if Hr.size else (np.zeros(0), np.zeros((0, 0)))
    if Hr.size:
        null_mask = lam <= 1e-12 * max(1.0, abs(lam[-1]) if lam.size else 1.0)
        if np.any(null_mask) and np.linalg.norm((u[:, null_mask].T @ gr)) > 1e-10:
            return _finish(sp, x_ls, np.zeros(kept.size), kept, None, None,
                           SolveStatus.UNBOUNDED, 0, opts)
        v = -u @ np.divide(u.T @ gr, lam, out=np.zeros_like(lam), where=~null_mask)
        x = x_ls + N @ v
    else:
        x = x_ls
    y, *_ = np.linalg.lstsq(A.T, -(P @ x + q), rcond=None) if A.shape[0] else (np.zeros(0),)
    return _finish(sp, x, y, kept, None, None, SolveStatus.OPTIMAL, 0, opts)


def _ipm(sp, opts, warm):
    n = sp.n
    tik = opts.tikhonov
    P = sp.H + (tik * np.eye(n) if tik else 0.0)
    P = np.atleast_2d(P)
    q = sp.grad_const
    kept = _presolve_equalities(sp.A_eq, sp.b_eq)
    A = sp.A_eq[kept]
    b = (sp.A_eq @ sp.x_ref - sp.b_eq)[kept]
    G, h, cones = assemble_cones(sp.region)
    if cones.dim == 0:
        return _solve_no_cones(sp, P, q, A, b, kept, opts)

    p = A.shape[0]
    e = cones.unit()

    if warm is not None and opts.warm_start:
        x = np.array(warm.x, dtype=float)
        y = np.array(warm.y, dtype=float)[kept] if p else np.zeros(0)
        s = h - G @ x
        shift = max(0.0, 1e-4 * (1.0 + np.linalg.norm(h, np.inf)) - cones.margin(s))
        s = s + shift * e
        z = 1e-2 * cones.inv_prod(s, e)  # centred dual guess: s o z ~ 1e-2 e
        if cones.margin(z) <= 0.0:
            z = np.array(e)
    else:
        Hm = P + G.T @ G
        rhs = np.concatenate([-q + G.T @ h, b])
        sol, _ = _solve_bordered(Hm, A, rhs)
        x, y = sol[:n], sol[n:]
        zhat = G @ x - h
        s = -zhat
        ms = cones.margin(s)
        if ms <= 0.0:
            s = s + (1.0 - ms) * e
        z = np.array(zhat)
        mz = cones.margin(z)
        if mz <= 0.0:
            z = z + (1.0 - mz) * e

    best = None
    best_ver = None
    n_ver = 0
    status = SolveStatus.MAX_ITER
    it = 0
    small_steps = 0
    b_scale = max(1.0, np.linalg.norm(b) if p else 0.0, np.linalg.norm(h))
    q_scale = max(1.0, np.linalg.norm(q))

    for it in range(1, opts.max_iter + 1):
        rx = P @ x + q + G.T @ z + (A.T @ y if p else 0.0)
        ry = A @ x - b if p else np.zeros(0)
        rz = G @ x + s - h
        gap = float(s @ z)
        mu = gap / cones.degree
        pobj = float(0.5 * x @ P @ x + q @ x)
        pres = max(np.linalg.norm(ry) if p else 0.0, np.linalg.norm(rz)) / b_scale
        dres = np.linalg.norm(rx) / q_scale
        # dres is informational only: null-row dual components drift once mu
        # collapses, so iterate selection tracks pres and the relative gap
        merit = max(pres, gap / max(1.0, abs(pobj)))
        if best is None or merit < best[0]:
            best = (merit, np.array(x), np.array(y), np.array(s), np.array(z), pobj, pres)
        if opts.verbose:
            print(f"  it={it:3d} pres={pres:9.2e} dres={dres:9.2e} gap={gap:9.2e} pobj={pobj:12.6e}")

        # conic dual residuals can stay noisy once mu collapses (components of z
        # that multiply zero rows of G drift freely), so acceptance is decided on
        # the natural-map residuals of the (x, y) pair that is actually returned
        tol = opts.tol * 0.5
        if pres <= tol and (gap <= tol * max(1.0, abs(pobj)) or mu <= tol) and n_ver < 60:
            n_ver += 1
            sol = _finish(sp, x, y, kept, s, z, SolveStatus.MAX_ITER, it, opts)
            if sol.status in (SolveStatus.OPTIMAL, SolveStatus.INFEASIBLE):
                return sol
            if best_ver is None or sol.residuals.total < best_ver.residuals.total:
                best_ver = sol

        if pobj < _DIVERGE_OBJ * max(1.0, q_scale) or np.linalg.norm(x) > 1e12:
            status = SolveStatus.UNBOUNDED
            break
        if (np.linalg.norm(z, 1) + (np.linalg.norm(y, 1) if p else 0.0)) > _DIVERGE_DUAL and (
            pres > _STALL_PRES
        ):
            status = SolveStatus.INFEASIBLE
            break

        W = _Scaling(cones, s, z)
        lam = W.lam
        Hm = P + G.T @ W.winv2_mat(G)

        # predictor: target zero complementarity
        dlam_aff = -lam
        rz_mod = rz + W.mul_w(dlam_aff)
        rhs = np.concatenate([-rx - G.T @ W.mul_winv2(rz_mod), -ry])
        try:
            sol_vec, lu = _solve_bordered(Hm, A, rhs)
        except np.linalg.LinAlgError:
            status = SolveStatus.MAX_ITER
            break
        dx = sol_vec[:n]
        dy = sol_vec[n:]
        dz = W.mul_winv2(G @ dx + rz_mod)
        ds = -rz - G @ dx
        alpha_aff = min(cones.max_step(s, ds), cones.max_step(z, dz), 1.0)
        gap_aff = float((s + alpha_aff * ds) @ (z + alpha_aff * dz))
        sigma = min(1.0, max(0.0, gap_aff / gap)) ** 3

        # corrector: recentre and compensate the affine cross term
        corr = cones.prod(W.mul_winv2(W.mul_w(ds)), W.mul_w(dz))  # (W^-1 ds) o (W dz)
        rhs_comp = sigma * mu * e - cones.prod(lam, lam) - corr
        dlam = cones.inv_prod(lam, rhs_comp)
        rz_mod = rz + W.mul_w(dlam)
        rhs = np.concatenate([-rx - G.T @ W.mul_winv2(rz_mod), -ry])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            sol_vec = scipy.linalg.lu_solve(lu, rhs)
        dx = sol_vec[:n]
        dy = sol_vec[n:]
        dz = W.mul_winv2(G @ dx + rz_mod)
        ds = -rz - G @ dx

        alpha = min(1.0, opts.step_fraction * min(cones.max_step(s, ds), cones.max_step(z, dz)))
        for _ in range(40):
            if (
                cones.margin(s + alpha * ds) > 0.0
                and cones.margin(z + alpha * dz) > 0.0
            ):
                break
            alpha *= 0.5
        else:
            status = SolveStatus.MAX_ITER
            break
        x = x + alpha * dx
        y = y + alpha * dy if p else y
        s = s + alpha * ds
        z = z + alpha * dz
        if opts.verbose:
            print(f"         alpha={alpha:9.2e} sigma={sigma:9.2e}")
        small_steps = small_steps + 1 if alpha < 1e-8 else 0
        if small_steps >= 3:
            status = SolveStatus.INFEASIBLE if pres > _STALL_PRES else SolveStatus.MAX_ITER
            break

    if status is SolveStatus.MAX_ITER and best is not None:
        _, bx, by, bs, bz, bpobj, bpres = best
        if bpres > _STALL_PRES:
            status = SolveStatus.INFEASIBLE
        elif bpobj < _DIVERGE_OBJ:
            status = SolveStatus.UNBOUNDED
        x, y, s, z = bx, by, bs, bz
    sol = _finish(sp, x, y, kept, s, z, status, it, opts)
    if (
        best_ver is not None
        and sol.status is SolveStatus.MAX_ITER
        and best_ver.residuals.total < sol.residuals.total
    ):
        return replace(best_ver, iterations=it)
    return sol


def solve_subproblem(sp, opts=None, warm=None):
    """Solve one convex subproblem; see SolverOptions for controls.

    When the curvature model is zero and the solve diverges toward an
    unbounded ray, one retry with tikhonov = 1e-6 (1 + ||c||) is attempted
    and flagged on the returned solution (tikhonov_retry option).
    """
    opts = opts or SolverOptions()
    sol = _ipm(sp, opts, warm)
    if (
        sol.status is SolveStatus.UNBOUNDED
        and opts.tikhonov_retry
        and opts.tikhonov == 0.0
        and not np.any(sp.H)
    ):
        tik = 1e-6 * (1.0 + np.linalg.norm(sp.c))
        sol2 = _ipm(sp, replace(opts, tikhonov=tik), warm)
        return replace(sol2, regularized=True)
    return sol
