"""Desk-scale NMPC benchmark: a cascade of tanks with Torricelli outflow.

A single inflow feeds the first tank and each tank drains into the next
through q = c_i sqrt(h_i).  Multiple shooting over H intervals turns the
steady-state tracking NMPC into a parametric NLP whose parameter is the
measured initial state: equality rows pin s_0 to the parameter and chain
the integrated dynamics across shooting nodes, the region collects the
control and state boxes plus a terminal ellipsoid, and the quadratic
tracking objective is routed through an epigraph slack so the tracked
cost is linear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, DimensionError, ModelError, UsageError
from .problem import ParametricNLP, PrimalDual, QuadraticObjective, slack_reformulate
from .region import ConvexRegion, Ellipsoid

_EPS_H = 1e-6  # smoothing floor under the outflow square root
_SAMPLE_SEED = 734  # fixed seed for the invariance sample
_N_SAMPLES = 500


@dataclass(frozen=True, eq=False)
class CascadeConfig:
    """Plant and horizon description for the tank-cascade benchmark.

    One control, the inflow to the first tank.  Scalars broadcast to all
    tanks.  Weights left as None follow the scale-aware recipe
    0.01/(w_s_i^2 + 1) per state and 4/((u_lo + u_hi)^2 + 1) for the
    control.
    """

    n_tanks: int = 3
    outflow_coeff: object = 1.0
    surface: object = 1.0
    horizon: int = 8
    dt: float = 0.5
    state_weight: Optional[object] = None
    control_weight: Optional[object] = None
    u_lo: float = 0.0
    u_hi: float = 4.0
    h_lo: object = 0.0
    h_hi: object = np.inf
    terminal_radius_scale: float = 0.9
    n_substeps: int = 4

    def __post_init__(self):
        if self.n_tanks < 1:
            raise ConfigError("n_tanks must be at least 1")
        if self.horizon < 2:
            raise ConfigError("horizon must be at least 2 intervals")
        if self.dt <= 0.0:
            raise ConfigError("dt must be positive")
        if self.n_substeps < 1:
            raise ConfigError("n_substeps must be at least 1")
        if not 0.0 < self.terminal_radius_scale <= 1.0:
            raise ConfigError("terminal_radius_scale must lie in (0, 1]")
        for name in ("outflow_coeff", "surface", "h_lo", "h_hi"):
            value = np.broadcast_to(
                np.asarray(getattr(self, name), dtype=float), (self.n_tanks,)
            ).copy()
            value.flags.writeable = False
            object.__setattr__(self, name, value)
        if np.any(self.outflow_coeff <= 0.0):
            raise ConfigError("outflow coefficients must be positive")
        if np.any(self.surface <= 0.0):
            raise ConfigError("tank surfaces must be positive")
        if not self.u_lo < self.u_hi:
            raise ConfigError("control box is empty")
        if np.any(self.h_lo >= self.h_hi):
            raise ConfigError("state box is empty")

    @property
    def n_w(self):
        return self.n_tanks

    @property
    def n_x(self):
        """Decision variables before the objective slack is appended."""
        return self.horizon * (self.n_tanks + 1) + self.n_tanks

    @property
    def n_eq(self):
        return (self.horizon + 1) * self.n_tanks


def state_slice(cfg, i):
    """Columns of shooting node s_i in the decision vector, 0 <= i <= H."""
    if not 0 <= i <= cfg.horizon:
        raise UsageError(f"state index {i} outside horizon {cfg.horizon}")
    start = i * (cfg.n_tanks + 1)
    return slice(start, start + cfg.n_tanks)


def control_slice(cfg, i):
    """Columns of control u_i in the decision vector, 0 <= i < H."""
    if not 0 <= i < cfg.horizon:
        raise UsageError(f"control index {i} outside horizon {cfg.horizon}")
    start = i * (cfg.n_tanks + 1) + cfg.n_tanks
    return slice(start, start + 1)


@dataclass(frozen=True, eq=False)
class CascadeDynamics:
    """Tank levels: h' = (q_in - q_out)/surface with q_out = c.sqrt(h).

    The square root is smoothed as sqrt(max(h, 1e-6)) so the dynamics
    stay differentiable when a tank runs empty.  rhs broadcasts over
    leading axes (levels on the trailing axis); the partials expect a
    single state.
    """

    coeff: np.ndarray
    surface: np.ndarray

    def rhs(self, w, u):
        w = np.asarray(w, dtype=float)
        u = np.asarray(u, dtype=float)
        q = self.coeff * np.sqrt(np.maximum(w, _EPS_H))
        inflow = np.concatenate([u, q[..., :-1]], axis=-1)
        return (inflow - q) / self.surface

    def jac_state(self, w, u):
        dq = np.where(
            w > _EPS_H, self.coeff / (2.0 * np.sqrt(np.maximum(w, _EPS_H))), 0.0
        )
        jac = np.diag(-dq / self.surface)
        rows = np.arange(1, w.size)
        jac[rows, rows - 1] = dq[:-1] / self.surface[1:]
        return jac

    def jac_control(self, w, u):
        jac = np.zeros((w.size, 1))
        jac[0, 0] = 1.0 / self.surface[0]
        return jac


def rk4_step(f, s, u, dt, n_substeps=4):
    """Classical RK4 over equal substeps, forward values only.

    Broadcasts over leading axes of (s, u) whenever f.rhs does.
    """
    w = np.asarray(s, dtype=float)
    h = dt / n_substeps
    for _ in range(n_substeps):
        k1 = f.rhs(w, u)
        k2 = f.rhs(w + 0.5 * h * k1, u)
        k3 = f.rhs(w + 0.5 * h * k2, u)
        k4 = f.rhs(w + h * k3, u)
        w = w + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
    return w


def rk4_step_with_tangents(f, s, u, dt, n_substeps=4):
    """One shooting-interval integration with exact discrete tangents.

    Returns (w_next, dw_next/ds, dw_next/du).  The tangent matrices
    differentiate the RK4 recursion itself, not the underlying flow, so
    they match finite differences of this map to rounding.
    """
    w = np.asarray(s, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    eye = np.eye(w.size)
    A = np.eye(w.size)
    B = np.zeros((w.size, u.size))
    h = dt / n_substeps
    for _ in range(n_substeps):
        k1 = f.rhs(w, u)
        w2 = w + 0.5 * h * k1
        k2 = f.rhs(w2, u)
        w3 = w + 0.5 * h * k2
        k3 = f.rhs(w3, u)
        w4 = w + h * k3
        k4 = f.rhs(w4, u)
        # stage tangents by the chain rule through the stage states
        K1 = f.jac_state(w, u)
        K2 = f.jac_state(w2, u) @ (eye + 0.5 * h * K1)
        K3 = f.jac_state(w3, u) @ (eye + 0.5 * h * K2)
        K4 = f.jac_state(w4, u) @ (eye + h * K3)
        L1 = f.jac_control(w, u)
        L2 = f.jac_state(w2, u) @ (0.5 * h * L1) + f.jac_control(w2, u)
        L3 = f.jac_state(w3, u) @ (0.5 * h * L2) + f.jac_control(w3, u)
        L4 = f.jac_state(w4, u) @ (h * L3) + f.jac_control(w4, u)
        A_sub = eye + (h / 6.0) * (K1 + 2.0 * (K2 + K3) + K4)
        B_sub = (h / 6.0) * (L1 + 2.0 * (L2 + L3) + L4)
        w = w + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        A = A_sub @ A
        B = A_sub @ B + B_sub
    return w, A, B


def steady_state(cfg, u_s):
    """Levels that pass a constant inflow u_s through every tank."""
    u = float(u_s)
    if u <= 0.0:
        raise ConfigError("steady inflow must be positive")
    levels = (u / cfg.outflow_coeff) ** 2
    if np.any(levels <= _EPS_H):
        raise ConfigError("steady levels fall below the smoothing floor")
    return levels, np.array([u])


def _steady_pair(cfg, steady):
    w_s, u_s = steady
    w_s = np.atleast_1d(np.asarray(w_s, dtype=float))
    u_s = np.atleast_1d(np.asarray(u_s, dtype=float))
    if w_s.shape != (cfg.n_tanks,):
        raise DimensionError(f"steady levels have shape {w_s.shape}")
    if u_s.shape != (1,):
        raise DimensionError(f"steady control has shape {u_s.shape}")
    return w_s, u_s


def cascade_weights(cfg, steady):
    """Diagonal tracking weights (states, control) with the default recipe."""
    w_s, _ = _steady_pair(cfg, steady)
    if cfg.state_weight is None:
        p = 0.01 / (w_s**2 + 1.0)
    else:
        p = np.broadcast_to(
            np.asarray(cfg.state_weight, dtype=float), (cfg.n_tanks,)
        ).copy()
    if cfg.control_weight is None:
        q = np.array([4.0 / ((cfg.u_lo + cfg.u_hi) ** 2 + 1.0)])
    else:
        q = np.broadcast_to(np.asarray(cfg.control_weight, dtype=float), (1,)).copy()
    if np.any(p <= 0.0) or np.any(q <= 0.0):
        raise ConfigError("tracking weights must be positive")
    return np.diag(p), np.diag(q)


def _solve_dare(A, B, P, Q):
    """Fixed-point iteration for the discrete Riccati equation.

    Returns (S, K) with S the cost-to-go matrix and K the feedback gain;
    divergence or failure to settle reports the linearization as not
    stabilizable.
    """
    S = np.array(P)
    for _ in range(20000):
        BtS = B.T @ S
        gain = np.linalg.solve(Q + BtS @ B, BtS @ A)
        S_next = P + A.T @ S @ (A - B @ gain)
        S_next = (S_next + S_next.T) / 2.0
        delta = float(np.max(np.abs(S_next - S)))
        S = S_next
        if not np.isfinite(delta) or np.max(np.abs(S)) > 1e12:
            raise ModelError("riccati iteration diverged; linearization not stabilizable")
        if delta <= 1e-12 * max(1.0, float(np.max(np.abs(S)))):
            BtS = B.T @ S
            return S, np.linalg.solve(Q + BtS @ B, BtS @ A)
    raise ModelError("riccati iteration did not settle")


def terminal_ellipsoid(cfg, steady):
    """Terminal set (S, r): Riccati matrix, sampled-invariance radius.

    S solves the discrete Riccati equation of the one-interval
    linearization at the steady pair.  The radius is the largest sampled
    level rho (geometric search, then bisection) such that 500 seeded
    boundary states of {dw : dw.S.dw = rho}, driven by the feedback
    u = u_s - K dw, respect the control box and land inside the same
    level set after one integration interval; the returned r scales that
    level by terminal_radius_scale.
    """
    w_s, u_s = _steady_pair(cfg, steady)
    dyn = CascadeDynamics(cfg.outflow_coeff, cfg.surface)
    _, A_d, B_d = rk4_step_with_tangents(dyn, w_s, u_s, cfg.dt, cfg.n_substeps)
    P, Q = cascade_weights(cfg, steady)
    S, K = _solve_dare(A_d, B_d, P, Q)

    lam, U = np.linalg.eigh(S)
    if lam[0] <= 0.0:
        raise ModelError("terminal matrix is numerically singular")
    # rows v with v.S.v = 1: unit directions mapped through S^(-1/2)
    rng = np.random.default_rng(_SAMPLE_SEED)
    raw = rng.standard_normal((_N_SAMPLES, cfg.n_tanks))
    raw /= np.linalg.norm(raw, axis=1, keepdims=True)
    dirs = raw @ (U / np.sqrt(lam)) @ U.T

    def invariant(rho):
        dw = math.sqrt(rho) * dirs
        ctrl = u_s[None, :] - dw @ K.T
        if np.any(ctrl < cfg.u_lo - 1e-12) or np.any(ctrl > cfg.u_hi + 1e-12):
            return False
        w_next = rk4_step(dyn, w_s[None, :] + dw, ctrl, cfg.dt, cfg.n_substeps)
        dv = w_next - w_s[None, :]
        return bool(np.max(np.einsum("ij,jk,ik->i", dv, S, dv)) <= rho)

    rho = 1e-6
    while rho > 1e-14 and not invariant(rho):
        rho *= 0.25
    if rho <= 1e-14:
        raise ConfigError(
            "no invariant terminal radius found; widen the control box or weights"
        )
    while rho < 1e9 and invariant(rho * 4.0):
        rho *= 4.0
    if rho < 1e9:
        lo, hi = rho, rho * 4.0
        for _ in range(50):
            mid = math.sqrt(lo * hi)
            if invariant(mid):
                lo = mid
            else:
                hi = mid
        rho = lo
    return S, cfg.terminal_radius_scale * rho


def cascade_problem(cfg, steady):
    """Multiple-shooting NMPC as a parametric NLP in the measured state.

    Decision vector (s_0, u_0, ..., s_{H-1}, u_{H-1}, s_H) plus one
    objective slack; equality rows s_0 - xi and w(s_i, u_i) - s_{i+1};
    region = control and state boxes with the terminal ellipsoid on s_H.
    The steady pair must zero the dynamics to 1e-10.
    """
    w_s, u_s = _steady_pair(cfg, steady)
    dyn = CascadeDynamics(cfg.outflow_coeff, cfg.surface)
    resid = float(np.max(np.abs(dyn.rhs(w_s, u_s))))
    if resid > 1e-10:
        raise UsageError(f"steady pair has dynamics residual {resid:.3e}")
    S, r = terminal_ellipsoid(cfg, steady)
    P, Q = cascade_weights(cfg, steady)

    nw, H = cfg.n_tanks, cfg.horizon
    n, m = cfg.n_x, cfg.n_eq
    dt, sub = cfg.dt, cfg.n_substeps
    s_at = [state_slice(cfg, i) for i in range(H + 1)]
    u_at = [control_slice(cfg, i) for i in range(H)]

    def g(x):
        out = np.empty(m)
        out[:nw] = x[s_at[0]]
        for i in range(H):
            w_next = rk4_step(dyn, x[s_at[i]], x[u_at[i]], dt, sub)
            out[(i + 1) * nw : (i + 2) * nw] = w_next - x[s_at[i + 1]]
        return out

    def g_jac(x):
        jac = np.zeros((m, n))
        jac[:nw, s_at[0]] = np.eye(nw)
        for i in range(H):
            _, A, B = rk4_step_with_tangents(dyn, x[s_at[i]], x[u_at[i]], dt, sub)
            rows = slice((i + 1) * nw, (i + 2) * nw)
            jac[rows, s_at[i]] = A
            jac[rows, u_at[i]] = B
            jac[rows, s_at[i + 1]] = -np.eye(nw)
        return jac

    def g_adjoint(x, y):
        out = np.zeros(n)
        out[s_at[0]] += y[:nw]
        for i in range(H):
            _, A, B = rk4_step_with_tangents(dyn, x[s_at[i]], x[u_at[i]], dt, sub)
            yi = y[(i + 1) * nw : (i + 2) * nw]
            out[s_at[i]] += A.T @ yi
            out[u_at[i]] += B.T @ yi
            out[s_at[i + 1]] -= yi
        return out

    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    for i in range(H):
        lower[s_at[i]], upper[s_at[i]] = cfg.h_lo, cfg.h_hi
        lower[u_at[i]], upper[u_at[i]] = cfg.u_lo, cfg.u_hi
    center = np.zeros(n)
    center[s_at[H]] = w_s
    shape = np.zeros((n, n))
    shape[s_at[H], s_at[H]] = S
    region = ConvexRegion(lower, upper, ellipsoids=(Ellipsoid(center, shape, r),))

    M = np.zeros((m, nw))
    M[:nw] = -np.eye(nw)

    base = ParametricNLP(
        c=np.zeros(n),
        g=g,
        g_adjoint=g_adjoint,
        M=M,
        region=region,
        g_jac=g_jac,
        name="cascade",
    )

    # tracking cost (x - ref).W.(x - ref) over stage and terminal blocks
    ref = steady_primal(cfg, steady)[:n]
    W = np.zeros((n, n))
    for i in range(H):
        W[s_at[i], s_at[i]] = P
        W[u_at[i], u_at[i]] = Q
    W[s_at[H], s_at[H]] = S
    objective = QuadraticObjective(2.0 * W, -2.0 * (W @ ref), float(ref @ W @ ref))
    return slack_reformulate(objective, base)


def steady_primal(cfg, steady):
    """Steady trajectory as a decision vector, objective slack included."""
    w_s, u_s = _steady_pair(cfg, steady)
    x = np.zeros(cfg.n_x + 1)
    for i in range(cfg.horizon):
        x[state_slice(cfg, i)] = w_s
        x[control_slice(cfg, i)] = u_s
    x[state_slice(cfg, cfg.horizon)] = w_s
    return x


def steady_start(cfg, steady):
    """Exact KKT point of the cascade problem at xi = w_s."""
    return PrimalDual(steady_primal(cfg, steady), np.zeros(cfg.n_eq))


class ClosedLoopPlant:
    """Parameter source for track(): the measured state of a rolling plant.

    Sample 0 is the supplied initial level vector; afterwards the plant
    applies the first control of the current iterate, integrates one
    interval with the benchmark integrator, adds a seeded disturbance
    bounded by noise x steady level per tank, and clips to the state
    box.  Returns None once n_samples measurements have been produced.
    """

    def __init__(self, cfg, steady, w0, n_samples, noise=0.0, seed=0):
        self.cfg = cfg
        self.w_s, _ = _steady_pair(cfg, steady)
        self.dyn = CascadeDynamics(cfg.outflow_coeff, cfg.surface)
        self.w = np.atleast_1d(np.asarray(w0, dtype=float)).copy()
        if self.w.shape != (cfg.n_tanks,):
            raise DimensionError(f"initial levels have shape {self.w.shape}")
        self.n_samples = int(n_samples)
        self.noise = float(noise)
        self.rng = np.random.default_rng(seed)
        self.history = [np.array(self.w)]

    def __call__(self, z, k):
        if k >= self.n_samples:
            return None
        if k == 0:
            return np.array(self.w)
        u0 = np.clip(z.x[control_slice(self.cfg, 0)], self.cfg.u_lo, self.cfg.u_hi)
        w = rk4_step(self.dyn, self.w, u0, self.cfg.dt, self.cfg.n_substeps)
        if self.noise > 0.0:
            w = w + self.noise * self.w_s * self.rng.uniform(-1.0, 1.0, w.size)
        self.w = np.clip(w, self.cfg.h_lo, self.cfg.h_hi)
        self.history.append(np.array(self.w))
        return np.array(self.w)
