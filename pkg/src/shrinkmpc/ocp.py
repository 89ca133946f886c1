"""Nominal optimal-control solve with tightened constraints, via successive
linearization over the convex QP backend.

Each outer iteration linearizes the dynamics about the current iterate and
solves a QP in the stacked deviations (dx, du) with
  - the linearized dynamics as equalities, relaxed by per-step virtual
    control slacks under an exact (L1) penalty so a poor linearization can
    never make the subproblem artificially infeasible,
  - the tightened output sets as interval inequalities,
  - a fixed trust-region box on the deviations,
  - the exact (already quadratic) trajectory cost.
A step is accepted only if the true penalized cost does not increase, so
the penalized cost is non-increasing across accepted iterations by
construction. Convergence requires both a small cost change and a small
nonlinear defect of the predicted trajectory; the returned states are always
recomputed by a nonlinear rollout of the returned inputs, so the result
satisfies the plant dynamics exactly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import SingularityError
from .ltv import ReferenceTrajectory, rollout
from .models.base import OutputMap, PlantModel
from .qp import QpSettings, solve_qp


@dataclass(frozen=True)
class SlSettings:
    """Successive-linearization knobs. The outer controller loop supplies
    global iteration, so these stay fixed (no trust-region schedule)."""

    max_iters: int = 30
    tol_cost: float = 1e-6
    tol_dyn: float = 1e-6
    trust_u: float = 0.2
    trust_x_frac: float = 0.1
    penalty_scale: float = 1e4
    qp: QpSettings = field(default_factory=QpSettings)


@dataclass
class OcpInstance:
    """One shrinking-horizon instance of the nominal tightened problem."""

    model: PlantModel
    x_start: np.ndarray
    start_step: int
    d_ref: np.ndarray            # (h, n_d) disturbance reference over the horizon
    out: OutputMap               # maps/sets for steps start..N (h + 1 entries)
    y_hat: list                  # tightened Intervals, h + 1 entries
    u_prev: np.ndarray           # input applied at start_step - 1 (first du term)
    trust_x: np.ndarray          # per-state trust radius
    trust_u: np.ndarray          # per-input trust radius
    w_beta: float = 5.0
    du_weight: float = 1.0
    feasibility_only: bool = False
    settings: SlSettings = field(default_factory=SlSettings)

    @property
    def horizon(self) -> int:
        return self.d_ref.shape[0]


@dataclass
class SolverReport:
    status: str                 # converged | max-iters | qp-failure
    iterations: int
    final_cost: float
    defect_norm: float
    solve_time: float

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def trajectory_cost(U, u_prev, du_weights, u_sq_weights) -> float:
    """Sum of weighted consecutive-input differences plus weighted squared
    inputs; the first difference is taken against the previously applied
    input."""
    U = np.atleast_2d(U)
    diffs = np.diff(np.vstack([np.atleast_1d(u_prev), U]), axis=0)
    return float(np.sum(diffs**2 @ np.asarray(du_weights)) + np.sum(U**2 @ np.asarray(u_sq_weights)))


def evaluate_cost(X, U, u_prev, w_beta: float = 5.0, du_weight: float = 1.0) -> float:
    """Benchmark objective: sum_i du_i'du_i + w_beta * beta_i^2 with beta the
    second input channel. X is accepted for signature compatibility; the
    objective depends on the inputs only."""
    U = np.atleast_2d(U)
    n_u = U.shape[1]
    u_sq = np.zeros(n_u)
    if n_u >= 2:
        u_sq[1] = w_beta
    return trajectory_cost(U, u_prev, np.full(n_u, du_weight), u_sq)


def equalized_cost(cost: float, t_sample: float) -> float:
    """Sampling-time-scaled objective for fair comparison across rates."""
    return t_sample * cost


def _cost_matrices(inst: OcpInstance, U_hat: np.ndarray):
    """Exact quadratic form of the trajectory cost in the input deviations:
    cost(U_hat + dU) = 1/2 dU'H dU + g'dU + const."""
    h, n_u = U_hat.shape
    n = h * n_u
    H = np.zeros((n, n))
    g = np.zeros(n)
    if inst.feasibility_only:
        return sp.csc_matrix(H), g
    du_w = np.full(n_u, inst.du_weight)
    u_sq = np.zeros(n_u)
    if n_u >= 2:
        u_sq[1] = inst.w_beta
    prev = np.vstack([inst.u_prev, U_hat])
    for i in range(h):
        sl_i = slice(i * n_u, (i + 1) * n_u)
        # |du_i|^2 term: (U[i] - U[i-1]) with deviations (d_i - d_{i-1})
        delta_hat = prev[i + 1] - prev[i]
        H[sl_i, sl_i] += 2.0 * np.diag(du_w)
        g[sl_i] += 2.0 * du_w * delta_hat
        if i > 0:
            sl_p = slice((i - 1) * n_u, i * n_u)
            H[sl_p, sl_p] += 2.0 * np.diag(du_w)
            H[sl_i, sl_p] -= 2.0 * np.diag(du_w)
            H[sl_p, sl_i] -= 2.0 * np.diag(du_w)
            g[sl_p] -= 2.0 * du_w * delta_hat
        # u_i^2 term
        H[sl_i, sl_i] += 2.0 * np.diag(u_sq)
        g[sl_i] += 2.0 * u_sq * U_hat[i]
    return sp.csc_matrix(H), g


def _penalized_cost(inst: OcpInstance, X, U, w_pen: float) -> float:
    """True objective plus the exact penalty on the nonlinear defects of the
    (possibly inconsistent) trajectory iterate."""
    cost = 0.0 if inst.feasibility_only else evaluate_cost(
        X, U, inst.u_prev, inst.w_beta, inst.du_weight
    )
    pen = 0.0
    for i in range(inst.horizon):
        nxt = inst.model.step(X[i], U[i], inst.d_ref[i])
        pen += float(np.sum(np.abs(X[i + 1] - nxt)))
    return cost + w_pen * pen


def _max_defect(inst: OcpInstance, X, U) -> float:
    worst = 0.0
    for i in range(inst.horizon):
        nxt = inst.model.step(X[i], U[i], inst.d_ref[i])
        worst = max(worst, float(np.max(np.abs(X[i + 1] - nxt))))
    return worst


def _assemble_qp(inst: OcpInstance, X, U):
    """Stacked QP in (dx_1..dx_h, du_0..du_{h-1}, s+, s-)."""
    model = inst.model
    h = inst.horizon
    n_x, n_u = model.n_x, model.n_u
    nx_tot = h * n_x
    nu_tot = h * n_u
    n_var = nx_tot + nu_tot + 2 * nx_tot

    def xs(i):  # dx_i block, valid for i = 1..h
        return slice((i - 1) * n_x, i * n_x)

    def us(i):
        return slice(nx_tot + i * n_u, nx_tot + (i + 1) * n_u)

    sp_off = nx_tot + nu_tot
    sm_off = sp_off + nx_tot

    A_eq = sp.lil_matrix((nx_tot, n_var))
    b_eq = np.zeros(nx_tot)
    for i in range(h):
        rows = slice(i * n_x, (i + 1) * n_x)
        Ai, Bi, _ = model.jacobians(X[i], U[i], inst.d_ref[i])
        A_eq[rows, xs(i + 1)] = np.eye(n_x)
        if i > 0:
            A_eq[rows, xs(i)] = -Ai
        A_eq[rows, us(i)] = -Bi
        A_eq[rows, sp_off + i * n_x : sp_off + (i + 1) * n_x] = -np.eye(n_x)
        A_eq[rows, sm_off + i * n_x : sm_off + (i + 1) * n_x] = np.eye(n_x)
        b_eq[rows] = model.step(X[i], U[i], inst.d_ref[i]) - X[i + 1]

    n_y_rows = sum(y.dim for y in inst.y_hat)
    A_in = sp.lil_matrix((n_y_rows, n_var))
    l_in = np.zeros(n_y_rows)
    u_in = np.zeros(n_y_rows)
    row = 0
    for i in range(h + 1):
        Yh = inst.y_hat[i]
        C = inst.out.C_k[i]
        D = inst.out.D_k[i]
        y_now = C @ X[i] + (D @ U[i] if i < h else 0.0)
        rows = slice(row, row + Yh.dim)
        if i >= 1:
            A_in[rows, xs(i)] = C
        if i < h:
            A_in[rows, us(i)] = D
        l_in[rows] = Yh.lower - y_now
        u_in[rows] = Yh.upper - y_now
        row += Yh.dim

    lb = np.full(n_var, -np.inf)
    ub = np.full(n_var, np.inf)
    for i in range(1, h + 1):
        lb[xs(i)] = -inst.trust_x
        ub[xs(i)] = inst.trust_x
    for i in range(h):
        lb[us(i)] = -inst.trust_u
        ub[us(i)] = inst.trust_u
    lb[sp_off:] = 0.0

    H_u, g_u = _cost_matrices(inst, U)
    w_pen = inst.settings.penalty_scale * max(1.0, _max_curvature(H_u))
    H = sp.lil_matrix((n_var, n_var))
    H[nx_tot : nx_tot + nu_tot, nx_tot : nx_tot + nu_tot] = H_u
    g = np.zeros(n_var)
    g[nx_tot : nx_tot + nu_tot] = g_u
    g[sp_off:] = w_pen
    return H.tocsc(), g, A_eq.tocsc(), b_eq, A_in.tocsc(), l_in, u_in, lb, ub, w_pen


def _max_curvature(H_u) -> float:
    return float(H_u.diagonal().max()) if H_u.shape[0] else 0.0


def solve_problem2(inst: OcpInstance, init: ReferenceTrajectory):
    """Successive-linearization solve of the tightened nominal problem.

    Returns (trajectory, report). The trajectory always starts at the pinned
    state and satisfies the nonlinear dynamics exactly (states recomputed by
    rollout); on qp-failure it is the initial trajectory re-rolled from the
    pinned state. Failure and non-convergence are soft outcomes for the
    caller's outer loop.
    """
    t0 = time.perf_counter()
    st = inst.settings
    h = inst.horizon
    if init.horizon != h:
        raise ValueError(f"init spans {init.horizon} steps, instance needs {h}")

    def report(status, iters, cost, defect):
        return SolverReport(status, iters, cost, defect, time.perf_counter() - t0)

    def failed(iters):
        try:
            traj = rollout(inst.model, inst.x_start, init.u_ref, inst.d_ref, inst.start_step)
            cost = evaluate_cost(traj.x_ref, traj.u_ref, inst.u_prev, inst.w_beta, inst.du_weight)
        except SingularityError:
            traj = init
            cost = np.nan
        return traj, report("qp-failure", iters, cost, np.nan)

    if any(y.is_empty for y in inst.y_hat):
        return failed(0)

    try:
        start = rollout(inst.model, inst.x_start, init.u_ref, inst.d_ref, inst.start_step)
    except SingularityError:
        return failed(0)
    X = np.array(start.x_ref)
    U = np.array(start.u_ref)

    phi_prev = None
    qp_warm_y = None
    defect = 0.0
    status = "max-iters"
    iters = 0
    for it in range(1, st.max_iters + 1):
        iters = it
        try:
            H, g, A_eq, b_eq, A_in, l_in, u_in, lb, ub, w_pen = _assemble_qp(inst, X, U)
        except SingularityError:
            return failed(it)
        res = solve_qp(H, g, A_eq=A_eq, b_eq=b_eq, A_in=A_in, l_in=l_in, u_in=u_in,
                       lb=lb, ub=ub, settings=st.qp, y0=qp_warm_y)
        if not res.solved:
            return failed(it)
        qp_warm_y = res.y
        n_x, n_u = inst.model.n_x, inst.model.n_u
        dX = res.x[: h * n_x].reshape(h, n_x)
        dU = res.x[h * n_x : h * (n_x + n_u)].reshape(h, n_u)
        X_new = np.vstack([X[0], X[1:] + dX])
        U_new = U + dU
        phi_new = _penalized_cost(inst, X_new, U_new, w_pen)
        if phi_prev is None:
            phi_prev = _penalized_cost(inst, X, U, w_pen)
        if phi_new > phi_prev + 1e-9:
            # a step that worsens the true penalized cost is never accepted;
            # with fixed trust radii there is nothing further to try
            break
        cost_change = abs(phi_new - phi_prev)
        X, U = X_new, U_new
        defect = _max_defect(inst, X, U)
        phi_prev = phi_new
        if cost_change <= st.tol_cost and defect <= st.tol_dyn:
            status = "converged"
            break

    try:
        final = rollout(inst.model, inst.x_start, U, inst.d_ref, inst.start_step)
    except SingularityError:
        return failed(iters)
    cost = evaluate_cost(final.x_ref, final.u_ref, inst.u_prev, inst.w_beta, inst.du_weight)
    if status == "converged" and defect > st.tol_dyn:
        status = "max-iters"
    return final, report(status, iters, cost, defect)
