"""Pure-Python (numpy + scipy) twin of the compiled ADMM iteration kernel.

Same update equations, same termination and infeasibility checks, same
check cadence as `_core.pyx`; the KKT solves go through a prefactorized
scipy SuperLU instead of the compiled banded LDL' kernel. Selected at import
by shrinkmpc.qp when the extension is unavailable or SHRINKMPC_PURE is set.
"""

from __future__ import annotations

import numpy as np

STATUS_MAX_ITER = 0
STATUS_SOLVED = 1
STATUS_PRIMAL_INFEASIBLE = 2
STATUS_DUAL_INFEASIBLE = 3


def admm_loop(
    P, q, A, l, u,
    rho, sigma, alpha,
    kkt_solve,
    x, y, z,
    d_inv, e_inv, c_inv,
    eps_abs, eps_rel, eps_pinf, eps_dinf,
    max_iter, check_every,
):
    """Run ADMM iterations in place on (x, y, z) for the scaled problem
    min 1/2 x'Px + q'x s.t. l <= Ax <= u.

    Residual norms are evaluated unscaled through the diagonal unscalers
    (d_inv, e_inv, cost c_inv). Returns (status, iterations, pri_res,
    dua_res) with residuals from the last check.
    """
    n = q.shape[0]
    rho_inv = 1.0 / rho
    pri_res = dua_res = np.inf
    t_pri = t_dua = 1.0
    status = STATUS_MAX_ITER
    iters = 0
    for it in range(1, max_iter + 1):
        iters = it
        x_prev = x.copy()
        y_prev = y.copy()

        rhs = np.concatenate([sigma * x - q, z - rho_inv * y])
        sol = kkt_solve(rhs)
        x_tilde = sol[:n]
        z_tilde = z + rho_inv * (sol[n:] - y)

        x[:] = alpha * x_tilde + (1.0 - alpha) * x
        z_relaxed = alpha * z_tilde + (1.0 - alpha) * z
        z_new = np.minimum(np.maximum(z_relaxed + rho_inv * y, l), u)
        y[:] = y + rho * (z_relaxed - z_new)
        z[:] = z_new

        if it % check_every == 0 or it == max_iter:
            Ax = A @ x
            pri_res = _norm_inf(e_inv * (Ax - z))
            Px = P @ x
            Aty = A.T @ y
            dua_res = c_inv * _norm_inf(d_inv * (Px + q + Aty))
            t_pri = max(_norm_inf(e_inv * Ax), _norm_inf(e_inv * z))
            t_dua = c_inv * max(
                _norm_inf(d_inv * Px), _norm_inf(d_inv * Aty), _norm_inf(d_inv * q)
            )
            if pri_res <= eps_abs + eps_rel * t_pri and dua_res <= eps_abs + eps_rel * t_dua:
                status = STATUS_SOLVED
                break
            delta_y = y - y_prev
            if _primal_infeasible(A, l, u, delta_y, d_inv, eps_pinf):
                status = STATUS_PRIMAL_INFEASIBLE
                break
            delta_x = x - x_prev
            if _dual_infeasible(P, q, A, l, u, delta_x, d_inv, e_inv, c_inv, eps_dinf):
                status = STATUS_DUAL_INFEASIBLE
                break
    return status, iters, pri_res, dua_res, t_pri, t_dua


def _norm_inf(v) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


def _primal_infeasible(A, l, u, delta_y, d_inv, eps) -> bool:
    nrm = _norm_inf(delta_y)
    if nrm <= eps:
        return False
    v = delta_y / nrm
    v_pos = np.maximum(v, 0.0)
    v_neg = np.minimum(v, 0.0)
    big = 1e18
    upper_finite = u < big
    lower_finite = l > -big
    # a certificate direction cannot push on an unbounded side
    if np.any(v_pos[~upper_finite] > eps) or np.any(v_neg[~lower_finite] < -eps):
        return False
    lhs = u[upper_finite] @ v_pos[upper_finite] + l[lower_finite] @ v_neg[lower_finite]
    if lhs >= -eps:
        return False
    return _norm_inf(d_inv * (A.T @ v)) < eps


def _dual_infeasible(P, q, A, l, u, delta_x, d_inv, e_inv, c_inv, eps) -> bool:
    nrm = _norm_inf(delta_x)
    if nrm <= eps:
        return False
    v = delta_x / nrm
    if q @ v >= -eps:
        return False
    if c_inv * _norm_inf(d_inv * (P @ v)) >= eps:
        return False
    Av = e_inv * (A @ v)
    big = 1e18
    upper_finite = u < big
    lower_finite = l > -big
    if np.any(upper_finite & (Av > eps)) or np.any(lower_finite & (Av < -eps)):
        return False
    return True
