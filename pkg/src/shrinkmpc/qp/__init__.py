"""Convex QP backend with compiled hot loop and pure fallback.

The iteration kernel is selected once at import: the Cython extension
(`shrinkmpc.qp._core`) when it built successfully and the environment
variable SHRINKMPC_PURE is unset, otherwise the pure numpy/scipy twin.
`backend_name()` reports which one is active.
"""

from __future__ import annotations

import os

import numpy as np
import scipy.sparse as sp

from .admm import INF, QpResult, QpSettings, compiled_available, kkt_residuals, solve

FORCE_PURE = bool(os.environ.get("SHRINKMPC_PURE"))


def backend_name() -> str:
    return "compiled" if (compiled_available() and not FORCE_PURE) else "pure"


def solve_qp(
    H,
    g,
    A_eq=None,
    b_eq=None,
    A_in=None,
    l_in=None,
    u_in=None,
    lb=None,
    ub=None,
    settings: QpSettings | None = None,
    x0=None,
    y0=None,
    force_pure: bool | None = None,
) -> QpResult:
    """Solve min 1/2 x'Hx + g'x subject to equalities A_eq x = b_eq,
    interval inequalities l_in <= A_in x <= u_in, and variable bounds
    lb <= x <= ub (use +/-inf for one-sided entries).

    Returns a QpResult whose (x, y) is a KKT point within the residual
    contract of QpSettings when status == "solved"; infeasible, unbounded
    (dual_infeasible) and iteration-limit outcomes are reported in status.
    """
    g = np.asarray(g, dtype=float)
    n = g.shape[0]
    rows = []
    lo_parts = []
    hi_parts = []
    if A_eq is not None and np.size(b_eq) > 0:
        b_eq = np.atleast_1d(np.asarray(b_eq, dtype=float))
        rows.append(sp.csc_matrix(A_eq))
        lo_parts.append(b_eq)
        hi_parts.append(b_eq)
    if A_in is not None and sp.csc_matrix(A_in).shape[0] > 0:
        rows.append(sp.csc_matrix(A_in))
        lo_parts.append(np.atleast_1d(np.asarray(l_in, dtype=float)))
        hi_parts.append(np.atleast_1d(np.asarray(u_in, dtype=float)))
    if lb is not None or ub is not None:
        lbv = np.full(n, -np.inf) if lb is None else np.asarray(lb, dtype=float)
        ubv = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float)
        finite = np.isfinite(lbv) | np.isfinite(ubv)
        if finite.any():
            eye = sp.eye(n, format="csr")[finite]
            rows.append(sp.csc_matrix(eye))
            lo_parts.append(lbv[finite])
            hi_parts.append(ubv[finite])
    if rows:
        A = sp.vstack(rows).tocsc()
        l = np.concatenate(lo_parts)
        u = np.concatenate(hi_parts)
        # keep the backend's bound arithmetic finite
        l = np.where(np.isneginf(l), -INF, l)
        u = np.where(np.isposinf(u), INF, u)
    else:
        A = l = u = None
    if force_pure is None:
        force_pure = FORCE_PURE
    return solve(H, g, A, l, u, settings=settings, x0=x0, y0=y0, force_pure=force_pure)


__all__ = [
    "QpResult",
    "QpSettings",
    "backend_name",
    "compiled_available",
    "kkt_residuals",
    "solve",
    "solve_qp",
]
