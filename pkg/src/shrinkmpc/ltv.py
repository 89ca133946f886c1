"""Linearization along a reference trajectory and finite-horizon
time-varying LQR gains.

Sign convention: gains K are stored so that the feedback law is
u = u_ref + K e with error transition (A + B K). The backward Riccati
recursion produces the classical gain K_ric applied as u = -K_ric e, so the
stored gains are K = -K_ric. Tests verify the closed-loop decay empirically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .models.base import PlantModel

DYNAMIC_CONSISTENCY_ATOL = 1e-8


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Time-indexed (x, u, d) reference covering steps start_step..N.

    States span start_step..N (h + 1 points), inputs and disturbances span
    start_step..N-1 (h points). A reference need not satisfy the plant
    dynamics; `max_defect` quantifies how far it is from doing so.
    """

    x_ref: np.ndarray  # (h + 1, n_x)
    u_ref: np.ndarray  # (h, n_u)
    d_ref: np.ndarray  # (h, n_d)
    start_step: int = 0

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x_ref, dtype=float))
        u = np.atleast_2d(np.asarray(self.u_ref, dtype=float))
        d = np.atleast_2d(np.asarray(self.d_ref, dtype=float))
        if x.shape[0] != u.shape[0] + 1 or u.shape[0] != d.shape[0]:
            raise ValueError(
                f"inconsistent lengths: {x.shape[0]} states, {u.shape[0]} inputs, "
                f"{d.shape[0]} disturbances"
            )
        if u.shape[0] < 1:
            raise ValueError("need at least one step")
        for name, arr in (("x_ref", x), ("u_ref", u), ("d_ref", d)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def horizon(self) -> int:
        """Number of steps h covered by the inputs."""
        return self.u_ref.shape[0]

    def point(self, i: int) -> np.ndarray:
        """Stacked expansion point z_i = (x_i, u_i, d_i)."""
        return np.concatenate([self.x_ref[i], self.u_ref[i], self.d_ref[i]])

    def tail(self, offset: int) -> "ReferenceTrajectory":
        """Drop the first `offset` steps (shrinking horizon / time shift)."""
        if not 0 <= offset < self.horizon:
            raise ValueError(f"offset {offset} outside 0..{self.horizon - 1}")
        return ReferenceTrajectory(
            self.x_ref[offset:], self.u_ref[offset:], self.d_ref[offset:],
            self.start_step + offset,
        )

    def max_defect(self, model: PlantModel) -> float:
        """Largest per-step dynamics violation max_i ||x_{i+1} - f(z_i)||_inf."""
        worst = 0.0
        for i in range(self.horizon):
            nxt = model.step(self.x_ref[i], self.u_ref[i], self.d_ref[i])
            worst = max(worst, float(np.max(np.abs(self.x_ref[i + 1] - nxt))))
        return worst

    def is_dynamically_consistent(self, model: PlantModel,
                                  atol: float = DYNAMIC_CONSISTENCY_ATOL) -> bool:
        return self.max_defect(model) <= atol


def rollout(model: PlantModel, x0, u_seq, d_seq, start_step: int = 0) -> ReferenceTrajectory:
    """Reference trajectory from simulating u_seq/d_seq; dynamically
    consistent by construction."""
    u = np.atleast_2d(np.asarray(u_seq, dtype=float))
    d = np.atleast_2d(np.asarray(d_seq, dtype=float))
    x = np.zeros((u.shape[0] + 1, model.n_x))
    x[0] = np.asarray(x0, dtype=float)
    for i in range(u.shape[0]):
        x[i + 1] = model.step(x[i], u[i], d[i])
    return ReferenceTrajectory(x, u, d, start_step)


@dataclass
class LtvModel:
    """Per-step linearization along a reference, with optional LQR data.

    x_{i+1} ~= A_i x_i + B_i u_i + V_i d_i + c_i, with c_hat_i the affine
    term of the nominal model that keeps the reference disturbance folded in.
    """

    A: list
    B: list
    V: list
    c: list
    c_hat: list
    K: list = field(default_factory=list)   # feedback gains, u = u_ref + K e
    P: list = field(default_factory=list)   # cost-to-go, P[horizon] = Q

    @property
    def horizon(self) -> int:
        return len(self.A)

    @property
    def has_gains(self) -> bool:
        return len(self.K) == self.horizon

    def closed_loop(self, i: int) -> np.ndarray:
        return self.A[i] + self.B[i] @ self.K[i]


def linearize_along(model: PlantModel, ref: ReferenceTrajectory) -> LtvModel:
    """First-order expansion of the plant at every reference point.

    On a dynamically consistent reference the nominal rollout
    x_{i+1} = A x_i + B u_i + c_hat_i reproduces the reference exactly: there
    are no linearization errors on the expansion points themselves.
    """
    A, B, V, c, c_hat = [], [], [], [], []
    for i in range(ref.horizon):
        x, u, d = ref.x_ref[i], ref.u_ref[i], ref.d_ref[i]
        Ai, Bi, Vi = model.jacobians(x, u, d)
        fi = model.step(x, u, d)
        affine = fi - Ai @ x - Bi @ u
        c.append(affine - Vi @ d)
        c_hat.append(affine)
        A.append(Ai)
        B.append(Bi)
        V.append(Vi)
    return LtvModel(A, B, V, c, c_hat)


def lqr_gains(ltv: LtvModel, Q: np.ndarray, R: np.ndarray) -> LtvModel:
    """Backward Riccati recursion over the LTV horizon.

    P_h = Q;  P_i = Q + A' P A - A' P B (R + B' P B)^{-1} B' P A, and the
    stored gain is K_i = -(R + B' P_{i+1} B)^{-1} B' P_{i+1} A_i. The inner
    solve uses a symmetric positive-definite factorization, and P is
    re-symmetrized each step to guard drift over long horizons.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    h = ltv.horizon
    P = [None] * (h + 1)
    K = [None] * h
    P[h] = Q.copy()
    for i in range(h - 1, -1, -1):
        Ai, Bi = ltv.A[i], ltv.B[i]
        PB = P[i + 1] @ Bi
        PA = P[i + 1] @ Ai
        S = R + Bi.T @ PB
        try:
            cf = scipy.linalg.cho_factor(0.5 * (S + S.T))
            K_ric = scipy.linalg.cho_solve(cf, Bi.T @ PA)
        except np.linalg.LinAlgError as err:
            raise np.linalg.LinAlgError(
                f"(R + B'PB) not positive definite at step {i}: {err}"
            ) from err
        Pi = Q + Ai.T @ PA - (PA.T @ Bi) @ K_ric
        P[i] = 0.5 * (Pi + Pi.T)
        K[i] = -K_ric
    ltv.K = K
    ltv.P = P
    return ltv
