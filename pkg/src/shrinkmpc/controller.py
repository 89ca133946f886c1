"""Shrinking-horizon robust controller: valid-reference optimization with
iteratively recomputed tightening, and the closed-loop step logic with a
fallback input that preserves the robustness guarantee.

A stored reference trajectory is "valid" when it satisfies the plant
dynamics and its outputs clear the tightened constraint sets computed from
that same trajectory. Each control step tries to replace the stored
trajectory with an optimized valid one; when the iteration fails, the input
falls back to the stored trajectory's feedback law u = u_ref + K e, which
keeps the true trajectory inside the error sets the tightening accounted
for.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InitialTrajectoryError, SingularityError
from .ltv import ReferenceTrajectory, linearize_along, lqr_gains, rollout
from .models.base import DisturbanceSpec, OutputMap, PlantModel
from .ocp import OcpInstance, SlSettings, SolverReport, solve_problem2
from .tightening import TightenedConstraints, propagate_error_sets, tighten_constraints

log = logging.getLogger(__name__)

VALIDITY_DEFECT_ATOL = 1e-8
VALIDITY_SLACK = 1e-9


@dataclass(frozen=True)
class ControllerConfig:
    Q: np.ndarray
    R: np.ndarray
    trust_x: np.ndarray
    trust_u: np.ndarray
    w_beta: float = 5.0
    du_weight: float = 1.0
    max_iters: int = 20          # valid-reference optimization budget per step
    max_iters_init: int = 100    # offline feasibility-mode budget
    retighten_from: str = "latest"   # latest | last_valid
    input_bounds: tuple | None = None  # (lo, hi) vectors for the defensive clamp
    sl: SlSettings = field(default_factory=SlSettings)


@dataclass
class ControllerState:
    """Last stored valid reference and everything needed to fall back on it."""

    ref: ReferenceTrajectory
    gains: list
    tightened: TightenedConstraints
    k_v: int
    u_prev: np.ndarray


@dataclass
class StepDecision:
    u: np.ndarray
    mode: str                    # optimized | fallback
    report: SolverReport | None
    iterations: int              # valid-reference optimization iterations used
    clamped: bool = False


@dataclass
class OptimizeOutcome:
    success: bool
    ref: ReferenceTrajectory
    gains: list
    tightened: TightenedConstraints | None
    iterations: int
    report: SolverReport | None


def check_validity(
    model: PlantModel,
    ref: ReferenceTrajectory,
    tightened: TightenedConstraints,
    out: OutputMap,
    defect_atol: float = VALIDITY_DEFECT_ATOL,
    slack: float = VALIDITY_SLACK,
) -> bool:
    """Definition of a valid reference: dynamics satisfied and every output
    (terminal included) inside the tightened set computed from this same
    trajectory, with a small slack so solver-tolerance points do not flap."""
    if not tightened.feasible:
        return False
    h = ref.horizon
    if out.horizon != h or tightened.horizon != h:
        raise ValueError("reference, tightening and output map spans differ")
    if ref.max_defect(model) > defect_atol:
        return False
    for i in range(h + 1):
        y = out.output(i, ref.x_ref[i], ref.u_ref[i] if i < h else None)
        Yh = tightened.Y_hat[i]
        if np.any(y < Yh.lower - slack) or np.any(y > Yh.upper + slack):
            return False
    return True


def _tighten_for(model, ref, dist_tail, out_tail, cfg):
    """Gains + error sets + tightened constraints computed from a reference."""
    ltv = lqr_gains(linearize_along(model, ref), cfg.Q, cfg.R)
    err = propagate_error_sets(model, ltv, dist_tail, ref)
    tight = tighten_constraints(out_tail, err, ltv.K)
    return ltv, err, tight


def optimize_valid_reference(
    model: PlantModel,
    out: OutputMap,
    dist: DisturbanceSpec,
    cfg: ControllerConfig,
    x_k: np.ndarray,
    k: int,
    warm: ReferenceTrajectory,
    u_prev: np.ndarray,
    feasibility_only: bool = False,
    max_iters: int | None = None,
) -> OptimizeOutcome:
    """Iterate (solve tightened problem -> recompute tightening from the new
    trajectory -> check validity against its own tightening) until a valid
    optimized trajectory appears or the budget runs out. On failure the
    caller's stored state is left untouched."""
    budget = cfg.max_iters if max_iters is None else max_iters
    out_tail = out.tail(k)
    dist_tail = dist.tail(k)
    try:
        _, _, tight = _tighten_for(model, warm, dist_tail, out_tail, cfg)
    except SingularityError:
        return OptimizeOutcome(False, warm, [], None, 0, None)
    current = warm
    report = None
    iters_used = 0
    for j in range(budget):
        iters_used = j + 1
        inst = OcpInstance(
            model=model,
            x_start=np.asarray(x_k, dtype=float),
            start_step=k,
            d_ref=dist_tail.d_ref,
            out=out_tail,
            y_hat=tight.Y_hat,
            u_prev=np.asarray(u_prev, dtype=float),
            trust_x=cfg.trust_x,
            trust_u=cfg.trust_u,
            w_beta=cfg.w_beta,
            du_weight=cfg.du_weight,
            feasibility_only=feasibility_only,
            settings=cfg.sl,
        )
        traj, report = solve_problem2(inst, current)
        if report.status == "qp-failure":
            # nothing new to retighten from; the iteration still counts
            continue
        try:
            ltv_new, _, tight_new = _tighten_for(model, traj, dist_tail, out_tail, cfg)
        except SingularityError:
            continue
        if check_validity(model, traj, tight_new, out_tail):
            return OptimizeOutcome(True, traj, ltv_new.K, tight_new, iters_used, report)
        current = traj
        if cfg.retighten_from == "latest":
            tight = tight_new
    return OptimizeOutcome(False, warm, [], None, iters_used, report)


def generate_initial_reference(
    model: PlantModel,
    x0: np.ndarray,
    out: OutputMap,
    dist: DisturbanceSpec,
    cfg: ControllerConfig,
    u_guess: np.ndarray,
) -> OptimizeOutcome:
    """Offline search for a valid initial trajectory: the optimization
    objective is replaced by a constant, so each pass solves only a
    feasibility problem starting from a constant-input rollout guess."""
    n = dist.horizon
    U0 = np.tile(np.asarray(u_guess, dtype=float), (n, 1))
    try:
        guess = rollout(model, x0, U0, dist.d_ref, start_step=0)
    except SingularityError as err:
        raise InitialTrajectoryError(f"initial guess rollout failed: {err}") from err
    outcome = optimize_valid_reference(
        model, out, dist, cfg, x0, 0, guess, U0[0],
        feasibility_only=True, max_iters=cfg.max_iters_init,
    )
    if not outcome.success:
        raise InitialTrajectoryError(
            f"no valid initial trajectory within {cfg.max_iters_init} iterations"
        )
    return outcome


class RobustController:
    """Shrinking-horizon robust controller with fallback (closed-loop use).

    `force_fallback` (a predicate on the step index) exists for the fallback
    and alternation studies; when it fires, the optimization is skipped for
    that step and the stored trajectory's feedback law is applied.
    """

    def __init__(
        self,
        model: PlantModel,
        out: OutputMap,
        dist: DisturbanceSpec,
        cfg: ControllerConfig,
        initial: OptimizeOutcome | None = None,
        x0=None,
        u_guess=None,
        force_fallback=None,
    ):
        self.model = model
        self.out = out
        self.dist = dist
        self.cfg = cfg
        self.horizon = dist.horizon
        self.force_fallback = force_fallback or (lambda k: False)
        if initial is None:
            if x0 is None or u_guess is None:
                raise ValueError("need either a precomputed initial outcome or (x0, u_guess)")
            initial = generate_initial_reference(model, x0, out, dist, cfg, u_guess)
        self.state = ControllerState(
            ref=initial.ref,
            gains=initial.gains,
            tightened=initial.tightened,
            k_v=0,
            u_prev=initial.ref.u_ref[0].copy(),
        )
        # first-step du term is taken against the initial plan's first input
        self.u_prev0 = self.state.u_prev.copy()

    def _fallback_input(self, x_k, k):
        s = self.state
        off = k - s.k_v
        e = np.asarray(x_k, dtype=float) - s.ref.x_ref[off]
        return s.ref.u_ref[off] + s.gains[off] @ e

    def step(self, x_k, k: int) -> StepDecision:
        """One control decision; sees only the measured state and the step."""
        if not 0 <= k <= self.horizon - 1:
            raise ValueError(f"step {k} outside mission range 0..{self.horizon - 1}")
        s = self.state
        decision = None
        if not self.force_fallback(k):
            warm = s.ref.tail(k - s.k_v) if k > s.k_v else s.ref
            outcome = optimize_valid_reference(
                self.model, self.out, self.dist, self.cfg,
                x_k, k, warm, s.u_prev,
            )
            if outcome.success:
                self.state = ControllerState(
                    ref=outcome.ref,
                    gains=outcome.gains,
                    tightened=outcome.tightened,
                    k_v=k,
                    u_prev=s.u_prev,
                )
                u = outcome.ref.u_ref[0].copy()
                decision = StepDecision(u, "optimized", outcome.report, outcome.iterations)
            else:
                u = self._fallback_input(x_k, k)
                decision = StepDecision(u, "fallback", outcome.report, outcome.iterations)
        else:
            u = self._fallback_input(x_k, k)
            decision = StepDecision(u, "fallback", None, 0)
        if self.cfg.input_bounds is not None:
            lo, hi = self.cfg.input_bounds
            clipped = np.clip(decision.u, lo, hi)
            decision.clamped = bool(np.any(clipped != decision.u))
            if decision.clamped:
                log.warning("fallback input clamped at step %d", k)
            decision.u = clipped
        self.state.u_prev = decision.u.copy()
        return decision


class NominalController:
    """Non-robust baseline: one tightened-free solve per step, no validity
    loop and no fallback; constraint violations are data, not errors."""

    def __init__(self, model, out, dist, cfg: ControllerConfig, initial_ref: ReferenceTrajectory):
        self.model = model
        self.out = out
        self.dist = dist
        self.cfg = cfg
        self.horizon = dist.horizon
        self.plan = initial_ref
        self.u_prev = initial_ref.u_ref[0].copy()
        self.u_prev0 = self.u_prev.copy()
        self._plan_start = 0

    def step(self, x_k, k: int) -> StepDecision:
        warm = self.plan.tail(k - self._plan_start) if k > self._plan_start else self.plan
        out_tail = self.out.tail(k)
        inst = OcpInstance(
            model=self.model,
            x_start=np.asarray(x_k, dtype=float),
            start_step=k,
            d_ref=self.dist.tail(k).d_ref,
            out=out_tail,
            y_hat=list(out_tail.Y_k),
            u_prev=self.u_prev,
            trust_x=self.cfg.trust_x,
            trust_u=self.cfg.trust_u,
            w_beta=self.cfg.w_beta,
            du_weight=self.cfg.du_weight,
            settings=self.cfg.sl,
        )
        traj, report = solve_problem2(inst, warm)
        if report.status == "qp-failure":
            u = warm.u_ref[0].copy()
            decision = StepDecision(u, "optimized", report, 1)
        else:
            self.plan = traj
            self._plan_start = k
            u = traj.u_ref[0].copy()
            decision = StepDecision(u, "optimized", report, 1)
        if self.cfg.input_bounds is not None:
            lo, hi = self.cfg.input_bounds
            clipped = np.clip(decision.u, lo, hi)
            decision.clamped = bool(np.any(clipped != decision.u))
            decision.u = clipped
        self.u_prev = decision.u.copy()
        return decision
