"""Seeded plant-in-the-loop simulation: disturbance realization generators,
closed-loop runner, Monte Carlo harness, and the fallback alternation study.

The plant stepped here is the discrete-time model itself; the controller
never sees the disturbance deviation, only the measured state and the step
index. Runs are fully determined by (scenario, seed): the deviation
sequences are precomputed from a PCG64 generator at construction.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .controller import ControllerConfig, NominalController, OptimizeOutcome, RobustController
from .errors import SingularityError
from .ltv import ReferenceTrajectory
from .models.base import DisturbanceSpec, OutputMap, PlantModel
from .ocp import equalized_cost, evaluate_cost
from .sets import contains
from .tightening import ErrorSets

REALIZATION_KINDS = (
    "zero",
    "square_wave",
    "uniform_random",
    "constant_extreme_hi",
    "constant_extreme_lo",
)


@dataclass(frozen=True)
class DisturbanceRealization:
    """Precomputed deviation sequence, every sample inside the bound set.

    square_wave: +/- the full amplitude, switching every half period
    (phase 0, positive first). uniform_random: iid uniform per controller
    step, held over the sampling interval, from PCG64(seed).
    """

    kind: str
    n_steps: int
    t_sample: float
    radius: np.ndarray
    seed: int = 0
    period: float = 2000.0
    samples: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.kind not in REALIZATION_KINDS:
            raise ValueError(f"unknown realization kind {self.kind!r}")
        r = np.atleast_1d(np.asarray(self.radius, dtype=float))
        t = np.arange(self.n_steps) * self.t_sample
        if self.kind == "zero":
            s = np.zeros((self.n_steps, r.shape[0]))
        elif self.kind == "square_wave":
            sign = np.where((t % self.period) < 0.5 * self.period, 1.0, -1.0)
            s = sign[:, None] * r[None, :]
        elif self.kind == "uniform_random":
            rng = np.random.Generator(np.random.PCG64(self.seed))
            s = rng.uniform(-1.0, 1.0, size=(self.n_steps, r.shape[0])) * r[None, :]
        elif self.kind == "constant_extreme_hi":
            s = np.tile(r, (self.n_steps, 1))
        else:
            s = np.tile(-r, (self.n_steps, 1))
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "radius", r)


@dataclass(frozen=True)
class Scenario:
    """Everything a closed-loop run needs besides the controller."""

    model: PlantModel
    out: OutputMap
    dist: DisturbanceSpec
    x0: np.ndarray
    t_sample: float

    @property
    def n_steps(self) -> int:
        return self.dist.horizon


@dataclass
class ClosedLoopLog:
    """Per-step record of one closed-loop run plus derived summaries."""

    x: np.ndarray           # (N + 1, n_x)
    u: np.ndarray           # (N, n_u)
    d: np.ndarray           # (N, n_d) total disturbance
    delta_d: np.ndarray     # (N, n_d) deviation realization
    mode: list              # per-step "optimized" | "fallback"
    iterations: np.ndarray  # valid-reference optimization iterations per step
    sl_iterations: np.ndarray
    solve_time: np.ndarray
    cost_to_date: np.ndarray
    u_prev0: np.ndarray
    t_sample: float
    w_beta: float
    du_weight: float
    failed: bool = False
    failure: str = ""

    @property
    def n_steps(self) -> int:
        return self.u.shape[0]

    def objective(self) -> float:
        return evaluate_cost(self.x, self.u, self.u_prev0, self.w_beta, self.du_weight)

    def objective_equalized(self) -> float:
        return equalized_cost(self.objective(), self.t_sample)

    def count_violations(self, out: OutputMap):
        """Exact closed-containment check of every output (terminal included)
        against the original constraint sets; zero tolerance."""
        bad_steps = []
        for k in range(self.n_steps):
            y = out.output(k, self.x[k], self.u[k])
            if not contains(out.Y_k[k], y):
                bad_steps.append(k)
        y_term = out.output(self.n_steps, self.x[self.n_steps])
        if not contains(out.Y_k[self.n_steps], y_term):
            bad_steps.append(self.n_steps)
        return bad_steps

    def summary(self, out: OutputMap) -> dict:
        bad = self.count_violations(out)
        modes = np.asarray([1 if m == "optimized" else 0 for m in self.mode])
        times = self.solve_time
        return {
            "steps": int(self.n_steps),
            "failed": self.failed,
            "objective": self.objective(),
            "objective_equalized": self.objective_equalized(),
            "violations": len(bad),
            "first_violation_step": int(bad[0]) if bad else None,
            "optimized_steps": int(modes.sum()),
            "fallback_steps": int(self.n_steps - modes.sum()),
            "convergence_rate": float(modes.mean()) if self.n_steps else 1.0,
            "iterations_per_step": [int(v) for v in self.iterations],
            "timing_seconds": {
                "total": float(times.sum()),
                "p50": float(np.percentile(times, 50)) if times.size else 0.0,
                "p90": float(np.percentile(times, 90)) if times.size else 0.0,
                "max": float(times.max()) if times.size else 0.0,
            },
        }


def run_closed_loop(scenario: Scenario, controller, realization: DisturbanceRealization) -> ClosedLoopLog:
    """Step the true plant under d_ref + delta_d while the controller sees
    only the measured state and step index. Deterministic given the
    realization."""
    model = scenario.model
    n = scenario.n_steps
    if realization.n_steps != n:
        raise ValueError("realization span differs from the scenario mission")
    n_x, n_u = model.n_x, model.n_u
    x = np.zeros((n + 1, n_x))
    u = np.zeros((n, n_u))
    d = np.zeros((n, model.n_d))
    mode = []
    iters = np.zeros(n, dtype=int)
    sl_iters = np.zeros(n, dtype=int)
    solve_time = np.zeros(n)
    cost_to_date = np.zeros(n)
    x[0] = np.asarray(scenario.x0, dtype=float)
    u_prev0 = controller.u_prev0.copy()
    failed = False
    failure = ""
    k_done = 0
    for k in range(n):
        t0 = time.perf_counter()
        decision = controller.step(x[k], k)
        solve_time[k] = time.perf_counter() - t0
        u[k] = decision.u
        mode.append(decision.mode)
        iters[k] = decision.iterations
        sl_iters[k] = decision.report.iterations if decision.report is not None else 0
        d[k] = scenario.dist.d_ref[k] + realization.samples[k]
        try:
            x[k + 1] = model.step(x[k], u[k], d[k])
        except SingularityError as err:
            failed = True
            failure = str(err)
            k_done = k + 1
            break
        cost_to_date[k] = evaluate_cost(
            x[: k + 2], u[: k + 1], u_prev0, controller.cfg.w_beta, controller.cfg.du_weight
        )
        k_done = k + 1
    if failed:
        # truncate to the successfully simulated prefix
        x = x[: k_done + 1]
        u = u[:k_done]
        d = d[:k_done]
        delta = realization.samples[:k_done]
        mode = mode[:k_done]
        iters = iters[:k_done]
        sl_iters = sl_iters[:k_done]
        solve_time = solve_time[:k_done]
        cost_to_date = cost_to_date[:k_done]
    else:
        delta = realization.samples
    return ClosedLoopLog(
        x=x, u=u, d=d, delta_d=np.array(delta), mode=mode,
        iterations=iters, sl_iterations=sl_iters, solve_time=solve_time,
        cost_to_date=cost_to_date, u_prev0=u_prev0,
        t_sample=scenario.t_sample,
        w_beta=controller.cfg.w_beta, du_weight=controller.cfg.du_weight,
        failed=failed, failure=failure,
    )


def containment_report(log: ClosedLoopLog, ref: ReferenceTrajectory, err: ErrorSets) -> dict:
    """Errors of the run against a reference and its error sets: containment
    of e_k = x_k - x_ref_k in E_k for every step, and the per-axis tightness
    ratio max_k |e_k| / radius(E_k)."""
    n = min(log.x.shape[0] - 1, err.horizon)
    n_x = log.x.shape[1]
    contained = True
    ratios = np.zeros(n_x)
    for k in range(n + 1):
        e = log.x[k] - ref.x_ref[k]
        E = err.E[k]
        if not contains(E, e):
            contained = False
        r = E.radius
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(r > 0, np.abs(e) / np.where(r > 0, r, 1.0), 0.0)
        ratios = np.maximum(ratios, ratio)
    return {
        "contained": contained,
        "max_axis_ratio": ratios.tolist(),
        "tightness_witness": float(ratios.max()) if n_x else 0.0,
    }


def build_controller(
    mode: str,
    model: PlantModel,
    out: OutputMap,
    dist: DisturbanceSpec,
    cfg: ControllerConfig,
    initial: OptimizeOutcome,
    alternate_period: float = 500.0,
    t_sample: float = 100.0,
):
    """Controller factory shared by the harness and the command line."""
    if mode == "robust":
        ctrl = RobustController(model, out, dist, cfg, initial=initial)
    elif mode == "fallback-only":
        ctrl = RobustController(model, out, dist, cfg, initial=initial,
                                force_fallback=lambda k: True)
    elif mode == "fallback-alternating":
        def alternating(k: int) -> bool:
            return int((k * t_sample) // alternate_period) % 2 == 1

        ctrl = RobustController(model, out, dist, cfg, initial=initial,
                                force_fallback=alternating)
    elif mode == "nominal":
        ctrl = NominalController(model, out, dist, cfg, initial.ref)
    else:
        raise ValueError(f"unknown controller mode {mode!r}")
    return ctrl


def run_monte_carlo(
    scenario: Scenario,
    controller_factory,
    n_runs: int,
    seeds,
    realization_kind: str = "uniform_random",
    period: float = 2000.0,
) -> tuple[list, dict]:
    """Independent seeded runs with fresh controller instances; aggregate
    violation totals and the objective distribution."""
    if n_runs < 1:
        raise ValueError("need at least one run")
    seeds = list(seeds)
    if len(seeds) < n_runs:
        raise ValueError("need one seed per run")
    radius = scenario.dist.D_k[0].radius
    logs = []
    for i in range(n_runs):
        realization = DisturbanceRealization(
            kind=realization_kind, n_steps=scenario.n_steps,
            t_sample=scenario.t_sample, radius=radius,
            seed=seeds[i], period=period,
        )
        controller = controller_factory()
        logs.append(run_closed_loop(scenario, controller, realization))
    objectives = [log.objective_equalized() for log in logs]
    violations = [len(log.count_violations(scenario.out)) for log in logs]
    aggregate = {
        "runs": n_runs,
        "seeds": seeds[:n_runs],
        "total_violations": int(sum(violations)),
        "runs_with_violations": int(sum(v > 0 for v in violations)),
        "objective_equalized": {
            "mean": float(np.mean(objectives)),
            "min": float(np.min(objectives)),
            "max": float(np.max(objectives)),
        },
    }
    return logs, aggregate


def fallback_alternation_study(
    scenario: Scenario,
    cfg: ControllerConfig,
    initial: OptimizeOutcome,
    period: float = 500.0,
    square_period: float = 2000.0,
) -> dict:
    """Three runs under the square-wave worst case: optimization always
    attempted, fallback forced in alternating windows, and fallback only.
    Reports the equalized objectives normalized by the optimized run."""
    radius = scenario.dist.D_k[0].radius
    realization = DisturbanceRealization(
        kind="square_wave", n_steps=scenario.n_steps,
        t_sample=scenario.t_sample, radius=radius, period=square_period,
    )
    results = {}
    for mode in ("robust", "fallback-alternating", "fallback-only"):
        controller = build_controller(
            mode, scenario.model, scenario.out, scenario.dist, cfg, initial,
            alternate_period=period, t_sample=scenario.t_sample,
        )
        log = run_closed_loop(scenario, controller, realization)
        results[mode] = log
    base = results["robust"].objective_equalized()
    report = {
        "objective_equalized": {m: results[m].objective_equalized() for m in results},
        "normalized": {m: results[m].objective_equalized() / base for m in results},
        "violations": {m: len(results[m].count_violations(scenario.out)) for m in results},
    }
    return {"logs": results, "report": report}
