"""Set-valued error propagation and output-constraint tightening.

Given a reference trajectory with feedback gains, a bound on where the true
trajectory can deviate from the nominal one is propagated forward:

    E_{i+1} = IH( (A + B K)_i E_i  (+)  V_i D_i  (+)  L(Z_i) ),   E_0 = {0},

where D_i bounds the unknown disturbance deviation and L overapproximates
the second-order linearization remainder over the reachable neighborhood

    Z_i = z_ref_i (+) ( E_i x K_i E_i x D_i ).

Every E is reduced to its interval hull immediately, keeping generator
counts constant across the horizon. Output constraints are then shrunk by
the feedback-mapped error sets, so that any nominal trajectory inside the
tightened sets keeps the true disturbed trajectory inside the originals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ltv import LtvModel, ReferenceTrajectory
from .models.base import DisturbanceSpec, OutputMap, PlantModel
from .sets import (
    Interval,
    Zonotope,
    cartesian_product,
    interval_hull,
    linear_map,
    minkowski_sum,
    pontryagin_diff_interval,
)


@dataclass(frozen=True)
class ErrorSets:
    """Per-step error bounds E_i (intervals, i = 0..h relative to the
    reference start) and the stacked neighborhoods Z_i (i = 0..h-1) they
    were built from."""

    E: list
    Z: list

    @property
    def horizon(self) -> int:
        return len(self.E) - 1

    def radii(self) -> np.ndarray:
        """(h + 1, n_x) per-axis radii of the error intervals."""
        return np.vstack([e.radius for e in self.E])


@dataclass(frozen=True)
class TightenedConstraints:
    """Shrunk output constraint sets; `feasible` is False as soon as any
    step's set is empty (a control-infeasibility signal, not an error)."""

    Y_hat: list
    feasible: bool

    @property
    def horizon(self) -> int:
        return len(self.Y_hat) - 1


def lagrange_remainder_bound(model: PlantModel, Z: Zonotope) -> Interval:
    """Origin-centered interval bounding the second-order Taylor remainder
    of the plant map over Z.

    With gamma the sum of |generators| and H_i an elementwise bound on
    |d^2 f_i/dz^2| over the interval hull of Z, each component is bounded by
    M_i = gamma' H_i gamma / 2.
    """
    if Z.dim != model.n_z:
        raise ValueError(f"Z has dim {Z.dim}, expected state+input+disturbance = {model.n_z}")
    gamma = (
        np.abs(Z.generators).sum(axis=1) if Z.n_generators else np.zeros(Z.dim)
    )
    H = model.hessian_abs_max(interval_hull(Z))
    m = np.array([0.5 * gamma @ Hi @ gamma for Hi in H])
    return Interval(-m, m)


def propagate_error_sets(
    model: PlantModel,
    ltv: LtvModel,
    dist: DisturbanceSpec,
    ref: ReferenceTrajectory,
) -> ErrorSets:
    """Forward propagation of the error bounds along the reference.

    The recursion interleaves the remainder neighborhoods exactly as the
    error sets become available: Z_i is assembled from the same-step E_i,
    then feeds the bound entering E_{i+1}.
    """
    h = ref.horizon
    if not ltv.has_gains or ltv.horizon != h:
        raise ValueError("LTV model must carry gains for the full reference span")
    if dist.horizon != h:
        raise ValueError(f"disturbance spec spans {dist.horizon} steps, reference {h}")
    n_x = model.n_x
    E = [Interval.point(np.zeros(n_x))]
    Z = []
    for i in range(h):
        D_i = dist.D_k[i]
        e_zono = E[i].to_zonotope()
        parts = [e_zono, linear_map(ltv.K[i], e_zono), D_i.to_zonotope()]
        Z_i = minkowski_sum(Zonotope.point(ref.point(i)), cartesian_product(parts))
        Z.append(Z_i)
        remainder = lagrange_remainder_bound(model, Z_i)
        total = minkowski_sum(
            linear_map(ltv.closed_loop(i), e_zono),
            minkowski_sum(linear_map(ltv.V[i], D_i.to_zonotope()), remainder.to_zonotope()),
        )
        E.append(interval_hull(total))
    return ErrorSets(E, Z)


def tighten_constraints(out: OutputMap, err: ErrorSets, gains: list) -> TightenedConstraints:
    """Shrink each output constraint set by the feedback-mapped error set:

        Y_hat_i = Y_i (-) IH( (C_i + D_i K_i) E_i ),

    with the terminal step using the state-only map (D = 0, no gain). Both
    Pontryagin operands are intervals; the subtrahend is origin-centered by
    construction from the origin-centered error sets.
    """
    h = err.horizon
    if out.horizon != h:
        raise ValueError(f"output map spans {out.horizon} steps, error sets {h}")
    if len(gains) < h:
        raise ValueError("need a gain for every non-terminal step")
    Y_hat = []
    for i in range(h + 1):
        M = out.C_k[i] if i == h else out.C_k[i] + out.D_k[i] @ gains[i]
        mapped = interval_hull(linear_map(M, err.E[i].to_zonotope()))
        Y_hat.append(pontryagin_diff_interval(out.Y_k[i], mapped))
    feasible = not any(y.is_empty for y in Y_hat)
    return TightenedConstraints(Y_hat, feasible)
