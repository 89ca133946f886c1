"""Contract a controlled plant must satisfy, plus the output/disturbance
description types consumed by the tightening pipeline.

Models provide analytic Jacobians and Hessian-bound routines (no automatic
differentiation): the benchmark plants are hand-derivable and this keeps the
library dependency-free. Implementations must be stateless after
construction so they can be called concurrently.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from ..sets import Interval


@dataclass(frozen=True)
class ModelSignature:
    """Dimensions of the plant: states, inputs, disturbances, outputs."""

    n_x: int
    n_u: int
    n_d: int
    n_y: int

    def __post_init__(self):
        if min(self.n_x, self.n_u, self.n_y) < 1 or self.n_d < 0:
            raise ValueError(f"invalid signature {self}")


@dataclass(frozen=True)
class OutputMap:
    """Per-step output matrices and constraint sets for k = 0..N.

    y_k = C_k x_k + D_k u_k must lie in Y_k. The terminal map has D_N = 0 so
    the last constraint acts on the state alone.
    """

    C_k: list
    D_k: list
    Y_k: list

    def __post_init__(self):
        n = len(self.C_k)
        if len(self.D_k) != n or len(self.Y_k) != n:
            raise ValueError("C_k, D_k, Y_k must have equal length (N + 1 entries)")
        if np.any(self.D_k[-1] != 0.0):
            raise ValueError("terminal D_N must be zero")
        for Y in self.Y_k:
            if Y.is_empty:
                raise ValueError("output constraint sets must be nonempty")

    @property
    def horizon(self) -> int:
        return len(self.C_k) - 1

    def tail(self, k: int) -> "OutputMap":
        """Maps and sets for steps k..N of the mission."""
        return OutputMap(self.C_k[k:], self.D_k[k:], self.Y_k[k:])

    def output(self, k: int, x: np.ndarray, u=None) -> np.ndarray:
        y = self.C_k[k] @ x
        if u is not None:
            y = y + self.D_k[k] @ u
        return y


@dataclass(frozen=True)
class DisturbanceSpec:
    """Known reference disturbance d_ref_k plus origin-centered bounds D_k on
    the unknown deviation, for k = 0..N-1."""

    d_ref: np.ndarray  # (N, n_d)
    D_k: list  # N origin-centered Intervals

    def __post_init__(self):
        d = np.atleast_2d(np.asarray(self.d_ref, dtype=float))
        if d.shape[0] != len(self.D_k):
            raise ValueError("d_ref rows must match number of bound sets")
        for Dk in self.D_k:
            if not Dk.is_origin_centered():
                raise ValueError("disturbance deviation bounds must be origin-centered")
        d.setflags(write=False)
        object.__setattr__(self, "d_ref", d)

    @property
    def horizon(self) -> int:
        return self.d_ref.shape[0]

    def tail(self, k: int) -> "DisturbanceSpec":
        return DisturbanceSpec(self.d_ref[k:], self.D_k[k:])

    @staticmethod
    def constant_radius(d_ref: np.ndarray, radius) -> "DisturbanceSpec":
        d = np.atleast_2d(np.asarray(d_ref, dtype=float))
        r = np.broadcast_to(np.atleast_1d(np.asarray(radius, dtype=float)), (d.shape[1],))
        box = Interval(-r.copy(), r.copy())
        return DisturbanceSpec(d, [box] * d.shape[0])


class PlantModel(ABC):
    """Discrete-time plant x_{k+1} = f(x_k, u_k, d_k)."""

    signature: ModelSignature

    @property
    def n_x(self) -> int:
        return self.signature.n_x

    @property
    def n_u(self) -> int:
        return self.signature.n_u

    @property
    def n_d(self) -> int:
        return self.signature.n_d

    @property
    def n_z(self) -> int:
        """Dimension of the stacked point z = (x, u, d)."""
        return self.n_x + self.n_u + self.n_d

    @abstractmethod
    def step(self, x: np.ndarray, u: np.ndarray, d: np.ndarray) -> np.ndarray:
        """One discrete-time step."""

    @abstractmethod
    def jacobians(self, x: np.ndarray, u: np.ndarray, d: np.ndarray):
        """(A, B, V): exact partial derivatives of the discrete map."""

    @abstractmethod
    def hessian_abs_max(self, box: Interval) -> list:
        """Per-state-component elementwise upper bounds on |d^2 f_i / dz^2|
        over a box in stacked (x, u, d) space."""
