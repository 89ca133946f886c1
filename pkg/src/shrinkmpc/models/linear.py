"""Linear(-affine) plant: x+ = A x + B u + V d + c.

The Taylor expansion of a linear map is exact, so Jacobians are constant and
all Hessian bounds vanish. Used as a test double and for quick experiments.
"""

from __future__ import annotations

import numpy as np

from ..sets import Interval
from .base import ModelSignature, PlantModel


class LinearPlant(PlantModel):
    def __init__(self, A, B, V=None, c=None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        n_x = A.shape[0]
        if V is None:
            V = np.zeros((n_x, 0))
        V = np.asarray(V, dtype=float).reshape(n_x, -1)
        self.A = A
        self.B = B
        self.V = V
        self.c = np.zeros(n_x) if c is None else np.asarray(c, dtype=float)
        self.signature = ModelSignature(n_x, B.shape[1], V.shape[1], n_x)

    def step(self, x, u, d):
        d = np.atleast_1d(np.asarray(d, dtype=float))
        return self.A @ x + self.B @ u + self.V @ d + self.c

    def jacobians(self, x, u, d):
        return self.A.copy(), self.B.copy(), self.V.copy()

    def hessian_abs_max(self, box: Interval):
        n_z = self.n_z
        return [np.zeros((n_z, n_z)) for _ in range(self.n_x)]
