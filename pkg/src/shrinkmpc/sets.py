"""Interval and zonotope types with the set operations used for error
propagation and constraint tightening.

Zonotopes are kept in G-Rep {c, G}: the set {c + G xi | ||xi||_inf <= 1}.
Intervals double as axis-aligned zonotopes (diagonal generator matrix).
Only one reduction mechanism exists, the interval hull; it is applied at
the specific call sites in the tightening pipeline, never implicitly here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

# Absolute tolerance for the origin-centered check in the Pontryagin
# difference. Error sets are constructed symmetric, so any asymmetry beyond
# round-off signals a bug upstream, not a use case.
ORIGIN_CENTERED_ATOL = 1e-9


def _as_vector(x) -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise DimensionError(f"expected a vector, got shape {v.shape}")
    return v


@dataclass(frozen=True)
class Interval:
    """Axis-aligned box [lower, upper], possibly empty.

    Emptiness is a dedicated flag (not NaN bounds): an empty tightened
    constraint set is a meaningful infeasibility signal that must propagate
    cleanly through the controller.
    """

    lower: np.ndarray
    upper: np.ndarray
    empty: bool = field(default=False)

    def __post_init__(self):
        lo = _as_vector(self.lower)
        hi = _as_vector(self.upper)
        if lo.shape != hi.shape:
            raise DimensionError(f"bound shapes differ: {lo.shape} vs {hi.shape}")
        is_empty = bool(self.empty) or bool(np.any(lo > hi))
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "empty", is_empty)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def radius(self) -> np.ndarray:
        """Per-axis half-width."""
        return 0.5 * (self.upper - self.lower)

    @property
    def is_empty(self) -> bool:
        return self.empty

    @staticmethod
    def make_empty(dim: int) -> "Interval":
        return Interval(np.zeros(dim), np.zeros(dim), empty=True)

    @staticmethod
    def from_center_radius(center, radius) -> "Interval":
        c = _as_vector(center)
        r = _as_vector(radius)
        return Interval(c - r, c + r)

    @staticmethod
    def point(x) -> "Interval":
        v = _as_vector(x)
        return Interval(v, v)

    def to_zonotope(self) -> "Zonotope":
        """G-Rep of the box: center + diagonal generators (zero-radius axes
        contribute no generator)."""
        if self.empty:
            raise ValueError("cannot convert an empty interval to a zonotope")
        r = self.radius
        keep = r != 0.0
        return Zonotope(self.center, np.diag(r)[:, keep])

    def is_origin_centered(self, atol: float = ORIGIN_CENTERED_ATOL) -> bool:
        return not self.empty and bool(np.all(np.abs(self.lower + self.upper) <= atol))


@dataclass(frozen=True)
class Zonotope:
    """Zonotope in G-Rep: {c + G xi | xi in [-1, 1]^n_g}."""

    center: np.ndarray
    generators: np.ndarray

    def __post_init__(self):
        c = _as_vector(self.center)
        g = np.asarray(self.generators, dtype=float)
        if g.size == 0:
            g = g.reshape(c.shape[0], 0)
        if g.ndim != 2:
            raise DimensionError(f"generator matrix must be 2-D, got shape {g.shape}")
        if g.shape[0] != c.shape[0]:
            raise DimensionError(
                f"generator rows ({g.shape[0]}) != center dimension ({c.shape[0]})"
            )
        c.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "generators", g)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def n_generators(self) -> int:
        return self.generators.shape[1]

    @staticmethod
    def point(x) -> "Zonotope":
        v = _as_vector(x)
        return Zonotope(v, np.zeros((v.shape[0], 0)))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n random members, rows; coefficients uniform in [-1, 1]."""
        xi = rng.uniform(-1.0, 1.0, size=(n, self.n_generators))
        return self.center[None, :] + xi @ self.generators.T


def minkowski_sum(a: Zonotope, b: Zonotope) -> Zonotope:
    """Minkowski sum in G-Rep: add centers, concatenate generators."""
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return Zonotope(a.center + b.center, np.hstack([a.generators, b.generators]))


def linear_map(M, z: Zonotope) -> Zonotope:
    """Image {M x | x in z} = {M c, M G}."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] != z.dim:
        raise DimensionError(f"matrix columns ({M.shape[1]}) != zonotope dim ({z.dim})")
    return Zonotope(M @ z.center, M @ z.generators)


def interval_hull(z: Zonotope) -> Interval:
    """Tightest axis-aligned box around z: c +/- sum_i |g_i|."""
    gamma = np.abs(z.generators).sum(axis=1) if z.n_generators else np.zeros(z.dim)
    return Interval(z.center - gamma, z.center + gamma)


def pontryagin_diff_interval(a: Interval, b: Interval) -> Interval:
    """Pontryagin difference a (-) b for intervals with b centered at the
    origin: [a.lower + b.upper, a.upper - b.upper]. May be empty; emptiness
    is a legal, queryable result, not an error."""
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a.empty or b.empty:
        return Interval.make_empty(a.dim)
    if not b.is_origin_centered():
        raise ValueError("subtrahend must be centered at the origin")
    return Interval(a.lower + b.upper, a.upper - b.upper)


def cartesian_product(parts: list) -> Zonotope:
    """Stack zonotopes into their Cartesian product: concatenated centers,
    block-diagonal generator arrangement."""
    if not parts:
        raise ValueError("need at least one factor")
    center = np.concatenate([p.center for p in parts])
    n = center.shape[0]
    n_g = sum(p.n_generators for p in parts)
    G = np.zeros((n, n_g))
    row = col = 0
    for p in parts:
        G[row : row + p.dim, col : col + p.n_generators] = p.generators
        row += p.dim
        col += p.n_generators
    return Zonotope(center, G)


def contains(a: Interval, x) -> bool:
    """Closed containment, exact comparisons; empty contains nothing.
    Callers needing slack apply it themselves."""
    v = _as_vector(x)
    if v.shape[0] != a.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {v.shape[0]}")
    if a.empty:
        return False
    return bool(np.all(a.lower <= v) and np.all(v <= a.upper))
