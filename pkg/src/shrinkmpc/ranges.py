"""Scalar interval arithmetic for bounding function ranges over a box.

Used to evaluate elementwise maxima of |second derivatives| over state/input/
disturbance boxes. Plain floating point, no directed rounding: the bounds it
feeds are themselves overapproximations with comfortable margins, and the
remainder-bound pipeline applies a 1e-12 relative inflation as a cheap guard.
Division is exposed only as reciprocal-then-multiply so the singularity check
lives in one place.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ScalarRange:
    """Closed scalar interval [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"lo ({self.lo}) > hi ({self.hi})")

    @staticmethod
    def const(v: float) -> "ScalarRange":
        return ScalarRange(float(v), float(v))


def range_add(a: ScalarRange, b: ScalarRange) -> ScalarRange:
    return ScalarRange(a.lo + b.lo, a.hi + b.hi)


def range_neg(a: ScalarRange) -> ScalarRange:
    return ScalarRange(-a.hi, -a.lo)


def range_sub(a: ScalarRange, b: ScalarRange) -> ScalarRange:
    return range_add(a, range_neg(b))


def range_mul(a: ScalarRange, b: ScalarRange) -> ScalarRange:
    p = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
    return ScalarRange(min(p), max(p))


def range_scale(a: ScalarRange, s: float) -> ScalarRange:
    return range_mul(a, ScalarRange.const(s))


def range_recip(a: ScalarRange) -> ScalarRange:
    """1/a for a range not containing zero. A straddling range means the
    state box crossed a model singularity."""
    if a.lo <= 0.0 <= a.hi:
        raise ZeroDivisionError(f"range [{a.lo}, {a.hi}] straddles zero")
    return ScalarRange(1.0 / a.hi, 1.0 / a.lo)


def range_abs_sup(a: ScalarRange) -> float:
    """max |x| over the range."""
    return max(abs(a.lo), abs(a.hi))
