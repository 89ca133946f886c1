"""Dual-tank aircraft fuel thermal management system (FTMS) benchmark.

States x = (M1, M2, T1): fuel mass in the recirculation and reservoir tanks
[kg] and recirculation fuel temperature [K]. Inputs u = (alpha, beta): split
valve recirculation fraction and relative ACM cooling load, both in [0, 1].
The single disturbance d is the time-varying VCS heat input [W] entering the
total heat load

    Q_in = Q_fadec + d + Q_engine + (P_pump + K_qh * m_f).

Continuous-time dynamics (implemented exactly as published, including the
(m_f - m_e)/M1 factor on the whole bracket):

    M1' = (1 - alpha) m_f - m_e
    M2' = -(1 - alpha) m_f
    T1' = (m_f - m_e)/M1 * [(1 - alpha)(T2 - T1) + Q_in/(c_v m_f)]
          - beta * Q_acm_max / (c_v M1)

discretized by forward Euler with sampling time t_sample. T2 is a constant
parameter: it is listed with no bounds and has no dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import SingularityError
from ..ranges import (
    ScalarRange,
    range_abs_sup,
    range_add,
    range_mul,
    range_recip,
    range_scale,
    range_sub,
)
from ..sets import Interval
from .base import ModelSignature, OutputMap, PlantModel

# Relative inflation applied to the final Hessian bounds: cheap guard against
# the plain (non-directed) floating-point range arithmetic.
HESSIAN_INFLATION = 1e-12

STATE_NAMES = ("M1", "M2", "T1")
INPUT_NAMES = ("alpha", "beta")
DISTURBANCE_NAMES = ("Qdot_hv",)


@dataclass(frozen=True)
class FtmsParams:
    """Nominal FTMS parameters and operating bounds."""

    m1_initial: float = 200.0      # kg, recirculation tank mass
    m2_initial: float = 2850.0     # kg, reservoir tank mass
    t1_initial: float = 288.0      # K, recirculation fuel temperature
    t2: float = 288.0              # K, reservoir fuel temperature (constant)
    mdot_fuel: float = 1.0         # kg/s, pumped fuel flow rate
    mdot_engine: float = 0.26      # kg/s, engine fuel flow rate
    c_v: float = 2010.0            # J/(kg K), fuel specific heat
    q_fadec: float = 1000.0        # W, FADEC heat input
    q_vcs_nominal: float = 55000.0  # W, nominal VCS heat input (the disturbance)
    q_engine: float = 10000.0      # W, engine heat input
    q_acm_max: float = 120000.0    # W, maximum ACM cooling load
    p_pump: float = 50000.0        # W, fuel pump power
    k_pump_heat: float = -6618.0   # W s/kg, fuel pump heat input coefficient
    mass_bounds: tuple = (50.0, 2850.0)   # kg, both tanks
    temp_bounds: tuple = (250.0, 333.0)   # K, tank 1
    input_bounds: tuple = (0.0, 1.0)      # both inputs

    def __post_init__(self):
        positive = (
            self.m1_initial, self.m2_initial, self.mdot_fuel, self.mdot_engine,
            self.c_v, self.q_fadec, self.q_vcs_nominal, self.q_engine,
            self.q_acm_max, self.p_pump,
        )
        if any(v <= 0.0 for v in positive):
            raise ValueError("masses, flows and heat terms must be positive")
        if self.k_pump_heat >= 0.0:
            raise ValueError("pump heat coefficient is negative by definition")

    @property
    def x_initial(self) -> np.ndarray:
        return np.array([self.m1_initial, self.m2_initial, self.t1_initial])

    @property
    def q_constant(self) -> float:
        """Disturbance-independent part of the total heat load."""
        return self.q_fadec + self.q_engine + (self.p_pump + self.k_pump_heat * self.mdot_fuel)


@dataclass(frozen=True)
class FtmsModel(PlantModel):
    """Forward-Euler discretization of the FTMS dynamics."""

    params: FtmsParams = field(default_factory=FtmsParams)
    t_sample: float = 100.0
    signature: ModelSignature = field(default=ModelSignature(3, 2, 1, 5), init=False)

    def _check_mass(self, m1: float):
        if m1 <= 0.0:
            raise SingularityError(f"tank-1 mass {m1} <= 0 is outside the evaluable region")

    def heat_load(self, d: float) -> float:
        return self.params.q_constant + d

    def rates(self, x, u, d) -> np.ndarray:
        """Continuous-time state derivatives."""
        p = self.params
        m1, _, t1 = x
        alpha, beta = u
        self._check_mass(m1)
        q_in = self.heat_load(float(np.atleast_1d(d)[0]))
        dm1 = (1.0 - alpha) * p.mdot_fuel - p.mdot_engine
        dm2 = -(1.0 - alpha) * p.mdot_fuel
        bracket = (1.0 - alpha) * (p.t2 - t1) + q_in / (p.c_v * p.mdot_fuel)
        dt1 = (p.mdot_fuel - p.mdot_engine) / m1 * bracket - beta * p.q_acm_max / (p.c_v * m1)
        return np.array([dm1, dm2, dt1])

    def step(self, x, u, d) -> np.ndarray:
        return np.asarray(x, dtype=float) + self.t_sample * self.rates(x, u, d)

    def jacobians(self, x, u, d):
        p = self.params
        m1, _, t1 = x
        alpha, _ = u
        beta = u[1]
        self._check_mass(m1)
        q_in = self.heat_load(float(np.atleast_1d(d)[0]))
        a_flow = p.mdot_fuel - p.mdot_engine
        bracket = (1.0 - alpha) * (p.t2 - t1) + q_in / (p.c_v * p.mdot_fuel)
        ts = self.t_sample

        A = np.eye(3)
        # dT1'/dM1 = (-a_flow * bracket + beta q_acm / c_v) / M1^2
        A[2, 0] = ts * (-a_flow * bracket + beta * p.q_acm_max / p.c_v) / m1**2
        # dT1'/dT1 = -a_flow (1 - alpha) / M1
        A[2, 2] = 1.0 + ts * (-a_flow * (1.0 - alpha) / m1)

        B = np.zeros((3, 2))
        B[0, 0] = ts * (-p.mdot_fuel)
        B[1, 0] = ts * p.mdot_fuel
        B[2, 0] = ts * (-a_flow * (p.t2 - t1) / m1)
        B[2, 1] = ts * (-p.q_acm_max / (p.c_v * m1))

        V = np.zeros((3, 1))
        V[2, 0] = ts * a_flow / (m1 * p.c_v * p.mdot_fuel)
        return A, B, V

    def hessian_abs_max(self, box: Interval) -> list:
        """Elementwise bounds on |d^2 f_i / dz^2| over a box in (x, u, d).

        f_1 and f_2 are affine in z, so their bounds are identically zero.
        The temperature component has the rational/bilinear structure
        f_3 = T1 + t_sample * P(z)/M1 with P affine-bilinear; its second
        derivatives are bounded by composing scalar range arithmetic.
        """
        if box.is_empty or box.dim != self.n_z:
            raise ValueError("need a nonempty box over (x, u, d)")
        p = self.params
        lo, hi = box.lower, box.upper
        if lo[0] <= 0.0:
            raise SingularityError("state box touches the M1 <= 0 singular region")

        m1 = ScalarRange(lo[0], hi[0])
        t1 = ScalarRange(lo[2], hi[2])
        alpha = ScalarRange(lo[3], hi[3])
        beta = ScalarRange(lo[4], hi[4])
        dq = ScalarRange(lo[5], hi[5])

        a_flow = p.mdot_fuel - p.mdot_engine
        inv_m = range_recip(m1)
        inv_m2 = range_mul(inv_m, inv_m)
        inv_m3 = range_mul(inv_m2, inv_m)

        one_minus_alpha = range_sub(ScalarRange.const(1.0), alpha)
        t2_minus_t1 = range_sub(ScalarRange.const(p.t2), t1)
        q_in = range_add(dq, ScalarRange.const(p.q_constant))
        bracket = range_mul(one_minus_alpha, t2_minus_t1)
        bracket = range_add(bracket, range_scale(q_in, 1.0 / (p.c_v * p.mdot_fuel)))
        # P = a_flow * bracket - beta * q_acm / c_v  (numerator of M1 * T1')
        numer = range_sub(range_scale(bracket, a_flow), range_scale(beta, p.q_acm_max / p.c_v))

        ts = self.t_sample
        H3 = np.zeros((self.n_z, self.n_z))
        H3[0, 0] = range_abs_sup(range_scale(range_mul(numer, inv_m3), 2.0 * ts))
        H3[0, 2] = range_abs_sup(range_scale(range_mul(one_minus_alpha, inv_m2), a_flow * ts))
        H3[0, 3] = range_abs_sup(range_scale(range_mul(t2_minus_t1, inv_m2), a_flow * ts))
        H3[0, 4] = range_abs_sup(range_scale(inv_m2, ts * p.q_acm_max / p.c_v))
        H3[0, 5] = range_abs_sup(range_scale(inv_m2, ts * a_flow / (p.c_v * p.mdot_fuel)))
        H3[2, 3] = range_abs_sup(range_scale(inv_m, a_flow * ts))
        H3 = np.maximum(H3, H3.T) * (1.0 + HESSIAN_INFLATION)

        zero = np.zeros((self.n_z, self.n_z))
        return [zero, zero.copy(), H3]

    def output_map(self, horizon: int) -> OutputMap:
        return ftms_output_map(horizon, self.params)


def ftms_output_map(horizon: int, params: FtmsParams | None = None) -> OutputMap:
    """Outputs stack states over inputs, y_k = (x_k, u_k), with constant
    interval constraints from the operating bounds; the terminal output drops
    the input rows (D_N = 0)."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    p = params if params is not None else FtmsParams()
    C = np.vstack([np.eye(3), np.zeros((2, 3))])
    D = np.vstack([np.zeros((3, 2)), np.eye(2)])
    m_lo, m_hi = p.mass_bounds
    t_lo, t_hi = p.temp_bounds
    u_lo, u_hi = p.input_bounds
    Y = Interval(
        np.array([m_lo, m_lo, t_lo, u_lo, u_lo]),
        np.array([m_hi, m_hi, t_hi, u_hi, u_hi]),
    )
    C_terminal = np.eye(3)
    D_terminal = np.zeros((3, 2))
    Y_terminal = Interval(np.array([m_lo, m_lo, t_lo]), np.array([m_hi, m_hi, t_hi]))
    return OutputMap(
        [C] * horizon + [C_terminal],
        [D] * horizon + [D_terminal],
        [Y] * horizon + [Y_terminal],
    )


def default_disturbance_profile() -> list:
    """Documented stand-in for the reference VCS heat trajectory: nominal
    55 kW with one mid-mission excursion to 75 kW. Piecewise-linear
    (time [s], value [W]) knots, config-overridable."""
    return [
        (0.0, 55000.0),
        (2000.0, 55000.0),
        (3000.0, 75000.0),
        (5000.0, 75000.0),
        (6000.0, 55000.0),
        (10000.0, 55000.0),
    ]


def sample_profile(knots, times) -> np.ndarray:
    """Piecewise-linear interpolation of (t, value) knots at given times;
    constant extrapolation outside the knot span."""
    knots = sorted((float(t), float(v)) for t, v in knots)
    ts = np.array([t for t, _ in knots])
    vs = np.array([v for _, v in knots])
    return np.interp(np.asarray(times, dtype=float), ts, vs)
