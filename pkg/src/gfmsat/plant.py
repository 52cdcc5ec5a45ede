"""Averaged three-phase converter, LC filter, PCC load and grid in the abc frame.

Per phase::

    L_f di_f/dt    = v_c - R_f i_f - v_pcc - v_n
    C_f dv_g/dt    = i_f - v_pcc / R_L - i_line - i_fault
    L_g di_line/dt = v_pcc - R_g i_line - v_src

The bridge is three-wire (floating DC midpoint), so ``v_n`` is the common-mode
voltage that keeps ``sum(i_f) == 0``.  Capacitor star, load, grid and fault
branch are grounded, which leaves a zero-sequence path on the network side for
the two-phase-to-ground fault.
"""

from __future__ import annotations

import math
from enum import IntEnum
from typing import NamedTuple

from numba import njit

from .signal import ThreePhase


class FaultKind(IntEnum):
    NONE = 0
    THREE_PHASE_SAG = 1
    TWO_PHASE_SHORT_TO_GROUND = 2
    THREE_PHASE_SHIFT = 3


class PlantParams(NamedTuple):
    L_f: float = 2e-3
    R_f: float = 1e-3
    C_f: float = 60e-6
    L_g: float = 8e-3
    R_g: float = 0.1
    R_L: float = 10.0
    V_dc: float = 1000.0
    V_g_peak: float = 480.0 * math.sqrt(2.0) / math.sqrt(3.0)
    omega_g: float = 314.0


class FaultDescriptor(NamedTuple):
    kind: int = 0
    start: float = 0.0
    duration: float = 0.0
    sag_fraction: float = 0.0
    shift_angle: float = 0.0
    fault_resistance: float = 1e-3


class PlantState(NamedTuple):
    i_f: ThreePhase
    v_g: ThreePhase
    i_line: ThreePhase
    t: float = 0.0


def validate_plant_params(p: PlantParams) -> None:
    for name in ("L_f", "R_f", "C_f", "L_g", "R_g", "R_L", "V_dc"):
        value = getattr(p, name)
        if not (math.isfinite(value) and value > 0.0):
            raise ValueError(f"plant.{name} must be positive, got {value!r}")
    if not (p.V_g_peak >= 0.0 and p.omega_g > 0.0):
        raise ValueError("plant.V_g_peak must be >= 0 and plant.omega_g > 0")


def validate_fault(f: FaultDescriptor) -> None:
    if f.kind not in tuple(FaultKind):
        raise ValueError(f"unknown fault kind {f.kind!r}")
    if not f.duration >= 0.0:
        raise ValueError(f"fault.duration must be >= 0, got {f.duration!r}")
    if not f.start >= 0.0:
        raise ValueError(f"fault.start must be >= 0, got {f.start!r}")
    if not 0.0 <= f.sag_fraction <= 1.0:
        raise ValueError(f"fault.sag_fraction must lie in [0, 1], got {f.sag_fraction!r}")
    if not f.fault_resistance > 0.0:
        raise ValueError(f"fault.fault_resistance must be > 0, got {f.fault_resistance!r}")


def zero_state() -> PlantState:
    z = ThreePhase(0.0, 0.0, 0.0)
    return PlantState(z, z, z, 0.0)


def synchronized_state(p: PlantParams) -> PlantState:
    """Steady state with the PCC at the grid voltage and no line current.

    The filter current carries only the load and capacitor currents, so the
    converter starts without an inrush transient.
    """
    k = (0.0, 2.0 * math.pi / 3.0, 4.0 * math.pi / 3.0)
    v = [p.V_g_peak * math.cos(-kk) for kk in k]
    dv = [-p.V_g_peak * p.omega_g * math.sin(-kk) for kk in k]
    i_f = [vi / p.R_L + p.C_f * dvi for vi, dvi in zip(v, dv)]
    return PlantState(ThreePhase(*i_f), ThreePhase(*v), ThreePhase(0.0, 0.0, 0.0), 0.0)


@njit(cache=True)
def fault_active(t, fault):
    return fault.kind != 0 and fault.start <= t < fault.start + fault.duration


@njit(cache=True)
def grid_source(t, fault, p):
    amp = p.V_g_peak
    shift = 0.0
    if fault_active(t, fault):
        if fault.kind == 1:
            amp = amp * (1.0 - fault.sag_fraction)
        elif fault.kind == 3:
            shift = fault.shift_angle
    wt = p.omega_g * t + shift
    step = 2.0 * math.pi / 3.0
    return ThreePhase(amp * math.cos(wt), amp * math.cos(wt - step), amp * math.cos(wt - 2.0 * step))


@njit(cache=True)
def converter_bridge(m, V_dc):
    half = 0.5 * V_dc
    return ThreePhase(
        half * min(1.0, max(-1.0, m.a)),
        half * min(1.0, max(-1.0, m.b)),
        half * min(1.0, max(-1.0, m.c)),
    )


@njit(cache=True)
def fault_currents(s, fault, t):
    """Current drawn by the fault shunt at the PCC (phases b and c)."""
    if fault.kind == 2 and fault_active(t, fault):
        g = 1.0 / fault.fault_resistance
        return ThreePhase(0.0, s.v_g.b * g, s.v_g.c * g)
    return ThreePhase(0.0, 0.0, 0.0)


@njit(cache=True)
def plant_derivatives(s, v_c, p, fault):
    t = s.t
    src = grid_source(t, fault, p)
    i_flt = fault_currents(s, fault, t)
    i_f = s.i_f
    v = s.v_g
    il = s.i_line

    ua = v_c.a - p.R_f * i_f.a - v.a
    ub = v_c.b - p.R_f * i_f.b - v.b
    uc = v_c.c - p.R_f * i_f.c - v.c
    v_n = (ua + ub + uc) / 3.0
    d_if = ThreePhase((ua - v_n) / p.L_f, (ub - v_n) / p.L_f, (uc - v_n) / p.L_f)

    d_v = ThreePhase(
        (i_f.a - v.a / p.R_L - il.a - i_flt.a) / p.C_f,
        (i_f.b - v.b / p.R_L - il.b - i_flt.b) / p.C_f,
        (i_f.c - v.c / p.R_L - il.c - i_flt.c) / p.C_f,
    )
    d_il = ThreePhase(
        (v.a - p.R_g * il.a - src.a) / p.L_g,
        (v.b - p.R_g * il.b - src.b) / p.L_g,
        (v.c - p.R_g * il.c - src.c) / p.L_g,
    )
    return PlantState(d_if, d_v, d_il, 1.0)


@njit(cache=True)
def _tp_axpy(x, k, y):
    return ThreePhase(x.a + k * y.a, x.b + k * y.b, x.c + k * y.c)


@njit(cache=True)
def _advance(s, h, d):
    return PlantState(_tp_axpy(s.i_f, h, d.i_f), _tp_axpy(s.v_g, h, d.v_g),
                      _tp_axpy(s.i_line, h, d.i_line), s.t + h)


@njit(cache=True)
def _tp_rk4(x, h, k1, k2, k3, k4):
    w = h / 6.0
    return ThreePhase(
        x.a + w * (k1.a + 2.0 * k2.a + 2.0 * k3.a + k4.a),
        x.b + w * (k1.b + 2.0 * k2.b + 2.0 * k3.b + k4.b),
        x.c + w * (k1.c + 2.0 * k2.c + 2.0 * k3.c + k4.c),
    )


@njit(cache=True)
def rk4_step(s, v_c, p, fault, h):
    k1 = plant_derivatives(s, v_c, p, fault)
    k2 = plant_derivatives(_advance(s, 0.5 * h, k1), v_c, p, fault)
    k3 = plant_derivatives(_advance(s, 0.5 * h, k2), v_c, p, fault)
    k4 = plant_derivatives(_advance(s, h, k3), v_c, p, fault)
    return PlantState(
        _tp_rk4(s.i_f, h, k1.i_f, k2.i_f, k3.i_f, k4.i_f),
        _tp_rk4(s.v_g, h, k1.v_g, k2.v_g, k3.v_g, k4.v_g),
        _tp_rk4(s.i_line, h, k1.i_line, k2.i_line, k3.i_line, k4.i_line),
        s.t + h,
    )


@njit(cache=True)
def substeps(s, p, fault, dt):
    """RK4 sub-steps needed to keep the fault shunt's R*C_f mode stable."""
    if fault.kind == 2 and (fault_active(s.t, fault) or fault_active(s.t + dt, fault)):
        # |h * lambda| <= 2 keeps RK4 inside its real-axis stability interval
        n = int(math.ceil(dt / (2.0 * fault.fault_resistance * p.C_f)))
        return max(1, n)
    return 1


@njit(cache=True)
def step_plant(s, v_c, p, fault, dt):
    """Advance one step of length ``dt`` with classical RK4 (v_c held constant)."""
    n = substeps(s, p, fault, dt)
    h = dt / n
    t_end = s.t + dt
    for _ in range(n):
        s = rk4_step(s, v_c, p, fault, h)
    # keep the clock free of sub-step round-off
    return PlantState(s.i_f, s.v_g, s.i_line, t_end)


@njit(cache=True)
def plant_diverged(s, p, i_nominal):
    """True once any state leaves 100x its nominal scale (or is not finite)."""
    i_lim = 100.0 * i_nominal
    v_lim = 100.0 * max(p.V_g_peak, 0.5 * p.V_dc)
    for x in (s.i_f, s.i_line):
        for val in (x.a, x.b, x.c):
            if not abs(val) <= i_lim:
                return True
    for val in (s.v_g.a, s.v_g.b, s.v_g.c):
        if not abs(val) <= v_lim:
            return True
    return False


@njit(cache=True)
def stored_energy(s, p):
    e = 0.0
    for x, y, z in ((s.i_f.a, s.v_g.a, s.i_line.a), (s.i_f.b, s.v_g.b, s.i_line.b),
                    (s.i_f.c, s.v_g.c, s.i_line.c)):
        e += 0.5 * p.L_f * x * x + 0.5 * p.C_f * y * y + 0.5 * p.L_g * z * z
    return e
