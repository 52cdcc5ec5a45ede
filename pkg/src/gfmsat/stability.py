"""Quasi-static synchronization stability of a droop-controlled converter.

The converter is reduced to a voltage source V_c at angle delta behind a
lossless reactance X from a stiff grid V_g. Power is a three-phase total with
peak-valued phasors, matching ``control.compute_power``.

With current limiting active the converter behaves as a current source of
magnitude I_max_sat aligned with the d-axis, so the power curve changes from
P_max sin(delta) to P_max_sat cos(delta).
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from numba import njit
from scipy.optimize import brentq

MODE_NORMAL = 0
MODE_SATURATED = 1


class NoEquilibrium(ValueError):
    """The requested power cannot be transferred in the given mode."""


class QuasiStaticParams(NamedTuple):
    V_c: float = 480.0 * math.sqrt(2.0) / math.sqrt(3.0)
    V_g: float = 480.0 * math.sqrt(2.0) / math.sqrt(3.0)
    X: float = 314.0 * 8e-3
    P_ref: float = 30e3
    k_P: float = 1e-3
    omega_0: float = 314.0
    omega_g: float = 314.0
    I_max_sat: float = 110.0
    omega_pp: float = 35.0


class SwingResult(NamedTuple):
    t: np.ndarray
    delta: np.ndarray
    P: np.ndarray
    mode: np.ndarray
    stable: bool
    clearing_angle: float


class CriticalClearing(NamedTuple):
    t_cc: float
    clearing_angle: float
    critical_angle: float


def validate_params(p: QuasiStaticParams) -> None:
    if not p.X > 0.0:
        raise ValueError(f"X must be positive, got {p.X}")
    if not (p.V_c > 0.0 and p.V_g > 0.0):
        raise ValueError("V_c and V_g must be positive")
    if not p.I_max_sat > 0.0:
        raise ValueError(f"I_max_sat must be positive, got {p.I_max_sat}")
    if not p.omega_pp > 0.0:
        raise ValueError(f"omega_pp must be positive, got {p.omega_pp}")


def p_max(p: QuasiStaticParams) -> float:
    return 1.5 * p.V_c * p.V_g / p.X


def p_max_sat(p: QuasiStaticParams) -> float:
    return 1.5 * p.V_g * p.I_max_sat


def p_delta_normal(delta, p: QuasiStaticParams):
    return p_max(p) * np.sin(delta)


def p_delta_saturated(delta, p: QuasiStaticParams):
    return p_max_sat(p) * np.cos(delta)


def implied_current(delta, p: QuasiStaticParams):
    """Line current magnitude the unsaturated source would drive at ``delta``."""
    return np.abs(p.V_c * np.exp(1j * np.asarray(delta)) - p.V_g) / p.X


def equilibrium_angles(p: QuasiStaticParams) -> tuple[float, float, float]:
    """Return (delta_0, delta_max, delta_max_sat)."""
    pm, pms = p_max(p), p_max_sat(p)
    if p.P_ref > pm or p.P_ref < -pm:
        raise NoEquilibrium(f"P_ref = {p.P_ref:g} W exceeds P_max = {pm:g} W")
    if p.P_ref > pms or p.P_ref < -pms:
        raise NoEquilibrium(f"P_ref = {p.P_ref:g} W exceeds P_max_sat = {pms:g} W")
    delta_0 = math.asin(p.P_ref / pm)
    return delta_0, math.pi - delta_0, math.acos(p.P_ref / pms)


def saturation_angle(p: QuasiStaticParams) -> float:
    """Angle in [0, pi] where the implied current reaches I_max_sat.

    Returns pi when the current never reaches the limit and 0 when it is
    reached even at zero angle.
    """
    f = lambda d: float(implied_current(d, p)) - p.I_max_sat
    if f(0.0) >= 0.0:
        return 0.0
    if f(math.pi) < 0.0:
        return math.pi
    return brentq(f, 0.0, math.pi, xtol=1e-12)


def fault_frequency(p: QuasiStaticParams) -> float:
    """Converter frequency once the filtered power has dropped to zero."""
    return p.omega_0 + p.k_P * p.P_ref


def _settle_horizon(p: QuasiStaticParams, delta_0: float) -> float:
    # slowest pole of the linearized droop-plus-filter loop at delta_0
    kk = p.k_P * p_max(p) * math.cos(delta_0)
    disc = p.omega_pp ** 2 - 4.0 * p.omega_pp * kk
    if kk <= 0.0:
        return 5.0
    if disc > 0.0:
        sigma = 0.5 * (p.omega_pp - math.sqrt(disc))
    else:
        sigma = 0.5 * p.omega_pp
    return max(5.0, 15.0 / sigma)


@njit(cache=True)
def _power(delta, in_fault, mode, pm, pms):
    if in_fault:
        return 0.0
    if mode == MODE_SATURATED:
        return pms * math.cos(delta)
    return pm * math.sin(delta)


@njit(cache=True)
def _mode(delta, with_sat, delta_x):
    if with_sat and abs(delta) >= delta_x:
        return MODE_SATURATED
    return MODE_NORMAL


@njit(cache=True)
def _rhs(delta, p_filt, in_fault, mode, pm, pms, P_ref, k_P, omega_0, omega_g, omega_pp):
    P = _power(delta, in_fault, mode, pm, pms)
    return omega_0 + k_P * (P_ref - p_filt) - omega_g, omega_pp * (P - p_filt)


@njit(cache=True)
def _swing_kernel(delta_0, T_fault, T_end, dt, with_sat, delta_x, pm, pms, P_ref, k_P,
                  omega_0, omega_g, omega_pp, tol_d, tol_p, stride, t_rec, d_rec, p_rec, m_rec):
    delta = delta_0
    p_filt = P_ref
    n_fault = int(round(T_fault / dt))
    n_end = int(math.ceil(T_end / dt))
    rows = 0
    cap = t_rec.shape[0]
    clearing = delta_0 if n_fault == 0 else math.nan
    verdict = -1
    k = 0
    while k <= n_end:
        in_fault = k < n_fault
        mode = _mode(delta, with_sat, delta_x)
        P = _power(delta, in_fault, mode, pm, pms)
        if k % stride == 0 and rows < cap:
            t_rec[rows] = k * dt
            d_rec[rows] = delta
            p_rec[rows] = P
            m_rec[rows] = mode
            rows += 1
        if k == n_fault:
            clearing = delta
        if not in_fault:
            if abs(delta) >= math.pi:
                verdict = 0
                break
            if abs(delta - delta_0) < tol_d and abs(P - P_ref) < tol_p and abs(p_filt - P_ref) < tol_p:
                verdict = 1
                break
        if k == n_end:
            break
        # mode and fault state are frozen across one RK4 step
        k1d, k1p = _rhs(delta, p_filt, in_fault, mode, pm, pms, P_ref, k_P, omega_0, omega_g, omega_pp)
        k2d, k2p = _rhs(delta + 0.5 * dt * k1d, p_filt + 0.5 * dt * k1p, in_fault, mode, pm, pms,
                        P_ref, k_P, omega_0, omega_g, omega_pp)
        k3d, k3p = _rhs(delta + 0.5 * dt * k2d, p_filt + 0.5 * dt * k2p, in_fault, mode, pm, pms,
                        P_ref, k_P, omega_0, omega_g, omega_pp)
        k4d, k4p = _rhs(delta + dt * k3d, p_filt + dt * k3p, in_fault, mode, pm, pms,
                        P_ref, k_P, omega_0, omega_g, omega_pp)
        delta += dt / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
        p_filt += dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        k += 1
    # always keep the final sample
    if rows == 0 or t_rec[rows - 1] != k * dt:
        if rows == cap:
            rows -= 1
        t_rec[rows] = k * dt
        d_rec[rows] = delta
        p_rec[rows] = _power(delta, k < n_fault, _mode(delta, with_sat, delta_x), pm, pms)
        m_rec[rows] = _mode(delta, with_sat, delta_x)
        rows += 1
    return rows, verdict, clearing


def swing_simulate(p: QuasiStaticParams, fault_duration: float, with_saturation: bool,
                   dt: float = 1e-4, t_settle: float | None = None, max_rows: int = 20000) -> SwingResult:
    """Integrate the angle and filtered power through a zero-power fault.

    The run stops early once the angle is back within 1e-3 rad of delta_0 with
    power within 1e-3 of P_ref, or once |delta| reaches pi (pole slip).
    """
    validate_params(p)
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if fault_duration < 0.0:
        raise ValueError(f"fault_duration must be non-negative, got {fault_duration}")
    delta_0, _, _ = equilibrium_angles(p)
    if t_settle is None:
        t_settle = _settle_horizon(p, delta_0)
    T_end = fault_duration + t_settle
    n_end = int(math.ceil(T_end / dt))
    stride = max(1, n_end // max_rows + 1)
    cap = n_end // stride + 3
    t_rec = np.zeros(cap)
    d_rec = np.zeros(cap)
    p_rec = np.zeros(cap)
    m_rec = np.zeros(cap, dtype=np.int64)
    rows, verdict, clearing = _swing_kernel(
        delta_0, fault_duration, T_end, dt, bool(with_saturation), saturation_angle(p), p_max(p),
        p_max_sat(p), p.P_ref, p.k_P, p.omega_0, p.omega_g, p.omega_pp, 1e-3,
        1e-3 * max(abs(p.P_ref), 1.0), stride, t_rec, d_rec, p_rec, m_rec)
    return SwingResult(t_rec[:rows], d_rec[:rows], p_rec[:rows], m_rec[:rows], verdict == 1, float(clearing))


def critical_clearing_time(p: QuasiStaticParams, with_saturation: bool, t_search: float = 10.0,
                           resolution: float = 1e-3, dt: float = 1e-4) -> CriticalClearing:
    """Longest stable fault duration, found by bisection to ``resolution``.

    Returns ``t_cc = inf`` when a fault lasting ``t_search`` is still stable.
    ``critical_angle`` is the analytic limit: delta_max_sat with limiting,
    delta_max without.
    """
    delta_0, delta_max, delta_max_sat = equilibrium_angles(p)
    critical = delta_max_sat if with_saturation else delta_max

    def stable(T: float) -> bool:
        return swing_simulate(p, T, with_saturation, dt=dt, max_rows=2).stable

    if stable(t_search):
        return CriticalClearing(math.inf, math.nan, critical)
    lo, hi = 0.0, t_search
    if not stable(lo):
        return CriticalClearing(0.0, delta_0, critical)
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if stable(mid):
            lo = mid
        else:
            hi = mid
    res = swing_simulate(p, lo, with_saturation, dt=dt, max_rows=2)
    return CriticalClearing(lo, res.clearing_angle, critical)


def stability_boundary(p: QuasiStaticParams, p_refs, durations, with_saturation: bool,
                       dt: float = 1e-4) -> np.ndarray:
    """Stable flags over a P_ref x fault-duration grid (rows follow ``p_refs``)."""
    out = np.zeros((len(p_refs), len(durations)), dtype=bool)
    for i, pr in enumerate(p_refs):
        q = p._replace(P_ref=float(pr))
        for j, T in enumerate(durations):
            try:
                out[i, j] = swing_simulate(q, float(T), with_saturation, dt=dt, max_rows=2).stable
            except NoEquilibrium:
                out[i, j] = False
    return out


__all__ = [
    "MODE_NORMAL",
    "MODE_SATURATED",
    "NoEquilibrium",
    "QuasiStaticParams",
    "SwingResult",
    "CriticalClearing",
    "validate_params",
    "p_max",
    "p_max_sat",
    "p_delta_normal",
    "p_delta_saturated",
    "implied_current",
    "equilibrium_angles",
    "saturation_angle",
    "fault_frequency",
    "swing_simulate",
    "critical_clearing_time",
    "stability_boundary",
]
