"""Cascaded grid-forming controller: droop, voltage PI, current limiter, current PI.

Every block is a pure function on small immutable tuples so the same code runs
inside the compiled simulation loop and from ordinary Python.
"""

from __future__ import annotations

import math
from enum import IntEnum
from typing import NamedTuple

from numba import njit

from .plant import converter_bridge
from .signal import DqPair, ThreePhase, abc_to_dq, dq_to_abc, magnitude_phase
from .vflux import (FluxDq, FluxEstimatorState, estimate_fluxes, flux_currents, flux_dq, flux_phase_angle,
                    smooth_flux_current)


class Strategy(IntEnum):
    PER_COMPONENT = 0
    AMPLITUDE = 1
    VFLUX = 2


class DroopParams(NamedTuple):
    omega_ref: float = 314.0
    v_ref: float = 480.0 * math.sqrt(2.0) / math.sqrt(3.0)
    P_ref: float = 30e3
    Q_ref: float = 0.0
    k_P: float = 1e-3
    k_Q: float = 1e-3
    omega_pp: float = 35.0


class DroopState(NamedTuple):
    p_filt: float
    q_filt: float
    theta_c: float
    omega_c: float


class PiState(NamedTuple):
    integrator: float
    kp: float
    ki: float


class GainSet(NamedTuple):
    k_pV: float = 0.55
    k_iV: float = 500.0
    k_pI: float = 500.0
    k_iI: float = 5000.0


class SaturationOutcome(NamedTuple):
    d: float
    q: float
    enable: int


class ControllerParams(NamedTuple):
    droop: DroopParams
    gains: GainSet
    strategy: int
    i_max_sat: float
    i_d_max: float
    i_q_max: float
    L_f: float
    C_f: float
    V_dc: float


class ControlState(NamedTuple):
    droop: DroopState
    pi_vd: PiState
    pi_vq: PiState
    pi_id: PiState
    pi_iq: PiState
    enable: int
    m_abc: ThreePhase
    flux: FluxEstimatorState


class Measurements(NamedTuple):
    i_f: ThreePhase  # filter-inductor currents
    v_g: ThreePhase  # PCC (filter capacitor) voltages
    i_out: ThreePhase  # current leaving the filter towards load, grid and fault


class ControlTrace(NamedTuple):
    P: float
    Q: float
    omega_c: float
    theta_c: float
    i_meas: DqPair
    i_ref: DqPair
    i_ref_sat: DqPair
    enable: int
    phi: float
    phi_flux: float
    i_flux: DqPair
    flux: FluxDq


def default_controller_params(L_f=2e-3, C_f=60e-6, V_dc=1000.0, strategy=Strategy.VFLUX,
                              i_max_sat=110.0, droop=None, gains=None,
                              i_d_max=None, i_q_max=None) -> ControllerParams:
    split = i_max_sat / math.sqrt(2.0)
    return ControllerParams(
        droop or DroopParams(),
        gains or GainSet(),
        int(strategy),
        float(i_max_sat),
        float(split if i_d_max is None else i_d_max),
        float(split if i_q_max is None else i_q_max),
        float(L_f),
        float(C_f),
        float(V_dc),
    )


def initial_control_state(params: ControllerParams, flux: FluxEstimatorState,
                          theta0: float = 0.0) -> ControlState:
    g = params.gains
    d = params.droop
    return ControlState(
        DroopState(float(d.P_ref), float(d.Q_ref), float(theta0), float(d.omega_ref)),
        PiState(0.0, g.k_pV, g.k_iV),
        PiState(0.0, g.k_pV, g.k_iV),
        PiState(0.0, g.k_pI, g.k_iI),
        PiState(0.0, g.k_pI, g.k_iI),
        1,
        ThreePhase(0.0, 0.0, 0.0),
        flux,
    )


@njit(cache=True)
def compute_power(v, i):
    p = 1.5 * (v.d * i.d + v.q * i.q)
    q = 1.5 * (v.q * i.d - v.d * i.q)
    return p, q


@njit(cache=True)
def droop_step(state, P, Q, params, dt):
    a = dt * params.omega_pp
    p_filt = (state.p_filt + a * P) / (1.0 + a)
    q_filt = (state.q_filt + a * Q) / (1.0 + a)
    omega_c = params.omega_ref + params.k_P * (params.P_ref - p_filt)
    theta_c = state.theta_c + dt * omega_c
    v_d_ref = params.v_ref + params.k_Q * (params.Q_ref - q_filt)
    return DroopState(p_filt, q_filt, theta_c, omega_c), v_d_ref


@njit(cache=True)
def pi_update(pi, error, enable, dt):
    """PI output and updated state; the integrator holds while ``enable`` is 0."""
    integ = pi.integrator
    if enable != 0:
        integ = integ + pi.ki * error * dt
    return pi.kp * error + integ, PiState(integ, pi.kp, pi.ki)


@njit(cache=True)
def voltage_loop(v_ref, v_meas, i_out, pi_d, pi_q, enable, omega_c, C_f, dt):
    ud, pi_d = pi_update(pi_d, v_ref.d - v_meas.d, enable, dt)
    uq, pi_q = pi_update(pi_q, v_ref.q - v_meas.q, enable, dt)
    i_d = ud + i_out.d - omega_c * C_f * v_meas.q
    i_q = uq + i_out.q + omega_c * C_f * v_meas.d
    return DqPair(i_d, i_q, 0.0), pi_d, pi_q


@njit(cache=True)
def saturate_per_component(i_ref, i_d_max, i_q_max):
    d = min(i_d_max, max(-i_d_max, i_ref.d))
    q = min(i_q_max, max(-i_q_max, i_ref.q))
    enable = 0 if (d != i_ref.d or q != i_ref.q) else 1
    return SaturationOutcome(d, q, enable)


@njit(cache=True)
def saturate_amplitude(i_ref, i_max_sat):
    mag, phi = magnitude_phase(i_ref)
    if mag < i_max_sat:
        return SaturationOutcome(i_ref.d, i_ref.q, 1)
    return SaturationOutcome(i_max_sat * math.cos(phi), i_max_sat * math.sin(phi), 0)


@njit(cache=True)
def saturate_vflux(i_ref, i_max_sat, phi_flux):
    mag = math.sqrt(i_ref.d * i_ref.d + i_ref.q * i_ref.q)
    if mag < i_max_sat:
        return SaturationOutcome(i_ref.d, i_ref.q, 1)
    return SaturationOutcome(i_max_sat * math.cos(phi_flux), i_max_sat * math.sin(phi_flux), 0)


@njit(cache=True)
def saturate(i_ref, params, phi_flux):
    if params.strategy == 0:
        return saturate_per_component(i_ref, params.i_d_max, params.i_q_max)
    if params.strategy == 1:
        return saturate_amplitude(i_ref, params.i_max_sat)
    return saturate_vflux(i_ref, params.i_max_sat, phi_flux)


@njit(cache=True)
def _current_axis(pi, error, feed_forward, half_dc, dt):
    integ = pi.integrator + pi.ki * error * dt
    m = (pi.kp * error + integ + feed_forward) / half_dc
    if m > 1.0 or m < -1.0:
        # conditional anti-windup: freeze the integrator while the modulator clips
        return min(1.0, max(-1.0, m)), pi
    return m, PiState(integ, pi.kp, pi.ki)


@njit(cache=True)
def current_loop(i_ref, i_meas, v_g, pi_d, pi_q, omega_c, L_f, V_dc, dt):
    half_dc = 0.5 * V_dc
    ff_d = v_g.d - omega_c * L_f * i_meas.q
    ff_q = v_g.q + omega_c * L_f * i_meas.d
    m_d, pi_d = _current_axis(pi_d, i_ref.d - i_meas.d, ff_d, half_dc, dt)
    m_q, pi_q = _current_axis(pi_q, i_ref.q - i_meas.q, ff_q, half_dc, dt)
    return DqPair(m_d, m_q, 0.0), pi_d, pi_q


@njit(cache=True)
def controller_step(meas, state, params, dt):
    """One controller update; returns ``(m_abc, new_state, trace)``.

    The voltage-loop anti-windup uses the saturation flag from the previous
    call, which breaks the algebraic loop between voltage PI and limiter.
    """
    theta = state.droop.theta_c
    v_dq = abc_to_dq(meas.v_g, theta)
    i_dq = abc_to_dq(meas.i_f, theta)
    io_dq = abc_to_dq(meas.i_out, theta)

    P, Q = compute_power(v_dq, io_dq)
    droop, v_d_ref = droop_step(state.droop, P, Q, params.droop, dt)
    omega_c = droop.omega_c

    flux_state = estimate_fluxes(state.m_abc, params.V_dc, meas.v_g, state.flux, dt)
    flux = flux_dq(flux_state, theta)
    I_df, I_qf = flux_currents(flux, params.L_f)
    flux_state = smooth_flux_current(flux_state, I_df, I_qf, dt)
    phi_flux = flux_phase_angle(flux_state.i_phi.d, flux_state.i_phi.q)

    v_ref = DqPair(v_d_ref, 0.0, 0.0)
    i_ref, pi_vd, pi_vq = voltage_loop(v_ref, v_dq, io_dq, state.pi_vd, state.pi_vq,
                                       state.enable, omega_c, params.C_f, dt)
    _, phi = magnitude_phase(i_ref)
    sat = saturate(i_ref, params, phi_flux)
    i_sat = DqPair(sat.d, sat.q, 0.0)

    m_dq, pi_id, pi_iq = current_loop(i_sat, i_dq, v_dq, state.pi_id, state.pi_iq,
                                      omega_c, params.L_f, params.V_dc, dt)
    m_abc = dq_to_abc(m_dq, theta)
    # the bridge clips each phase; keep what is actually applied for the flux estimator
    v_applied = converter_bridge(m_abc, params.V_dc)
    half = 0.5 * params.V_dc
    m_abc = ThreePhase(v_applied.a / half, v_applied.b / half, v_applied.c / half)

    new_state = ControlState(droop, pi_vd, pi_vq, pi_id, pi_iq, sat.enable, m_abc, flux_state)
    trace = ControlTrace(P, Q, omega_c, theta, i_dq, i_ref, i_sat, sat.enable, phi, phi_flux,
                         DqPair(I_df, I_qf, 0.0), flux)
    return m_abc, new_state, trace
