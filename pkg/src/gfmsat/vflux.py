"""Virtual-flux estimation and the flux-derived current phase angle.

Both converter-side and grid-side fluxes are obtained by integrating voltages
through ``1/(s + omega_f)``, a leaky integrator that forgets the unknown
initial flux.  The converter voltage is rebuilt from the modulation references
and the DC-link voltage, so no extra voltage sensor is needed.
"""

from __future__ import annotations

import math
from typing import NamedTuple

from numba import njit

from .plant import converter_bridge
from .signal import DqPair, ThreePhase, abc_to_dq, clarke


class FluxEstimatorState(NamedTuple):
    psi_c: ThreePhase
    psi_g: ThreePhase
    omega_f: float = 2.0 * math.pi
    # low-passed flux current in the dq frame; only its angle is used
    i_phi: DqPair = DqPair(0.0, 0.0, 0.0)
    omega_phi: float = 2.0 * math.pi


class FluxDq(NamedTuple):
    psi_cd: float
    psi_cq: float
    psi_gd: float
    psi_gq: float


@njit(cache=True)
def flux_filter_step(psi, v, omega_f, dt):
    """Backward-Euler step of ``dpsi/dt = v - omega_f * psi``."""
    return (psi + dt * v) / (1.0 + dt * omega_f)


@njit(cache=True)
def _filter_abc(psi, v, omega_f, dt):
    return ThreePhase(
        flux_filter_step(psi.a, v.a, omega_f, dt),
        flux_filter_step(psi.b, v.b, omega_f, dt),
        flux_filter_step(psi.c, v.c, omega_f, dt),
    )


@njit(cache=True)
def estimate_fluxes(m_abc, V_dc, v_g_meas, state, dt):
    v_c = converter_bridge(m_abc, V_dc)
    return FluxEstimatorState(
        _filter_abc(state.psi_c, v_c, state.omega_f, dt),
        _filter_abc(state.psi_g, v_g_meas, state.omega_f, dt),
        state.omega_f,
        state.i_phi,
        state.omega_phi,
    )


@njit(cache=True)
def smooth_flux_current(state, I_df, I_qf, dt):
    """Low-pass the flux current vector before its angle is taken.

    With ``omega_phi == 0`` the raw vector passes through unchanged.
    """
    if state.omega_phi <= 0.0:
        i_phi = DqPair(I_df, I_qf, 0.0)
    else:
        a = dt * state.omega_phi
        i_phi = DqPair((state.i_phi.d + a * I_df) / (1.0 + a), (state.i_phi.q + a * I_qf) / (1.0 + a), 0.0)
    return FluxEstimatorState(state.psi_c, state.psi_g, state.omega_f, i_phi, state.omega_phi)


@njit(cache=True)
def flux_dq(state, theta):
    c = abc_to_dq(state.psi_c, theta)
    g = abc_to_dq(state.psi_g, theta)
    return FluxDq(c.d, c.q, g.d, g.q)


@njit(cache=True)
def flux_currents(flux, L_f):
    return (flux.psi_cd - flux.psi_gd) / L_f, (flux.psi_cq - flux.psi_gq) / L_f


@njit(cache=True)
def flux_phase_angle(I_df, I_qf):
    if abs(I_df) < 1e-6 and abs(I_qf) < 1e-6:
        return 0.0
    return math.atan2(I_qf, I_df)


def initial_fluxes(v_g: ThreePhase, i_f: ThreePhase, L_f: float, omega: float,
                   omega_f: float = 2.0 * math.pi, omega_phi: float = 2.0 * math.pi,
                   theta: float = 0.0) -> FluxEstimatorState:
    """Flux state consistent with a balanced sinusoidal steady state at ``omega``.

    The grid flux is the voltage space vector rotated by -90 degrees and
    scaled by 1/omega; the converter flux adds ``L_f * i_f``.
    """
    ab = clarke(v_g)
    # psi = v / (j omega) in the stationary frame
    psi_alpha = ab.beta / omega
    psi_beta = -ab.alpha / omega
    h = math.sqrt(3.0) / 2.0
    psi_g = ThreePhase(psi_alpha, -0.5 * psi_alpha + h * psi_beta, -0.5 * psi_alpha - h * psi_beta)
    psi_c = ThreePhase(psi_g.a + L_f * i_f.a, psi_g.b + L_f * i_f.b, psi_g.c + L_f * i_f.c)
    i_dq = abc_to_dq(i_f, theta)
    return FluxEstimatorState(psi_c, psi_g, float(omega_f), DqPair(i_dq.d, i_dq.q, 0.0), float(omega_phi))


__all__ = [
    "DqPair",
    "FluxDq",
    "FluxEstimatorState",
    "estimate_fluxes",
    "flux_currents",
    "flux_dq",
    "flux_filter_step",
    "flux_phase_angle",
    "initial_fluxes",
    "smooth_flux_current",
]
