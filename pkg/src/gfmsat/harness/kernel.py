"""Compiled closed-loop simulation: plant sub-steps between controller updates."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from ..control import Measurements, controller_step
from ..plant import PlantState, converter_bridge, fault_currents, plant_diverged, step_plant
from ..signal import ThreePhase, angle_diff

COLUMNS = (
    "t",
    "v_pcc_a", "v_pcc_b", "v_pcc_c",
    "i_f_a", "i_f_b", "i_f_c",
    "i_line_a", "i_line_b", "i_line_c",
    "P", "Q", "omega_c", "theta_c",
    "i_d", "i_q",
    "i_d_ref", "i_q_ref", "i_d_ref_sat", "i_q_ref_sat",
    "E_n", "phi", "phi_flux",
    "i_df", "i_qf",
    "psi_cd", "psi_cq", "psi_gd", "psi_gq",
)
N_COLUMNS = len(COLUMNS)

# slots of the summary vector returned by the kernel
S_STEPS = 0
S_DIVERGED = 1
S_T_DIVERGED = 2
S_PEAK = 3
S_PEAK_SUSTAINED = 4
S_PHI_STEP = 5
S_PHI_FLUX_STEP = 6
S_RECOVERED = 7
S_RECOVERY_T = 8
S_FINAL_P = 9
S_FINAL_OMEGA = 10
S_ROWS = 11
S_T_PEAK_SUSTAINED = 12
N_SUMMARY = 13


@njit(cache=True)
def _output_current(s, p, fault):
    flt = fault_currents(s, fault, s.t)
    return ThreePhase(
        s.v_g.a / p.R_L + s.i_line.a + flt.a,
        s.v_g.b / p.R_L + s.i_line.b + flt.b,
        s.v_g.c / p.R_L + s.i_line.c + flt.c,
    )


@njit(cache=True)
def _peak(x):
    return max(abs(x.a), max(abs(x.b), abs(x.c)))


@njit(cache=True, nogil=True)
def simulate(plant_state, ctrl_state, plant_params, ctrl_params, fault, dt_plant, n_sub,
             n_steps, decimation, fs_stride, i_max, power_band, omega_band, recovery_dwell, record):
    """Run ``n_steps`` controller periods of ``n_sub`` plant steps each.

    ``record`` receives one row every ``decimation`` controller periods.
    Recovery needs |P - P_ref| < power_band*|P_ref| and |omega - omega_ref| <
    omega_band held for ``recovery_dwell`` seconds after the fault clears.
    Returns the summary vector (see the ``S_*`` slots).
    """
    dt_ctrl = dt_plant * n_sub
    out = np.zeros(N_SUMMARY)
    out[S_RECOVERY_T] = math.nan
    droop = ctrl_params.droop
    t_on = fault.start if fault.kind != 0 else 0.0
    t_clear = fault.start + fault.duration if fault.kind != 0 else 0.0
    grace = 10e-3
    p_band = power_band * abs(droop.P_ref)
    streak = -1.0
    have_prev = False
    prev_phi = 0.0
    prev_phi_flux = 0.0
    rows = 0
    max_rows = record.shape[0]
    s = plant_state
    c = ctrl_state
    P = 0.0
    omega = droop.omega_ref
    k = 0
    while k < n_steps:
        t = s.t
        meas = Measurements(s.i_f, s.v_g, _output_current(s, plant_params, fault))
        m_abc, c, tr = controller_step(meas, c, ctrl_params, dt_ctrl)
        P = tr.P
        omega = tr.omega_c

        pk = _peak(s.i_f)
        if pk > out[S_PEAK]:
            out[S_PEAK] = pk
        in_grace = t < grace or (fault.kind != 0 and t_on <= t < t_on + grace)
        if not in_grace and pk > out[S_PEAK_SUSTAINED]:
            out[S_PEAK_SUSTAINED] = pk
            out[S_T_PEAK_SUSTAINED] = t

        if k % fs_stride == 0:
            in_fault = fault.kind != 0 and t_on <= t <= t_clear
            if in_fault:
                if have_prev:
                    d1 = abs(angle_diff(tr.phi, prev_phi))
                    d2 = abs(angle_diff(tr.phi_flux, prev_phi_flux))
                    if d1 > out[S_PHI_STEP]:
                        out[S_PHI_STEP] = d1
                    if d2 > out[S_PHI_FLUX_STEP]:
                        out[S_PHI_FLUX_STEP] = d2
                have_prev = True
                prev_phi = tr.phi
                prev_phi_flux = tr.phi_flux

        if t >= t_clear and out[S_RECOVERED] == 0.0:
            ok = abs(P - droop.P_ref) < p_band and abs(omega - droop.omega_ref) < omega_band
            if ok:
                if streak < 0.0:
                    streak = t
                if t - streak >= recovery_dwell:
                    out[S_RECOVERED] = 1.0
                    out[S_RECOVERY_T] = streak - t_clear
            else:
                streak = -1.0

        if k % decimation == 0 and rows < max_rows:
            r = record[rows]
            r[0] = t
            r[1] = s.v_g.a
            r[2] = s.v_g.b
            r[3] = s.v_g.c
            r[4] = s.i_f.a
            r[5] = s.i_f.b
            r[6] = s.i_f.c
            r[7] = s.i_line.a
            r[8] = s.i_line.b
            r[9] = s.i_line.c
            r[10] = tr.P
            r[11] = tr.Q
            r[12] = tr.omega_c
            r[13] = tr.theta_c
            r[14] = tr.i_meas.d
            r[15] = tr.i_meas.q
            r[16] = tr.i_ref.d
            r[17] = tr.i_ref.q
            r[18] = tr.i_ref_sat.d
            r[19] = tr.i_ref_sat.q
            r[20] = tr.enable
            r[21] = tr.phi
            r[22] = tr.phi_flux
            r[23] = tr.i_flux.d
            r[24] = tr.i_flux.q
            r[25] = tr.flux.psi_cd
            r[26] = tr.flux.psi_cq
            r[27] = tr.flux.psi_gd
            r[28] = tr.flux.psi_gq
            rows += 1

        v_c = converter_bridge(m_abc, plant_params.V_dc)
        for _ in range(n_sub):
            s = step_plant(s, v_c, plant_params, fault, dt_plant)
        # exact clock: avoid drift from repeated float additions
        k += 1
        s = PlantState(s.i_f, s.v_g, s.i_line, k * dt_ctrl)
        if plant_diverged(s, plant_params, i_max) or not math.isfinite(c.droop.theta_c):
            out[S_DIVERGED] = 1.0
            out[S_T_DIVERGED] = s.t
            break
    out[S_STEPS] = k
    out[S_FINAL_P] = P
    out[S_FINAL_OMEGA] = omega
    out[S_ROWS] = rows
    return out
