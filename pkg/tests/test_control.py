import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gfmsat.control import (DroopParams, DroopState, GainSet, PiState, Strategy, compute_power, current_loop,
                            default_controller_params, droop_step, saturate, saturate_amplitude,
                            saturate_per_component, saturate_vflux, voltage_loop)
from gfmsat.harness.config import OutputConfig, ScenarioConfig
from gfmsat.harness.run import run_scenario
from gfmsat.signal import DqPair

DP = DroopParams()
Z = DqPair(0.0, 0.0, 0.0)
comp = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)


def dq(d, q):
    return DqPair(float(d), float(q), 0.0)


@pytest.fixture(scope="module")
def steady_run():
    cfg = ScenarioConfig(t_end=2.0, saturation_strategy="vflux", output=OutputConfig(decimation=50))
    return run_scenario(cfg)


# --- power and droop ---------------------------------------------------------

@pytest.mark.parametrize("v, i, expected", [((100, 0), (10, 0), (1500.0, 0.0)), ((100, 0), (0, 10), (0.0, -1500.0))])
def test_compute_power_examples(v, i, expected):
    assert compute_power(dq(*v), dq(*i)) == pytest.approx(expected)


def test_power_matches_per_phase_average(steady_run):
    r = steady_run
    t = r.column("t")
    sel = (t >= 1.9 - 1e-9) & (t < 1.92 - 1e-9)  # one 20 ms cycle at 50 us spacing
    assert sel.sum() == 400
    R_L = r.config.plant.R_L
    p_inst = sum(r.column(f"v_pcc_{k}")[sel] * (r.column(f"v_pcc_{k}")[sel] / R_L + r.column(f"i_line_{k}")[sel])
                 for k in "abc")
    assert np.mean(r.column("P")[sel]) == pytest.approx(np.mean(p_inst), rel=1e-2)


def test_droop_zero_error_gives_references():
    s = DroopState(DP.P_ref, DP.Q_ref, 0.0, DP.omega_ref)
    new, v_d = droop_step(s, DP.P_ref, DP.Q_ref, DP, 1e-4)
    assert new.omega_c == DP.omega_ref and v_d == DP.v_ref
    assert new.theta_c == pytest.approx(1e-4 * DP.omega_ref)


def test_droop_zero_power_settles_to_fault_frequency():
    s = DroopState(DP.P_ref, 0.0, 0.0, DP.omega_ref)
    for _ in range(int(1.0 / 1e-4)):
        s, _ = droop_step(s, 0.0, 0.0, DP, 1e-4)
    assert s.omega_c == pytest.approx(344.0, abs=1e-6)


def test_droop_filter_time_constant():
    dt = 1e-6
    s = DroopState(0.0, 0.0, 0.0, DP.omega_ref)
    n = int(round(1.0 / DP.omega_pp / dt))
    for _ in range(n):
        s, _ = droop_step(s, 1000.0, 0.0, DP, dt)
    assert s.p_filt == pytest.approx(1000.0 * (1 - math.exp(-1)), rel=1e-3)


@given(st.floats(-1e5, 1e5), st.floats(-1e5, 1e5))
def test_droop_equilibrium_exact(P_ref, Q_ref):
    p = DP._replace(P_ref=P_ref, Q_ref=Q_ref)
    s = DroopState(P_ref, Q_ref, 0.0, 0.0)
    new, v_d = droop_step(s, P_ref, Q_ref, p, 1e-4)
    assert new.omega_c == p.omega_ref and v_d == p.v_ref


# --- voltage loop --------------------------------------------------------------

G = GainSet()
PI_V = PiState(0.0, G.k_pV, G.k_iV)


def test_voltage_loop_zero_error():
    i_ref, _, _ = voltage_loop(dq(100, 0), dq(100, 0), Z, PI_V, PI_V, 1, 0.0, 60e-6, 1e-4)
    assert (i_ref.d, i_ref.q) == (0.0, 0.0)


def test_voltage_loop_feed_forward_terms():
    i_ref, _, _ = voltage_loop(dq(100, 20), dq(100, 20), dq(5, -3), PI_V, PI_V, 1, 314.0, 60e-6, 1e-4)
    assert i_ref.d == pytest.approx(5 - 314 * 60e-6 * 20)
    assert i_ref.q == pytest.approx(-3 + 314 * 60e-6 * 100)


def test_voltage_loop_freezes_integrators_bitwise():
    pd = PiState(1.234567, G.k_pV, G.k_iV)
    pq = PiState(-7.654321, G.k_pV, G.k_iV)
    for _ in range(1000):
        _, pd, pq = voltage_loop(dq(400, 0), dq(100, 50), Z, pd, pq, 0, 314.0, 60e-6, 1e-4)
    assert pd.integrator == 1.234567 and pq.integrator == -7.654321


def test_voltage_integrator_matches_analytic_integral():
    e, T, dt = 3.0, 0.05, 1e-4
    pd = pq = PI_V
    for _ in range(int(round(T / dt))):
        _, pd, pq = voltage_loop(dq(e, 0), Z, Z, pd, pq, 1, 0.0, 60e-6, dt)
    assert pd.integrator == pytest.approx(G.k_iV * e * T, abs=G.k_iV * e * dt)
    assert pq.integrator == 0.0


# --- limiters ------------------------------------------------------------------

@pytest.mark.parametrize("i_ref, expected, enable", [
    ((50, 30), (50, 30), 1),
    ((200, 0), (100, 0), 0),
    ((200, 200), (100, 45.8), 0),
])
def test_per_component_examples(i_ref, expected, enable):
    out = saturate_per_component(dq(*i_ref), 100.0, 45.8)
    assert (out.d, out.q) == pytest.approx(expected) and out.enable == enable
    assert math.hypot(out.d, out.q) <= 110.0 + 1e-9


def test_per_component_changes_angle():
    out = saturate_per_component(dq(200, 200), 100.0, 45.8)
    assert abs(math.atan2(out.q, out.d) - math.pi / 4) > 0.3


@pytest.mark.parametrize("i_ref, expected, enable", [
    ((50, 30), (50, 30), 1),
    ((220, 0), (110, 0), 0),
    ((110, 110), (110 * math.cos(math.pi / 4), 110 * math.sin(math.pi / 4)), 0),
])
def test_amplitude_examples(i_ref, expected, enable):
    out = saturate_amplitude(dq(*i_ref), 110.0)
    assert (out.d, out.q) == pytest.approx(expected) and out.enable == enable


@pytest.mark.parametrize("i_ref, phi, expected, enable", [
    ((50, 30), 1.0, (50, 30), 1),
    ((500, 0), math.pi / 6, (95.2627944, 55.0), 0),
])
def test_vflux_examples(i_ref, phi, expected, enable):
    out = saturate_vflux(dq(*i_ref), 110.0, phi)
    assert (out.d, out.q) == pytest.approx(expected) and out.enable == enable


@given(comp, comp, st.floats(-math.pi, math.pi))
def test_limiters_never_exceed_limit(d, q, phi):
    i_max = 110.0
    split = i_max / math.sqrt(2)
    for strategy in Strategy:
        params = default_controller_params(strategy=strategy, i_max_sat=i_max)
        out = saturate(dq(d, q), params, phi)
        assert math.hypot(out.d, out.q) <= i_max + 1e-9
    out = saturate_per_component(dq(d, q), split, split)
    assert math.hypot(out.d, out.q) <= i_max + 1e-9


@given(comp, comp)
def test_amplitude_preserves_angle(d, q):
    out = saturate_amplitude(dq(d, q), 110.0)
    if out.enable == 0 and math.hypot(d, q) > 0:
        assert math.atan2(out.q, out.d) == pytest.approx(math.atan2(q, d), abs=1e-12)


@given(comp, comp)
def test_enable_iff_magnitude_reaches_limit(d, q):
    for out in (saturate_amplitude(dq(d, q), 110.0), saturate_vflux(dq(d, q), 110.0, 0.3)):
        assert (out.enable == 0) == (math.hypot(d, q) >= 110.0)


@given(st.floats(-77, 77), st.floats(-77, 77), st.floats(-math.pi, math.pi))
def test_strategies_identical_below_limit(d, q, phi):
    outs = {saturate(dq(d, q), default_controller_params(strategy=s), phi) for s in Strategy}
    assert len(outs) == 1


# --- current loop --------------------------------------------------------------

PI_I = PiState(0.0, G.k_pI, G.k_iI)


def test_current_loop_zero():
    m, _, _ = current_loop(Z, Z, Z, PI_I, PI_I, 314.0, 2e-3, 1000.0, 1e-4)
    assert (m.d, m.q) == (0.0, 0.0)


def test_current_loop_voltage_feed_forward():
    m, _, _ = current_loop(Z, Z, dq(391.9, 0), PI_I, PI_I, 314.0, 2e-3, 1000.0, 1e-4)
    assert m.d == pytest.approx(391.9 / 500.0)


def test_current_loop_decoupling_sign():
    i = dq(10, 0)
    m, _, _ = current_loop(i, i, Z, PI_I, PI_I, 314.0, 2e-3, 1000.0, 1e-4)
    assert m.q * 500.0 == pytest.approx(314 * 0.002 * 10)
    assert m.d == 0.0


def test_current_loop_clamps_and_holds_integrator():
    m, pd, pq = current_loop(dq(100, 0), Z, dq(450, 0), PI_I, PI_I, 314.0, 2e-3, 1000.0, 1e-4)
    assert m.d == 1.0 and pd.integrator == 0.0
    assert pq.integrator == 0.0


# --- closed loop -----------------------------------------------------------------

def test_closed_loop_settles_to_droop_equilibrium(steady_run):
    m = steady_run.metrics
    assert not m.sync_lost and not m.current_limit_violated
    assert abs(m.final_P - 30e3) < 0.01 * 30e3
    assert abs(m.final_omega - 314.0) < 0.01


def test_flux_angle_agrees_with_reference_angle_in_steady_state(steady_run):
    t = steady_run.column("t")
    late = t > 1.5
    phi = steady_run.column("phi")[late]
    phi_flux = steady_run.column("phi_flux")[late]
    assert np.max(np.abs(phi - phi_flux)) < math.radians(2.0)
