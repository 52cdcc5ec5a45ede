"""Run scenarios end to end and reduce the traces to metrics."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from ..control import default_controller_params, initial_control_state
from ..plant import FaultKind, synchronized_state
from ..vflux import initial_fluxes
from .config import ScenarioConfig
from . import kernel as K

RECOVERY_POWER_BAND = 0.02
RECOVERY_OMEGA_BAND = 0.5
RECOVERY_DWELL = 0.5
TRANSIENT_FACTOR = 1.2
SUSTAINED_FACTOR = 1.05


@dataclass(frozen=True)
class RunMetrics:
    peak_phase_current: float
    current_limit_violated: bool
    sync_lost: bool
    recovery_time: float | None
    diverged: bool
    # peak more than 10 ms after start-up and after fault onset
    peak_sustained_current: float
    # largest step of each angle trace inside the fault window, sampled at f_s
    phi_max_step: float
    phi_flux_max_step: float
    final_P: float
    final_omega: float
    t_final: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RunResult:
    record: np.ndarray
    metrics: RunMetrics
    config: ScenarioConfig

    @property
    def columns(self) -> tuple[str, ...]:
        return K.COLUMNS

    def column(self, name: str) -> np.ndarray:
        return self.record[:, K.COLUMNS.index(name)]


def smoothness_statistic(metrics: RunMetrics, strategy: str) -> float:
    """Max step of the angle used by ``strategy``'s limiter during the fault."""
    return metrics.phi_flux_max_step if strategy == "vflux" else metrics.phi_max_step


def exit_code(metrics: RunMetrics) -> int:
    if metrics.diverged:
        return 3
    if metrics.sync_lost:
        return 2
    return 0


def _build(cfg: ScenarioConfig):
    plant = cfg.plant
    ctrl = default_controller_params(
        L_f=plant.L_f, C_f=plant.C_f, V_dc=plant.V_dc, strategy=cfg.strategy, i_max_sat=cfg.i_max_sat,
        droop=cfg.droop, gains=cfg.gains, i_d_max=cfg.i_d_max, i_q_max=cfg.i_q_max)
    s0 = synchronized_state(plant)
    flux = initial_fluxes(s0.v_g, s0.i_f, plant.L_f, plant.omega_g, cfg.omega_f, cfg.omega_phi)
    c0 = initial_control_state(ctrl, flux)
    return s0, c0, plant, ctrl


def run_scenario(cfg: ScenarioConfig) -> RunResult:
    """Simulate ``cfg`` and return the decimated record plus metrics."""
    s0, c0, plant, ctrl = _build(cfg)
    n_sub = cfg.n_sub
    dt_ctrl = cfg.dt_plant * n_sub
    n_steps = int(round(cfg.t_end / dt_ctrl))
    dec = cfg.output.decimation
    fs_stride = max(1, int(round(1.0 / (cfg.f_s * dt_ctrl))))
    record = np.zeros((n_steps // dec + 1, K.N_COLUMNS))
    out = K.simulate(s0, c0, plant, ctrl, cfg.fault, cfg.dt_plant, n_sub, n_steps, dec, fs_stride,
                     cfg.i_max_sat, RECOVERY_POWER_BAND, RECOVERY_OMEGA_BAND, RECOVERY_DWELL, record)
    record = record[: int(out[K.S_ROWS])]
    diverged = bool(out[K.S_DIVERGED])
    peak = float(out[K.S_PEAK])
    sustained = float(out[K.S_PEAK_SUSTAINED])
    recovered = bool(out[K.S_RECOVERED]) and not diverged
    violated = peak > TRANSIENT_FACTOR * cfg.i_max_sat or sustained > SUSTAINED_FACTOR * cfg.i_max_sat
    metrics = RunMetrics(
        peak_phase_current=peak,
        current_limit_violated=bool(violated),
        sync_lost=not recovered,
        recovery_time=float(out[K.S_RECOVERY_T]) if recovered else None,
        diverged=diverged,
        peak_sustained_current=sustained,
        phi_max_step=float(out[K.S_PHI_STEP]),
        phi_flux_max_step=float(out[K.S_PHI_FLUX_STEP]),
        final_P=float(out[K.S_FINAL_P]),
        final_omega=float(out[K.S_FINAL_OMEGA]),
        t_final=float(out[K.S_T_DIVERGED]) if diverged else float(out[K.S_STEPS]) * dt_ctrl,
    )
    return RunResult(record, metrics, cfg)


def run_many(cfgs, workers: int | None = None) -> list[RunResult]:
    """Run independent scenarios on worker threads (the kernel releases the GIL)."""
    cfgs = list(cfgs)
    if workers == 1 or len(cfgs) <= 1:
        return [run_scenario(c) for c in cfgs]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(run_scenario, cfgs))


@dataclass(frozen=True)
class Comparison:
    strategies: tuple[str, ...]
    results: tuple[RunResult, ...]

    def smoothness(self) -> dict[str, float]:
        return {s: smoothness_statistic(r.metrics, s) for s, r in zip(self.strategies, self.results)}

    def table(self) -> list[dict]:
        rows = []
        for s, r in zip(self.strategies, self.results):
            m = r.metrics
            rows.append({
                "strategy": s,
                "peak_phase_current": m.peak_phase_current,
                "peak_sustained_current": m.peak_sustained_current,
                "current_limit_violated": m.current_limit_violated,
                "sync_lost": m.sync_lost,
                "recovery_time": m.recovery_time,
                "diverged": m.diverged,
                "phi_max_step": m.phi_max_step,
                "phi_flux_max_step": m.phi_flux_max_step,
                "smoothness": smoothness_statistic(m, s),
            })
        return rows


def compare_runs(cfg_base: ScenarioConfig, strategies, workers: int | None = None) -> Comparison:
    strategies = tuple(strategies)
    results = run_many([cfg_base.with_strategy(s) for s in strategies], workers)
    return Comparison(strategies, tuple(results))


def fault_window_mask(result: RunResult) -> np.ndarray:
    f = result.config.fault
    t = result.column("t")
    if f.kind == FaultKind.NONE:
        return np.zeros(t.shape, dtype=bool)
    return (t >= f.start) & (t <= f.start + f.duration)


__all__ = [
    "Comparison",
    "RunMetrics",
    "RunResult",
    "compare_runs",
    "exit_code",
    "fault_window_mask",
    "run_many",
    "run_scenario",
    "smoothness_statistic",
]
