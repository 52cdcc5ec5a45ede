"""Command-line front end: ``gfmsat run|compare|stability|sweep``.

Exit codes: 0 stable, 2 synchronism lost, 3 numerical divergence,
1 configuration or I/O error. Multi-run commands return the worst code.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from ..stability import (NoEquilibrium, QuasiStaticParams, critical_clearing_time, p_max, p_max_sat,
                         stability_boundary, swing_simulate)
from .config import PRESETS, STRATEGY_NAMES, ScenarioConfig, config_to_dict, load_config, load_preset, set_parameter
from .emit import emit_csv, emit_report, emit_svg_plots
from .run import RunResult, compare_runs, exit_code, run_many, run_scenario

OUTPUT_ENV = "GFMSAT_OUTPUT_DIR"
EXIT_OK, EXIT_ERROR, EXIT_SYNC_LOST, EXIT_DIVERGED = 0, 1, 2, 3


def _load(source: str) -> ScenarioConfig:
    if not Path(source).exists() and source in PRESETS:
        return load_preset(source)
    return load_config(source)


def _output_dir(cfg: ScenarioConfig, override: str | None) -> Path:
    if override:
        return Path(override)
    return Path(os.environ.get(OUTPUT_ENV) or cfg.output.directory)


def parse_range(text: str) -> np.ndarray:
    """``lo:hi:n`` -> n evenly spaced values including both ends."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"range must be lo:hi:n, got {text!r}")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    if n < 1:
        raise ValueError(f"range count must be >= 1, got {n}")
    return np.linspace(lo, hi, n) if n > 1 else np.array([lo])


def _strategies(text: str) -> list[str]:
    names = [s.strip() for s in text.split(",") if s.strip()]
    bad = [s for s in names if s not in STRATEGY_NAMES]
    if bad or not names:
        raise ValueError(f"unknown strategy {', '.join(bad) or text!r}; choose from {', '.join(STRATEGY_NAMES)}")
    return names


def _metrics_doc(res: RunResult) -> dict:
    return {"strategy": res.config.saturation_strategy, "metrics": res.metrics.as_dict(),
            "exit_code": exit_code(res.metrics)}


def _emit_run(res: RunResult, out: Path, prefix: str, plots: bool) -> None:
    emit_csv(res.record, out / f"{prefix}.csv")
    doc = _metrics_doc(res)
    doc["config"] = config_to_dict(res.config)
    emit_report(doc, out / f"{prefix}_metrics.json")
    if plots:
        emit_svg_plots(res.record, out, prefix)


def _summary(res: RunResult) -> str:
    m = res.metrics
    rec = "none" if m.recovery_time is None else f"{m.recovery_time:.3f} s"
    return (f"{res.config.saturation_strategy:14s} peak={m.peak_phase_current:7.1f} A "
            f"sustained={m.peak_sustained_current:7.1f} A limit_violated={m.current_limit_violated!s:5s} "
            f"sync_lost={m.sync_lost!s:5s} recovery={rec} diverged={m.diverged}")


def cmd_run(args) -> int:
    cfg = _load(args.config)
    if args.strategy:
        cfg = cfg.with_strategy(_strategies(args.strategy)[0])
    out = _output_dir(cfg, args.out)
    res = run_scenario(cfg)
    _emit_run(res, out, cfg.output.prefix, not args.no_plots)
    print(_summary(res))
    print(f"outputs written to {out}")
    return exit_code(res.metrics)


def cmd_compare(args) -> int:
    cfg = _load(args.config)
    names = _strategies(args.strategies)
    out = _output_dir(cfg, args.out)
    cmp = compare_runs(cfg, names, workers=args.workers)
    for s, res in zip(cmp.strategies, cmp.results):
        _emit_run(res, out, f"{cfg.output.prefix}_{s}", not args.no_plots)
        print(_summary(res))
    smooth = cmp.smoothness()
    emit_report({"runs": cmp.table(), "smoothness": smooth, "config": config_to_dict(cfg)},
                out / f"{cfg.output.prefix}_comparison.json")
    for s, v in smooth.items():
        print(f"smoothness[{s}] = {v:.6g} rad")
    return max(exit_code(r.metrics) for r in cmp.results)


def quasi_static_params(cfg: ScenarioConfig) -> QuasiStaticParams:
    p, d = cfg.plant, cfg.droop
    return QuasiStaticParams(V_c=d.v_ref, V_g=p.V_g_peak, X=p.omega_g * p.L_g, P_ref=d.P_ref, k_P=d.k_P,
                             omega_0=d.omega_ref, omega_g=p.omega_g, I_max_sat=cfg.i_max_sat,
                             omega_pp=d.omega_pp)


def cmd_stability(args) -> int:
    cfg = _load(args.config)
    q = quasi_static_params(cfg)
    out = _output_dir(cfg, args.out)
    prefix = cfg.output.prefix
    report = {"params": q._asdict(), "fault_duration": cfg.fault.duration}
    for with_sat in (False, True):
        tag = "saturated" if with_sat else "normal"
        res = swing_simulate(q, cfg.fault.duration, with_sat, dt=args.dt)
        traj = np.column_stack([res.t, res.delta, res.P, res.mode])
        emit_csv(traj, out / f"{prefix}_swing_{tag}.csv", ("t", "delta", "P", "mode"))
        cc = critical_clearing_time(q, with_sat, dt=args.dt)
        report[tag] = {"stable": res.stable, "clearing_angle": res.clearing_angle, "t_cc": cc.t_cc,
                       "clearing_angle_at_t_cc": cc.clearing_angle, "critical_angle": cc.critical_angle}
        print(f"{tag:9s} stable={res.stable!s:5s} clearing_angle={res.clearing_angle:.4f} rad "
              f"T_cc={cc.t_cc:.4f} s critical_angle={cc.critical_angle:.4f} rad")
    if args.p_ref_range:
        p_refs = parse_range(args.p_ref_range)
    else:
        p_refs = np.linspace(0.1, 0.9, 9) * min(p_max(q), p_max_sat(q))
    durations = parse_range(args.duration_range) if args.duration_range else np.linspace(0.0, 0.2, 21)
    for with_sat in (False, True):
        tag = "saturated" if with_sat else "normal"
        grid = stability_boundary(q, p_refs, durations, with_sat, dt=args.dt)
        rows = np.column_stack([p_refs, grid.astype(float)])
        cols = ("P_ref",) + tuple(f"T={T:g}" for T in durations)
        emit_csv(rows, out / f"{prefix}_boundary_{tag}.csv", cols)
    emit_report(report, out / f"{prefix}_stability.json")
    print(f"outputs written to {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args.config)
    values = parse_range(args.range)
    names = _strategies(args.strategies) if args.strategies else [cfg.saturation_strategy]
    out = _output_dir(cfg, args.out)
    cfgs = [set_parameter(cfg, args.param, float(v)).with_strategy(s) for s in names for v in values]
    results = run_many(cfgs, workers=args.workers)
    rows = []
    for c, res in zip(cfgs, results):
        m = res.metrics
        rows.append({"strategy": c.saturation_strategy, "value": float(_get(c, args.param)), **m.as_dict(),
                     "exit_code": exit_code(m)})
        print(f"{args.param}={rows[-1]['value']:<10g} {_summary(res)}")
    table = np.array([[names.index(r["strategy"]), r["value"], r["peak_phase_current"], r["sync_lost"],
                       math.nan if r["recovery_time"] is None else r["recovery_time"], r["diverged"]]
                      for r in rows], dtype=float)
    emit_csv(table, out / f"{cfg.output.prefix}_sweep.csv",
             ("strategy_index", "value", "peak_phase_current", "sync_lost", "recovery_time", "diverged"))
    emit_report({"param": args.param, "strategies": names, "rows": rows}, out / f"{cfg.output.prefix}_sweep.json")
    print(f"outputs written to {out}")
    return max(r["exit_code"] for r in rows)


def _get(cfg: ScenarioConfig, key: str):
    node = config_to_dict(cfg)
    for part in key.split("."):
        node = node[part]
    return node


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gfmsat", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, plots=True):
        p.add_argument("config", help="TOML scenario file or preset name (" + ", ".join(PRESETS) + ")")
        p.add_argument("--out", help=f"output directory (overrides ${OUTPUT_ENV} and output.directory)")
        if plots:
            p.add_argument("--no-plots", action="store_true", help="skip SVG figures")

    p = sub.add_parser("run", help="simulate one scenario")
    common(p)
    p.add_argument("--strategy", help="override saturation_strategy")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run one scenario under several saturation strategies")
    common(p)
    p.add_argument("--strategies", default="amplitude,vflux")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("stability", help="quasi-static angle stability of the scenario's operating point")
    common(p, plots=False)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--p-ref-range", help="lo:hi:n grid of P_ref for the boundary table")
    p.add_argument("--duration-range", help="lo:hi:n grid of fault durations for the boundary table")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("sweep", help="run a scenario over a range of one numeric parameter")
    common(p, plots=False)
    p.add_argument("--param", required=True, help="dotted key, e.g. fault.duration")
    p.add_argument("--range", required=True, help="lo:hi:n")
    p.add_argument("--strategies", help="comma-separated strategies (default: the config's)")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, NoEquilibrium) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
