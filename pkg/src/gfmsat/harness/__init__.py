"""Scenario configuration, closed-loop runs, metrics and output writers."""

from .config import (ParseError, ScenarioConfig, ValidationError, config_to_dict, load_config, load_preset,
                     parse_config, set_parameter)
from .emit import csv_text, emit_csv, emit_report, emit_svg_plots
from .kernel import COLUMNS
from .run import Comparison, RunMetrics, RunResult, compare_runs, exit_code, run_many, run_scenario

__all__ = [
    "COLUMNS",
    "Comparison",
    "ParseError",
    "RunMetrics",
    "RunResult",
    "ScenarioConfig",
    "ValidationError",
    "compare_runs",
    "config_to_dict",
    "csv_text",
    "emit_csv",
    "emit_report",
    "emit_svg_plots",
    "exit_code",
    "load_config",
    "load_preset",
    "parse_config",
    "run_many",
    "run_scenario",
    "set_parameter",
]
