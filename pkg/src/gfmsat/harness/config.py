"""Scenario configuration: TOML documents mapped onto typed defaults.

Every key is optional; missing keys take the nominal system values. Unknown
keys are rejected so a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from ..control import DroopParams, GainSet, Strategy
from ..plant import FaultDescriptor, FaultKind, PlantParams, validate_fault, validate_plant_params

STRATEGY_NAMES = {
    "per_component": Strategy.PER_COMPONENT,
    "amplitude": Strategy.AMPLITUDE,
    "vflux": Strategy.VFLUX,
}
FAULT_NAMES = {
    "none": FaultKind.NONE,
    "three_phase_sag": FaultKind.THREE_PHASE_SAG,
    "two_phase_short_to_ground": FaultKind.TWO_PHASE_SHORT_TO_GROUND,
    "three_phase_shift": FaultKind.THREE_PHASE_SHIFT,
}
PRESET_DIR = Path(__file__).with_name("presets")
PRESETS = {
    "sag": PRESET_DIR / "sag.toml",
    "short": PRESET_DIR / "short.toml",
    "shift": PRESET_DIR / "shift.toml",
}


class ParseError(ValueError):
    """The document is not valid TOML or contains unknown/mistyped keys."""


class ValidationError(ValueError):
    """The document parsed but describes an inconsistent scenario."""


@dataclass(frozen=True)
class OutputConfig:
    decimation: int = 1000
    directory: str = "out"
    prefix: str = "run"


@dataclass(frozen=True)
class ScenarioConfig:
    plant: PlantParams = field(default_factory=PlantParams)
    droop: DroopParams = field(default_factory=DroopParams)
    gains: GainSet = field(default_factory=GainSet)
    saturation_strategy: str = "vflux"
    i_max_sat: float = 110.0
    # per-axis limits of the per-component limiter; None splits i_max_sat evenly
    i_d_max: float | None = None
    i_q_max: float | None = None
    fault: FaultDescriptor = field(default_factory=FaultDescriptor)
    t_end: float = 3.0
    dt_plant: float = 1e-6
    dt_ctrl: float = 1e-6
    omega_f: float = 2.0 * math.pi
    omega_phi: float = 2.0 * math.pi
    # sample rate of the angle-smoothness statistic
    f_s: float = 10e3
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def strategy(self) -> Strategy:
        return STRATEGY_NAMES[self.saturation_strategy]

    @property
    def n_sub(self) -> int:
        return int(round(self.dt_ctrl / self.dt_plant))

    @property
    def fault_kind_name(self) -> str:
        return {v: k for k, v in FAULT_NAMES.items()}[FaultKind(self.fault.kind)]

    def with_strategy(self, name: str) -> "ScenarioConfig":
        return replace(self, saturation_strategy=name)


_TOP_FLOATS = ("i_max_sat", "t_end", "dt_plant", "dt_ctrl", "omega_f", "omega_phi", "f_s")
_TOP_OPTIONAL = ("i_d_max", "i_q_max")
_SECTIONS = {"plant": PlantParams, "droop": DroopParams, "gains": GainSet}
_FAULT_KEYS = ("kind", "start", "duration", "sag_fraction", "shift_angle", "fault_resistance")
_OUTPUT_KEYS = {"decimation": int, "directory": str, "prefix": str}


def _number(where: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{where}: expected a number, got {type(value).__name__} {value!r}")
    return float(value)


def _section(name: str, table: Any, cls):
    if not isinstance(table, dict):
        raise ParseError(f"{name}: expected a table")
    unknown = sorted(set(table) - set(cls._fields))
    if unknown:
        raise ParseError(f"{name}: unknown key(s) {', '.join(unknown)}; allowed: {', '.join(cls._fields)}")
    return cls(**{k: _number(f"{name}.{k}", v) for k, v in table.items()})


def _fault(table: Any) -> FaultDescriptor:
    if not isinstance(table, dict):
        raise ParseError("fault: expected a table")
    unknown = sorted(set(table) - set(_FAULT_KEYS))
    if unknown:
        raise ParseError(f"fault: unknown key(s) {', '.join(unknown)}; allowed: {', '.join(_FAULT_KEYS)}")
    values: dict[str, Any] = {}
    for k, v in table.items():
        if k == "kind":
            if not isinstance(v, str) or v not in FAULT_NAMES:
                raise ParseError(f"fault.kind: expected one of {', '.join(FAULT_NAMES)}, got {v!r}")
            values[k] = int(FAULT_NAMES[v])
        else:
            values[k] = _number(f"fault.{k}", v)
    return FaultDescriptor(**values)


def _output(table: Any) -> OutputConfig:
    if not isinstance(table, dict):
        raise ParseError("output: expected a table")
    values = {}
    for k, v in table.items():
        if k not in _OUTPUT_KEYS:
            raise ParseError(f"output: unknown key {k}; allowed: {', '.join(_OUTPUT_KEYS)}")
        typ = _OUTPUT_KEYS[k]
        if isinstance(v, bool) or not isinstance(v, typ):
            raise ParseError(f"output.{k}: expected {typ.__name__}, got {v!r}")
        values[k] = v
    return OutputConfig(**values)


def config_from_dict(doc: dict) -> ScenarioConfig:
    kwargs: dict[str, Any] = {}
    for key, value in doc.items():
        if key in _SECTIONS:
            kwargs[key] = _section(key, value, _SECTIONS[key])
        elif key == "fault":
            kwargs[key] = _fault(value)
        elif key == "output":
            kwargs[key] = _output(value)
        elif key == "saturation_strategy":
            if not isinstance(value, str) or value not in STRATEGY_NAMES:
                raise ParseError(f"saturation_strategy: expected one of {', '.join(STRATEGY_NAMES)}, got {value!r}")
            kwargs[key] = value
        elif key in _TOP_FLOATS or key in _TOP_OPTIONAL:
            kwargs[key] = _number(key, value)
        else:
            raise ParseError(f"unknown key {key!r}")
    cfg = ScenarioConfig(**kwargs)
    validate_config(cfg)
    return cfg


def parse_config(text: str) -> ScenarioConfig:
    """Parse a TOML scenario document."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"invalid TOML: {exc}") from exc
    return config_from_dict(doc)


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        return parse_config(text)
    except ValueError as exc:
        raise type(exc)(f"{path}: {exc}") from exc


def load_preset(name: str) -> ScenarioConfig:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return load_config(PRESETS[name])


def validate_config(cfg: ScenarioConfig) -> None:
    try:
        validate_plant_params(cfg.plant)
        validate_fault(cfg.fault)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    for name in ("dt_plant", "dt_ctrl", "t_end", "i_max_sat", "omega_f", "f_s"):
        v = getattr(cfg, name)
        if not (math.isfinite(v) and v > 0.0):
            raise ValidationError(f"{name} must be positive, got {v!r}")
    if not cfg.omega_phi >= 0.0:
        raise ValidationError(f"omega_phi must be >= 0, got {cfg.omega_phi!r}")
    ratio = cfg.dt_ctrl / cfg.dt_plant
    if ratio < 1.0 - 1e-9 or abs(ratio - round(ratio)) > 1e-6:
        raise ValidationError(
            f"dt_ctrl = {cfg.dt_ctrl:g} s is not an integer multiple of dt_plant = {cfg.dt_plant:g} s")
    if cfg.fault.kind != FaultKind.NONE and not cfg.t_end > cfg.fault.start + cfg.fault.duration:
        raise ValidationError(
            f"t_end = {cfg.t_end:g} s must exceed fault end {cfg.fault.start + cfg.fault.duration:g} s")
    if cfg.output.decimation < 1:
        raise ValidationError(f"output.decimation must be >= 1, got {cfg.output.decimation}")
    for name in ("i_d_max", "i_q_max"):
        v = getattr(cfg, name)
        if v is not None and not v > 0.0:
            raise ValidationError(f"{name} must be positive, got {v!r}")
    d = cfg.droop
    if not (d.omega_ref > 0.0 and d.v_ref > 0.0 and d.omega_pp > 0.0 and d.k_P >= 0.0 and d.k_Q >= 0.0):
        raise ValidationError("droop: omega_ref, v_ref, omega_pp must be positive and k_P, k_Q non-negative")


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """Plain nested dict (TOML/JSON-compatible) describing ``cfg``."""
    out: dict[str, Any] = {
        "saturation_strategy": cfg.saturation_strategy,
        "i_max_sat": cfg.i_max_sat,
        "t_end": cfg.t_end,
        "dt_plant": cfg.dt_plant,
        "dt_ctrl": cfg.dt_ctrl,
        "omega_f": cfg.omega_f,
        "omega_phi": cfg.omega_phi,
        "f_s": cfg.f_s,
    }
    if cfg.i_d_max is not None:
        out["i_d_max"] = cfg.i_d_max
    if cfg.i_q_max is not None:
        out["i_q_max"] = cfg.i_q_max
    out["plant"] = cfg.plant._asdict()
    out["droop"] = cfg.droop._asdict()
    out["gains"] = cfg.gains._asdict()
    fault = cfg.fault._asdict()
    fault["kind"] = cfg.fault_kind_name
    out["fault"] = fault
    out["output"] = {"decimation": cfg.output.decimation, "directory": cfg.output.directory,
                     "prefix": cfg.output.prefix}
    return out


def set_parameter(cfg: ScenarioConfig, key: str, value: float) -> ScenarioConfig:
    """Return a copy with the dotted numeric ``key`` (e.g. ``fault.duration``) set."""
    doc = config_to_dict(cfg)
    parts = key.split(".")
    node = doc
    for p in parts[:-1]:
        if p not in node or not isinstance(node[p], dict):
            raise ParseError(f"unknown parameter {key!r}")
        node = node[p]
    leaf = parts[-1]
    known = leaf in node or (len(parts) == 1 and leaf in _TOP_OPTIONAL)
    if not known or isinstance(node.get(leaf), (str, dict)):
        raise ParseError(f"unknown or non-numeric parameter {key!r}")
    node[leaf] = value
    if key == "fault.start" or key == "fault.duration":
        # keep the post-fault observation window when the fault moves
        window = cfg.t_end - (cfg.fault.start + cfg.fault.duration)
        doc["t_end"] = doc["fault"]["start"] + doc["fault"]["duration"] + window
    return config_from_dict(doc)


__all__ = [
    "FAULT_NAMES",
    "PRESETS",
    "STRATEGY_NAMES",
    "OutputConfig",
    "ParseError",
    "ScenarioConfig",
    "ValidationError",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "load_preset",
    "parse_config",
    "set_parameter",
    "validate_config",
]
