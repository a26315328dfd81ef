"""Scenario configuration: JSON in, fully resolved dataclasses out."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

from ..errors import InvalidParameter
from ..oculomotor import TaskConfig
from ..popcode import TuningGrid

SCENARIOS = ("encode-demo", "transform-demo", "kalman-demo", "eye-control", "ablation")
U64_MAX = 2**64 - 1


class ConfigError(Exception):
    """Invalid scenario configuration; ``errors`` lists one message per problem,
    each prefixed with the dotted path of the offending field."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class GridConfig:
    lo: float = -4.0
    hi: float = 4.0
    n: int = 50
    tuning_width: float = 0.5
    peak_rate: float = 50.0

    def problems(self) -> list[str]:
        bad = []
        if self.n < 2:
            bad.append("n: must be >= 2")
        if not self.hi > self.lo:
            bad.append("hi: must exceed lo")
        if not self.tuning_width > 0:
            bad.append("tuning_width: must be > 0")
        elif self.n >= 2 and self.hi > self.lo and self.tuning_width < (self.hi - self.lo) / (self.n - 1):
            bad.append("tuning_width: must be at least the grid spacing")
        if self.peak_rate < 0:
            bad.append("peak_rate: must be >= 0")
        return bad

    def build(self) -> TuningGrid:
        return TuningGrid.uniform(self.lo, self.hi, self.n, self.tuning_width, self.peak_rate)


@dataclass(frozen=True)
class EncodeDemoConfig:
    stimulus: float = 0.5
    gain: float = 1.0
    window: float = 0.1

    def problems(self) -> list[str]:
        bad = []
        if not self.window > 0:
            bad.append("window: must be > 0")
        if not self.gain > 0:
            bad.append("gain: must be > 0")
        return bad


@dataclass(frozen=True)
class TransformDemoConfig:
    stimulus_a: float = 1.0
    stimulus_b: float = -1.5
    gain_a: float = 1.0
    gain_b: float = 0.5
    window: float = 0.1
    stochastic: bool = True

    def problems(self) -> list[str]:
        bad = []
        if not self.window > 0:
            bad.append("window: must be > 0")
        for name in ("gain_a", "gain_b"):
            if not getattr(self, name) > 0:
                bad.append(f"{name}: must be > 0")
        return bad


@dataclass(frozen=True)
class KalmanDemoConfig:
    duration: float = 10.0
    a: float = 0.0
    q: float = 0.05
    gain_period: float = 2.0
    gain_max: float = 10.0
    gain_min: float = 1e-3
    initial_gain: float = 1.0

    def problems(self) -> list[str]:
        bad = []
        if not self.duration > 0:
            bad.append("duration: must be > 0")
        if self.q < 0:
            bad.append("q: must be >= 0")
        if not self.gain_period > 0:
            bad.append("gain_period: must be > 0")
        if not self.gain_min > 0:
            bad.append("gain_min: must be > 0")
        if not self.gain_max > self.gain_min:
            bad.append("gain_max: must exceed gain_min")
        if not self.initial_gain > 0:
            bad.append("initial_gain: must be > 0")
        return bad


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "eye-control"
    seed: int = 0
    dt: float = 1e-3
    ablation: bool = False
    grid: GridConfig = field(default_factory=GridConfig)
    task: TaskConfig = field(default_factory=TaskConfig)
    encode_demo: EncodeDemoConfig = field(default_factory=EncodeDemoConfig)
    transform_demo: TransformDemoConfig = field(default_factory=TransformDemoConfig)
    kalman_demo: KalmanDemoConfig = field(default_factory=KalmanDemoConfig)

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


_SECTIONS = {
    "grid": GridConfig,
    "task": TaskConfig,
    "encode_demo": EncodeDemoConfig,
    "transform_demo": TransformDemoConfig,
    "kalman_demo": KalmanDemoConfig,
}


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _coerce(path: str, ftype, value, errors: list[str]):
    """Check a JSON value against a dataclass field annotation."""
    t = ftype if isinstance(ftype, str) else getattr(ftype, "__name__", str(ftype))
    if t == "bool":
        if not isinstance(value, bool):
            errors.append(f"{path}: expected true/false, got {value!r}")
        return value
    if t == "int":
        if not (_is_number(value) and float(value).is_integer()):
            errors.append(f"{path}: expected an integer, got {value!r}")
            return value
        return int(value)
    if t == "float":
        if not _is_number(value) or not math.isfinite(value):
            errors.append(f"{path}: expected a finite number, got {value!r}")
            return value
        return float(value)
    if t == "tuple":
        if not isinstance(value, list) or not all(_is_number(v) for v in value):
            errors.append(f"{path}: expected a list of numbers, got {value!r}")
            return value
        return tuple(float(v) for v in value)
    if t == "str":
        if not isinstance(value, str):
            errors.append(f"{path}: expected a string, got {value!r}")
        return value
    return value


def _section(name: str, cls, raw, errors: list[str]):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        errors.append(f"{name}: expected an object")
        return cls()
    fields = {f.name: f for f in dataclasses.fields(cls)}
    values = {}
    local: list[str] = []
    for key, value in raw.items():
        if key not in fields:
            local.append(f"{name}.{key}: unknown field")
            continue
        values[key] = _coerce(f"{name}.{key}", fields[key].type, value, local)
    errors.extend(local)
    if local:
        return cls()
    try:
        obj = cls(**values)
    except InvalidParameter as exc:
        problems = getattr(exc, "problems", None) or [str(exc)]
        errors.extend(f"{name}.{p}" for p in problems)
        return cls()
    if hasattr(obj, "problems"):
        errors.extend(f"{name}.{p}" for p in obj.problems())
    return obj


def from_dict(raw: dict) -> ScenarioConfig:
    """Resolve a parsed config, applying defaults. Raises ConfigError."""
    errors: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: expected a JSON object"])
    # accept the header sidecar written next to every trace
    if "config" in raw and isinstance(raw["config"], dict):
        raw = raw["config"]
    top = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
    kwargs: dict[str, Any] = {}
    for key, value in raw.items():
        if key not in top:
            errors.append(f"{key}: unknown field")
        elif key in _SECTIONS:
            kwargs[key] = _section(key, _SECTIONS[key], value, errors)
        else:
            kwargs[key] = _coerce(key, top[key].type, value, errors)
    if "scenario" in kwargs and kwargs["scenario"] not in SCENARIOS:
        errors.append(f"scenario: must be one of {', '.join(SCENARIOS)}, got {kwargs['scenario']!r}")
    if "seed" in kwargs and isinstance(kwargs["seed"], int) and not 0 <= kwargs["seed"] <= U64_MAX:
        errors.append("seed: must be an unsigned 64-bit integer")
    if "dt" in kwargs and _is_number(kwargs["dt"]) and not kwargs["dt"] > 0:
        errors.append("dt: must be > 0")
    if errors:
        raise ConfigError(errors)
    cfg = ScenarioConfig(**kwargs)
    if cfg.scenario == "ablation":
        cfg = cfg.replace(ablation=True)
    return cfg


def validate_config(raw_text: Optional[str]) -> ScenarioConfig:
    """Parse JSON text (empty means all defaults). Raises ConfigError."""
    if raw_text is None or not raw_text.strip():
        return ScenarioConfig()
    try:
        raw = json.loads(raw_text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"<root>: invalid JSON: {exc}"]) from None
    return from_dict(raw)
