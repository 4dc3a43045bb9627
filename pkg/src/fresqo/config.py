"""Scenario configuration: JSON documents validated against a versioned schema.

All rates and frequencies are in units of the cavity decay rate (kappa = 1) and
filter frequencies are measured from the laser frequency.
"""
from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from typing import Any

import jsonschema
import numpy as np

from .errors import ConfigError
from .models import (DEFAULT_CAVITY_DIM, DEFAULT_PHONON_DIM, ModelVariant, SystemParams, Variant,
                     kerr_shift, make_model)
from .sensors import normalize_target

__all__ = [
    "SCHEMA_VERSION", "SCHEMA", "TASKS", "SWEEP_AXES", "ModelConfig", "AxisSpec", "SweepPoint",
    "SweepConfig", "ConvergenceConfig", "OutputConfig", "ScenarioConfig", "parse_config",
    "load_config", "config_hash", "build_model", "parse_target",
]

SCHEMA_VERSION = 1
TASKS = ("spectrum", "tps", "tau", "csi", "sweep")
SWEEP_AXES = ("g0", "gamma_filter", "n_th", "omega_drive")
TARGETS = ("a", "da", "δa", "b", "a,b", "a,da")

_axis = {
    "oneOf": [
        {"type": "object", "required": ["start", "stop", "num"], "additionalProperties": False,
         "properties": {"start": {"type": "number"}, "stop": {"type": "number"},
                        "num": {"type": "integer", "minimum": 1}}},
        {"type": "array", "items": {"type": "number"}, "minItems": 1},
    ]
}
_number_or_first = {"oneOf": [{"type": "number"}, {"enum": ["first_excited"]}]}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "task", "model", "filter"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "task": {"enum": list(TASKS)},
        "model": {
            "type": "object",
            "required": ["variant", "g0", "omega_b", "omega_drive"],
            "additionalProperties": False,
            "properties": {
                "variant": {"enum": [v.value for v in Variant]},
                "g0": {"type": "number", "minimum": 0},
                "omega_b": {"type": "number", "exclusiveMinimum": 0},
                "delta_a": _number_or_first,
                "omega_drive": {"type": "number", "minimum": 0},
                "kappa": {"type": "number", "exclusiveMinimum": 0},
                "gamma": {"type": "number", "exclusiveMinimum": 0},
                "n_th": {"type": "number", "minimum": 0},
                "cavity_dim": {"type": "integer", "minimum": 2},
                "phonon_dim": {"type": "integer", "minimum": 2},
                "orders": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "alpha2_shift": {"type": "boolean"},
                "cubic": {"type": "boolean"},
            },
        },
        "filter": {
            "type": "object", "required": ["gamma"], "additionalProperties": False,
            "properties": {"gamma": {"type": "number", "exclusiveMinimum": 0}},
        },
        "targets": {"type": "array", "items": {"enum": list(TARGETS)}, "minItems": 1},
        "sensor": {
            "type": "object", "additionalProperties": False,
            "properties": {"epsilon": {"type": "number", "exclusiveMinimum": 0}},
        },
        "method": {"enum": ["explicit", "conditional"]},
        "autocorr_method": {"enum": ["auto", "cross"]},
        "grid": {
            "type": "object", "required": ["omega1"], "additionalProperties": False,
            "properties": {"omega1": _axis, "omega2": _axis},
        },
        "spectrum": {
            "type": "object", "required": ["omega"], "additionalProperties": False,
            "properties": {"omega": _axis},
        },
        "tau": {
            "type": "object", "required": ["omega1", "omega2", "tau"], "additionalProperties": False,
            "properties": {"omega1": {"type": "number"}, "omega2": {"type": "number"}, "tau": _axis},
        },
        "sweep": {
            "type": "object", "required": ["axis", "values"], "additionalProperties": False,
            "properties": {
                "axis": {"enum": list(SWEEP_AXES)},
                "values": _axis,
                "series": {"type": "array", "minItems": 1, "items": {
                    "type": "object", "additionalProperties": False,
                    "properties": {"label": {"type": "string"}, "n_th": {"type": "number", "minimum": 0},
                                   "g0": {"type": "number", "minimum": 0},
                                   "gamma_filter": {"type": "number", "exclusiveMinimum": 0},
                                   "omega_drive": {"type": "number", "minimum": 0}}}},
                "points": {"type": "array", "items": {
                    "type": "object", "required": ["label", "omega1", "omega2"], "additionalProperties": False,
                    "properties": {"label": {"type": "string", "pattern": "^[A-Za-z0-9_.+-]+$"},
                                   "omega1": {"type": "number"}, "omega2": {"type": "number"}}}},
                "blind": {"type": "boolean"},
            },
        },
        "convergence": {
            "type": "object", "additionalProperties": False,
            "properties": {"enabled": {"type": "boolean"},
                           "samples": {"type": "integer", "minimum": 1},
                           "tol": {"type": "number", "exclusiveMinimum": 0},
                           "cavity_step": {"type": "integer", "minimum": 0},
                           "phonon_step": {"type": "integer", "minimum": 0}},
        },
        "output": {
            "type": "object", "additionalProperties": False,
            "properties": {"dir": {"type": "string"}, "png": {"type": "boolean"},
                           "scale": {"enum": ["log", "linear"]}},
        },
        "threads": {"type": ["integer", "null"], "minimum": 1},
    },
}

_TASK_SECTION = {"tps": "grid", "csi": "grid", "spectrum": "spectrum", "tau": "tau", "sweep": "sweep"}


@dataclass(frozen=True)
class AxisSpec:
    values: tuple[float, ...]

    @classmethod
    def parse(cls, raw) -> "AxisSpec":
        if isinstance(raw, dict):
            return cls(tuple(float(x) for x in np.linspace(raw["start"], raw["stop"], raw["num"])))
        return cls(tuple(float(x) for x in raw))

    def array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)


@dataclass(frozen=True)
class ModelConfig:
    variant: str
    g0: float
    omega_b: float
    omega_drive: float
    delta_a: float | str = "first_excited"
    kappa: float = 1.0
    gamma: float = 0.1
    n_th: float = 0.0
    cavity_dim: int = DEFAULT_CAVITY_DIM
    phonon_dim: int = DEFAULT_PHONON_DIM
    orders: tuple[int, ...] = ()
    alpha2_shift: bool = True
    cubic: bool = False

    def params(self) -> SystemParams:
        p = SystemParams(delta_a=0.0, omega_b=self.omega_b, g0=self.g0, omega_drive=self.omega_drive,
                         kappa=self.kappa, gamma=self.gamma, n_th=self.n_th)
        delta = kerr_shift(p) if self.delta_a == "first_excited" else float(self.delta_a)
        return p.with_(delta_a=delta)


@dataclass(frozen=True)
class SweepPoint:
    label: str
    omega1: float
    omega2: float


@dataclass(frozen=True)
class SweepConfig:
    axis: str
    values: AxisSpec
    series: tuple[dict, ...] = ({},)
    points: tuple[SweepPoint, ...] = ()
    blind: bool = True


@dataclass(frozen=True)
class ConvergenceConfig:
    enabled: bool = True
    samples: int = 9
    tol: float = 5e-3
    cavity_step: int = 1
    phonon_step: int = 2


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    png: bool = True
    scale: str = "log"


@dataclass(frozen=True)
class ScenarioConfig:
    task: str
    model: ModelConfig
    gamma_filter: float
    name: str = "scenario"
    targets: tuple[str, ...] = ("a",)
    epsilon: float = 1e-3
    method: str = "conditional"
    autocorr_method: str = "auto"
    omega1: AxisSpec | None = None
    omega2: AxisSpec | None = None
    spectrum_omega: AxisSpec | None = None
    tau_omega1: float | None = None
    tau_omega2: float | None = None
    tau: AxisSpec | None = None
    sweep: SweepConfig | None = None
    convergence: ConvergenceConfig = field(default_factory=ConvergenceConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    threads: int | None = None
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def thread_count(self) -> int:
        return self.threads or os.cpu_count() or 1


def parse_target(tag: str) -> tuple[str, str]:
    """'a' -> ('a', 'a'); 'a,b' -> ('a', 'b')."""
    parts = [p.strip() for p in tag.split(",")]
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) != 2:
        raise ConfigError(f"malformed target {tag!r}", "targets")
    try:
        return normalize_target(parts[0]), normalize_target(parts[1])
    except ValueError as exc:
        raise ConfigError(str(exc), "targets") from exc


def target_label(pair: tuple[str, str]) -> str:
    return pair[0] if pair[0] == pair[1] else f"{pair[0]},{pair[1]}"


def _path(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "required":
        missing = err.message.split("'")[1] if "'" in err.message else ""
        parts.append(missing)
    return ".".join(parts) or "<root>"


def parse_config(raw: dict) -> ScenarioConfig:
    """Validate a raw JSON document and build the typed configuration."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: (len(list(e.absolute_path)), e.message))
    if errors:
        best = jsonschema.exceptions.best_match(errors)
        raise ConfigError(best.message, _path(best))
    task = raw["task"]
    section = _TASK_SECTION[task]
    if section not in raw:
        raise ConfigError(f"task {task!r} requires this section", section)
    m = dict(raw["model"])
    m["orders"] = tuple(m.get("orders", ()))
    model = ModelConfig(**m)
    variant = Variant(model.variant)
    if variant is Variant.POLARON_DRIVE and not model.orders:
        raise ConfigError("POLARON_DRIVE needs at least one expansion order", "model.orders")
    targets = tuple(raw.get("targets", ["a"]))
    for t in targets:
        pair = parse_target(t)
        if variant.single_mode and "b" in pair:
            raise ConfigError(f"target {t!r} needs a phonon mode", "targets")
    kw: dict[str, Any] = {}
    if section == "grid":
        kw["omega1"] = AxisSpec.parse(raw["grid"]["omega1"])
        kw["omega2"] = AxisSpec.parse(raw["grid"].get("omega2", raw["grid"]["omega1"]))
    elif section == "spectrum":
        kw["spectrum_omega"] = AxisSpec.parse(raw["spectrum"]["omega"])
    elif section == "tau":
        kw["tau_omega1"] = float(raw["tau"]["omega1"])
        kw["tau_omega2"] = float(raw["tau"]["omega2"])
        kw["tau"] = AxisSpec.parse(raw["tau"]["tau"])
    else:
        s = raw["sweep"]
        points = tuple(SweepPoint(**p) for p in s.get("points", []))
        blind = s.get("blind", True)
        if not points and not blind:
            raise ConfigError("sweep requests no correlations", "sweep.points")
        kw["sweep"] = SweepConfig(s["axis"], AxisSpec.parse(s["values"]),
                                  tuple(dict(x) for x in s.get("series", [{}])), points, blind)
    return ScenarioConfig(
        task=task, model=model, gamma_filter=float(raw["filter"]["gamma"]),
        name=raw.get("name", "scenario"), targets=targets,
        epsilon=float(raw.get("sensor", {}).get("epsilon", 1e-3)),
        method=raw.get("method", "conditional"), autocorr_method=raw.get("autocorr_method", "auto"),
        convergence=ConvergenceConfig(**raw.get("convergence", {})),
        output=OutputConfig(**raw.get("output", {})), threads=raw.get("threads"),
        raw=copy.deepcopy(raw), **kw)


def load_config(path: str | None = None, preset: str | None = None, overrides: dict | None = None) -> ScenarioConfig:
    """Load a JSON file, a named preset, or a preset overlaid with a file's fields."""
    from .presets import preset_config

    raw: dict = {}
    if preset is not None:
        raw = preset_config(preset)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}", "--config") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}", "--config") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object", "<root>")
        raw = _merge(raw, doc)
    if overrides:
        raw = _merge(raw, overrides)
    if not raw:
        raise ConfigError("no configuration given", "--config")
    return parse_config(raw)


def _merge(base: dict, top: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in top.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def config_hash(cfg: ScenarioConfig) -> str:
    """sha256 of the canonical config, excluding thread count and output location."""
    raw = copy.deepcopy(cfg.raw)
    raw.pop("threads", None)
    raw.get("output", {}).pop("dir", None)
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def build_model(model: ModelConfig, **changes):
    """ModelSpec for a model config; ``changes`` override fields (e.g. for sweeps)."""
    from dataclasses import replace

    from .sensors import mean_field

    mc = replace(model, **changes) if changes else model
    params = mc.params()
    variant = Variant(mc.variant)
    if variant.fluctuation:
        driven = make_model(Variant.KERR_DRIVEN, params, mc.cavity_dim)
        # alpha is taken real: the phase is absorbed into the fluctuation operator
        alpha = abs(mean_field(driven))
        mv = ModelVariant(variant, alpha=alpha, alpha2_shift=mc.alpha2_shift, cubic=mc.cubic)
    elif variant is Variant.POLARON_DRIVE:
        mv = ModelVariant(variant, orders=mc.orders)
    else:
        mv = ModelVariant(variant)
    return make_model(mv, params, mc.cavity_dim, mc.phonon_dim)


def describe(cfg: ScenarioConfig) -> dict:
    d = asdict(cfg.model)
    d["delta_a_value"] = cfg.model.params().delta_a
    return d
