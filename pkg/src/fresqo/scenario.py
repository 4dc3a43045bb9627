"""Scenario execution: task dispatch, truncation checks and file output."""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import platform
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__
from .config import (ScenarioConfig, build_model, config_hash, parse_target, target_label)
from .correlators import g2_blind_zero, spectrum_resolvent
from .csi import csi_map
from .errors import ConfigError
from .models import Variant
from .sensors import (SensorConfig, SensorEngine, FilterSpec, spectrum_sensor, target_operator,
                      tps_map, tps_tau)

__all__ = ["ResultBundle", "run_scenario", "sweep", "check_convergence", "format_float", "TAU_CONVENTION"]

log = logging.getLogger(__name__)

TAU_CONVENTION = "tau > 0: the omega2 photon is detected after the omega1 photon"


def format_float(x: float) -> str:
    return "%.17g" % float(x)


@dataclass
class Table:
    header: list[str]
    rows: list[list]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
        return buf.getvalue()


@dataclass
class ResultBundle:
    tables: dict[str, Table]
    metadata: dict
    arrays: dict = field(default_factory=dict)
    files: list[str] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        conv = self.metadata.get("convergence", {})
        return conv.get("ok", True) is not False


# ---------------------------------------------------------------- helpers

def _pairs(cfg: ScenarioConfig):
    return [parse_target(t) for t in cfg.targets]


def _require_single(cfg: ScenarioConfig, task: str):
    for pair in _pairs(cfg):
        if pair[0] != pair[1]:
            raise ConfigError(f"{task} needs single-operator targets, got {target_label(pair)}", "targets")


def _fname(cfg: ScenarioConfig, suffix: str) -> str:
    return f"{cfg.name}_{suffix}".replace(",", "-")


def _sample_indices(n: int, k: int) -> list[int]:
    if n <= k:
        return list(range(n))
    return sorted({int(round(x)) for x in np.linspace(0, n - 1, k)})


def _enlarged(cfg: ScenarioConfig) -> dict:
    changes = {"cavity_dim": cfg.model.cavity_dim + cfg.convergence.cavity_step}
    if not Variant(cfg.model.variant).single_mode:
        changes["phonon_dim"] = cfg.model.phonon_dim + cfg.convergence.phonon_step
    return changes


def _rel_change(a: np.ndarray, b: np.ndarray, floor: float) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.size == 0:
        return 0.0
    den = np.maximum(np.abs(b), floor)
    return float(np.max(np.abs(a - b) / den))


# ---------------------------------------------------------------- tasks

def _task_tps(cfg, model, threads, bundle):
    w1, w2 = cfg.omega1.array(), cfg.omega2.array()
    engine = SensorEngine(model, cfg.gamma_filter) if cfg.method == "conditional" else None
    rows = []
    for pair in _pairs(cfg):
        label = target_label(pair)
        log.info("tps map %s: %d x %d points", label, w1.size, w2.size)
        grid = tps_map(model, w1, w2, cfg.gamma_filter, pair, method=cfg.method,
                       cfg=SensorConfig(epsilon=cfg.epsilon, target1=pair[0], target2=pair[1]),
                       threads=threads, engine=engine)
        bundle.arrays[label] = grid.values
        for i, a in enumerate(w1):
            for j, b in enumerate(w2):
                rows.append([float(a), float(b), float(grid.values[i, j]), cfg.method, label])
    bundle.tables["tps"] = Table(["omega1", "omega2", "g2", "method", "target"], rows)


def _task_csi(cfg, model, threads, bundle):
    _require_single(cfg, "csi")
    if cfg.method != "conditional":
        raise ConfigError("csi maps use the conditional method", "method")
    w1, w2 = cfg.omega1.array(), cfg.omega2.array()
    engine = SensorEngine(model, cfg.gamma_filter)
    rows = []
    calls = {}
    for pair in _pairs(cfg):
        if pair[0] == "b":
            raise ConfigError("csi targets are a or da", "targets")
        label = target_label(pair)
        log.info("csi map %s: %d x %d points", label, w1.size, w2.size)
        grid = csi_map(model, w1, w2, cfg.gamma_filter, pair[0], cfg.autocorr_method, threads, engine)
        bundle.arrays[label] = grid.values
        calls[label] = grid.metadata["autocorr_calls"]
        for i, a in enumerate(w1):
            for j, b in enumerate(w2):
                rows.append([float(a), float(b), float(grid.values[i, j]), cfg.method, label])
    bundle.metadata["autocorr_calls"] = calls
    bundle.tables["csi"] = Table(["omega1", "omega2", "R", "method", "target"], rows)


def _task_spectrum(cfg, model, threads, bundle):
    _require_single(cfg, "spectrum")
    ws = cfg.spectrum_omega.array()
    engine = SensorEngine(model, cfg.gamma_filter)
    rows = []
    method = "resolvent" if cfg.method == "conditional" else "explicit"
    for pair in _pairs(cfg):
        label = target_label(pair)
        if method == "resolvent":
            op = engine.op(pair[0])
            vals = spectrum_resolvent(engine.L, engine.rho, op, ws, cfg.gamma_filter, label).values
        else:
            scfg = SensorConfig(epsilon=cfg.epsilon, target1=pair[0], target2=pair[0])
            vals = np.array([spectrum_sensor(model, w, cfg.gamma_filter, scfg).value for w in ws])
        bundle.arrays[label] = vals
        rows += [[float(w), float(v), method, label] for w, v in zip(ws, vals)]
    bundle.tables["spectrum"] = Table(["omega", "S", "method", "target"], rows)


def _task_tau(cfg, model, threads, bundle):
    taus = cfg.tau.array()
    filt = FilterSpec(cfg.tau_omega1, cfg.tau_omega2, cfg.gamma_filter)
    engine = SensorEngine(model, cfg.gamma_filter) if cfg.method == "conditional" else None
    for pair in _pairs(cfg):
        label = target_label(pair)
        log.info("tau trace %s: %d delays", label, taus.size)
        scfg = SensorConfig(epsilon=cfg.epsilon, target1=pair[0], target2=pair[1])
        vals = tps_tau(model, filt, scfg, taus, method=cfg.method, engine=engine)
        bundle.arrays[label] = vals
        bundle.tables[f"tau_{label}"] = Table(["tau", "g2"], [[float(t), float(v)] for t, v in zip(taus, vals)])
    bundle.metadata["tau_convention"] = TAU_CONVENTION


def _sweep_setting(cfg, value, series):
    """Model-field changes and filter width for one sweep value and series."""
    settings = {k: v for k, v in series.items() if k != "label"}
    settings[cfg.sweep.axis] = value
    gamma = float(settings.pop("gamma_filter", cfg.gamma_filter))
    return settings, gamma


def _sweep_row(cfg, value, model_changes=None, cache=None):
    """All correlation columns of one sweep row."""
    out = []
    for series in cfg.sweep.series:
        changes, gamma = _sweep_setting(cfg, value, series)
        if model_changes:
            changes.update(model_changes)
        key = tuple(sorted(changes.items()))
        model, engine0 = cache.get(key) if cache is not None and key in cache else (None, None)
        if model is None:
            model = build_model(cfg.model, **changes)
            engine0 = SensorEngine(model, gamma)
            if cache is not None:
                while len(cache) >= len(cfg.sweep.series):
                    cache.pop(next(iter(cache)))
                cache[key] = (model, engine0)
        engine = engine0 if engine0.gamma == gamma else SensorEngine(model, gamma, L=engine0.L, rho=engine0.rho)
        for pair in _pairs(cfg):
            if cfg.sweep.blind:
                if pair[0] == pair[1]:
                    out.append(g2_blind_zero(engine.rho, target_operator(model, pair[0], engine.alpha)))
                else:
                    out.append(float("nan"))
            for pt in cfg.sweep.points:
                out.append(engine.g2(pt.omega1, pt.omega2, pair[0], pair[1]))
    return out


def _sweep_columns(cfg):
    cols = []
    for k, series in enumerate(cfg.sweep.series):
        s = series.get("label", f"s{k}")
        for pair in _pairs(cfg):
            t = target_label(pair)
            if cfg.sweep.blind:
                cols.append(f"{s}:{t}:blind")
            cols += [f"{s}:{t}:{pt.label}" for pt in cfg.sweep.points]
    return cols


def sweep(cfg: ScenarioConfig, threads: int | None = None, write: bool = True,
          out_dir: str | None = None) -> ResultBundle:
    if cfg.task != "sweep":
        raise ConfigError("sweep needs a sweep configuration", "task")
    return run_scenario(cfg, threads=threads, write=write, out_dir=out_dir)


def _task_sweep(cfg, model, threads, bundle):
    values = cfg.sweep.values.array()
    cache = {}
    data = np.array([_sweep_row(cfg, float(v), cache=cache) for v in values], dtype=float)
    bundle.arrays["sweep"] = data
    bundle.arrays["values"] = values
    cols = _sweep_columns(cfg)
    bundle.metadata["sweep_columns"] = cols


# ---------------------------------------------------------------- convergence

def _samples(cfg: ScenarioConfig, model_changes: dict | None, bundle: ResultBundle | None):
    """Values at the sample points of the task, at the configured or changed truncation."""
    k = cfg.convergence.samples
    model = build_model(cfg.model, **(model_changes or {}))
    task = cfg.task
    if task in ("tps", "csi"):
        side = max(1, int(round(np.sqrt(k))))
        w1, w2 = cfg.omega1.array(), cfg.omega2.array()
        i1, i2 = _sample_indices(w1.size, side), _sample_indices(w2.size, side)
        engine = SensorEngine(model, cfg.gamma_filter)
        vals = []
        for pair in _pairs(cfg):
            for i in i1:
                for j in i2:
                    g = engine.g2(w1[i], w2[j], pair[0], pair[1])
                    if task == "csi":
                        g = g * g / (engine.autocorr(w1[i], pair[0]) * engine.autocorr(w2[j], pair[0]))
                    vals.append(g)
        return np.array(vals), 1e-9
    if task == "spectrum":
        ws = cfg.spectrum_omega.array()
        idx = _sample_indices(ws.size, k)
        engine = SensorEngine(model, cfg.gamma_filter)
        vals = []
        for pair in _pairs(cfg):
            vals += list(spectrum_resolvent(engine.L, engine.rho, engine.op(pair[0]), ws[idx],
                                            cfg.gamma_filter).values)
        vals = np.array(vals)
        return vals, 1e-3 * float(np.abs(vals).max() if vals.size else 1.0)
    if task == "tau":
        taus = cfg.tau.array()
        idx = _sample_indices(taus.size, k)
        engine = SensorEngine(model, cfg.gamma_filter)
        vals = []
        for pair in _pairs(cfg):
            vals += list(engine.g2_tau(cfg.tau_omega1, cfg.tau_omega2, taus[idx], pair[0], pair[1]))
        return np.array(vals), 1e-9
    values = cfg.sweep.values.array()
    idx = _sample_indices(values.size, min(k, 3))
    rows = [_sweep_row(cfg, float(values[i]), model_changes) for i in idx]
    return np.array(rows, dtype=float), 1e-9


def check_convergence(cfg: ScenarioConfig) -> dict:
    """Compare sample values against a run with enlarged truncations."""
    base, floor = _samples(cfg, None, None)
    big, floor_big = _samples(cfg, _enlarged(cfg), None)
    finite = np.isfinite(base) & np.isfinite(big)
    change = _rel_change(base[finite], big[finite], max(floor, floor_big))
    dims = _enlarged(cfg)
    return {"checked": True, "ok": bool(change < cfg.convergence.tol), "max_rel_change": change,
            "tol": cfg.convergence.tol, "samples": int(base.size),
            "enlarged_truncation": [dims.get("cavity_dim"), dims.get("phonon_dim")]}


# ---------------------------------------------------------------- runner

_TASKS = {"tps": _task_tps, "csi": _task_csi, "spectrum": _task_spectrum, "tau": _task_tau,
          "sweep": _task_sweep}


def run_scenario(cfg: ScenarioConfig, threads: int | None = None, write: bool = True,
                 out_dir: str | None = None) -> ResultBundle:
    """Execute the configured task; outputs are independent of the thread count."""
    t0 = time.perf_counter()
    threads = threads or cfg.thread_count
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model = build_model(cfg.model)
        if not Variant(cfg.model.variant).single_mode:
            model.params.check_sideband_resolved()
    meta = {
        "name": cfg.name, "task": cfg.task, "config_hash": config_hash(cfg), "config": cfg.raw,
        "method": cfg.method, "targets": [target_label(p) for p in _pairs(cfg)],
        "truncation": list(model.truncation), "delta_a": model.params.delta_a,
        "gamma_filter": cfg.gamma_filter, "epsilon": cfg.epsilon if cfg.method == "explicit" else None,
        "frequencies": "rotating frame, measured from the laser, units of kappa",
        "warnings": [str(w.message) for w in caught],
        "versions": {"fresqo": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
    }
    bundle = ResultBundle({}, meta)
    _TASKS[cfg.task](cfg, model, threads, bundle)
    conv = check_convergence(cfg) if cfg.convergence.enabled else {"checked": False}
    if cfg.task == "sweep":
        _finish_sweep(cfg, bundle, conv)
    meta["convergence"] = conv
    if conv.get("checked") and not conv["ok"]:
        log.warning("truncation not converged: max relative change %.3g", conv["max_rel_change"])
    meta["wall_time_s"] = time.perf_counter() - t0
    if write:
        _write(cfg, bundle, out_dir or cfg.output.dir)
    return bundle


def _finish_sweep(cfg, bundle, conv):
    cols = bundle.metadata["sweep_columns"]
    values = bundle.arrays["values"]
    data = bundle.arrays["sweep"]
    flag = "unchecked" if not conv.get("checked") else ("ok" if conv["ok"] else "fail")
    rows = [[float(v)] + [float(x) for x in r] + [flag] for v, r in zip(values, data)]
    bundle.tables["sweep"] = Table([cfg.sweep.axis] + cols + ["convergence"], rows)


def _write(cfg: ScenarioConfig, bundle: ResultBundle, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for key, table in bundle.tables.items():
        path = os.path.join(out_dir, _fname(cfg, key) + ".csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(table.to_csv())
        bundle.files.append(path)
    if cfg.output.png and cfg.task in ("tps", "csi"):
        from .plotting import render_heatmap

        csv_path = bundle.files[0]
        for label in bundle.arrays:
            png = os.path.join(out_dir, _fname(cfg, f"{cfg.task}_{label}") + ".png")
            render_heatmap(csv_path, png, cfg.output.scale, target=label)
            bundle.files.append(png)
    meta_path = os.path.join(out_dir, _fname(cfg, "meta") + ".json")
    bundle.metadata["files"] = [os.path.basename(f) for f in bundle.files]
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(bundle.metadata, fh, indent=2, sort_keys=True, default=_json_default)
    bundle.files.append(meta_path)


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)
