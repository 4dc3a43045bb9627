"""Cauchy-Schwarz ratios R = g12^2 / (g11 g22) of frequency-filtered correlations."""
from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import UndefinedCSIError
from .models import ModelSpec
from .sensors import CorrelationGrid, SensorEngine, normalize_target, tps_map

__all__ = ["CsiGrid", "AutocorrCache", "csi_value", "csi_map"]


def csi_value(g12: float, g11: float, g22: float) -> float:
    """g12^2 / (g11 g22); values above one witness non-classical correlations."""
    den = g11 * g22
    if not (g11 > 0 and g22 > 0) or not np.isfinite(den):
        raise UndefinedCSIError(f"autocorrelations must be positive, got {g11!r}, {g22!r}")
    return g12 * g12 / den


class AutocorrCache:
    """Thread-safe autocorrelation cache evaluating each frequency at most once.

    ``method="auto"`` uses the single-sensor recursion (five solves per
    frequency); ``"cross"`` correlates two identical sensors (nine solves), which
    gives the same number and serves as a validation path.
    """

    def __init__(self, engine: SensorEngine, target: str = "a", method: str = "auto"):
        if method not in ("auto", "cross"):
            raise ValueError(f"unknown autocorrelation method {method!r}")
        self.engine = engine
        self.target = normalize_target(target)
        self.method = method
        self.calls = 0
        self._values = {}
        self._locks = {}
        self._guard = threading.Lock()

    def _lock_for(self, omega):
        with self._guard:
            return self._locks.setdefault(omega, threading.Lock())

    def get(self, omega: float) -> float:
        omega = float(omega)
        if omega in self._values:
            return self._values[omega]
        with self._lock_for(omega):
            if omega not in self._values:
                if self.method == "auto":
                    v = self.engine.autocorr(omega, self.target)
                else:
                    v = self.engine.cross(omega, self.target, omega, self.target)
                with self._guard:
                    self.calls += 1
                self._values[omega] = v
        return self._values[omega]

    def prefetch(self, omegas, threads: int = 1) -> None:
        """Evaluate all missing frequencies in one batched pass."""
        with self._guard:
            todo = sorted({float(w) for w in omegas} - self._values.keys())
        if not todo:
            return
        if self.method == "auto":
            vals = self.engine.g2_batch([(w, w) for w in todo], self.target, threads=threads)
        else:
            vals = [self.engine.cross(w, self.target, w, self.target) for w in todo]
        with self._guard:
            for w, v in zip(todo, vals):
                if w not in self._values:
                    self._values[w] = float(v)
                    self.calls += 1


@dataclass
class CsiGrid:
    omega1_grid: np.ndarray
    omega2_grid: np.ndarray
    values: np.ndarray
    target: str
    cross: CorrelationGrid | None = None
    metadata: dict = field(default_factory=dict)


def csi_map(model: ModelSpec, omega1_grid, omega2_grid, gamma_filter: float, target: str = "a",
            auto_method: str = "auto", threads: int = 1, engine: SensorEngine | None = None,
            cache: AutocorrCache | None = None) -> CsiGrid:
    target = normalize_target(target)
    w1 = np.asarray(omega1_grid, dtype=float)
    w2 = np.asarray(omega2_grid, dtype=float)
    if w1.size == 0 or w2.size == 0:
        raise ValueError("frequency grids must be nonempty")
    engine = engine or SensorEngine(model, gamma_filter)
    cache = cache or AutocorrCache(engine, target, auto_method)
    cache.prefetch(np.concatenate([w1, w2]), threads)
    cross = tps_map(model, w1, w2, gamma_filter, (target, target), threads=threads, engine=engine,
                    autocorr=cache.get)
    g11 = np.array([cache.get(w) for w in w1])
    g22 = np.array([cache.get(w) for w in w2])
    if np.any(g11 <= 0) or np.any(g22 <= 0):
        raise UndefinedCSIError("nonpositive autocorrelation on the grid")
    values = cross.values ** 2 / np.outer(g11, g22)
    meta = dict(cross.metadata, autocorr_method=auto_method, autocorr_calls=cache.calls)
    return CsiGrid(w1, w2, values, target, cross, meta)
