"""Frequency-resolved correlations from weakly coupled sensor modes.

Two independent routes are provided:

* explicit: sensor modes are added to the Hilbert space and the steady state of
  the enlarged Liouvillian is computed at finite coupling ``epsilon``;
* conditional: the weak-sensor steady state is expanded in powers of epsilon and
  each sensor block ``sigma_{n,m}`` (sensor ket occupations n, bra occupations m)
  is obtained from lower blocks by one shifted solve of the bare Liouvillian,

      (L0 - z) sigma_{n,m} = sum_k i sqrt(n_k) T_k sigma_{n-e_k,m}
                                 - i sqrt(m_k) sigma_{n,m-e_k} T_k^dag,
      z = sum_k i omega_k (n_k - m_k) + Gamma (n_k + m_k) / 2.

The leading-order moments are then traces of single blocks, e.g.
``<s^dag s> = eps^2 Tr sigma_{1,1}`` and ``<s1^dag s2^dag s1 s2> = eps1^2 eps2^2
Tr sigma_{11,11}``, so epsilon cancels exactly in every normalized correlation.
"""
from __future__ import annotations

import math
import threading
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ModelConstructionError, NumericalError, UndefinedCorrelationError
from .fock import embed, mode_operator
from .liouvillian import (
    SHIFT_RESIDUAL, Superoperator, build_liouvillian, propagate, steady_state,
    steady_state_sectors, unvectorize, vectorize,
)
from .models import ModelSpec, SensorMode, collapse_operators, displaced_mode_op, hamiltonian

__all__ = [
    "FilterSpec", "SensorConfig", "CorrelationGrid", "SensorEstimate", "SensorEngine",
    "ExplicitSensors", "attach_sensors", "mean_field", "target_operator", "spectrum_sensor",
    "tps_explicit", "autocorr_explicit", "autocorr_conditional", "tps_conditional", "tps_tau",
    "tps_map", "normalize_target",
]

DEFAULT_EPSILON = 1e-3
LINEARITY_TOL = 5e-3
BACKACTION_TOL = 1e-3
_MIN_POPULATION = 1e-300


def normalize_target(tag: str) -> str:
    tag = {"δa": "da", "delta_a": "da", "fluct": "da"}.get(tag, tag)
    if tag not in ("a", "da", "b"):
        raise ValueError(f"unknown target {tag!r}; expected a, da or b")
    return tag


@dataclass(frozen=True)
class FilterSpec:
    omega1: float
    omega2: float
    gamma_filter: float

    def __post_init__(self):
        if not self.gamma_filter > 0:
            raise ValueError("filter linewidth must be positive")


@dataclass(frozen=True)
class SensorConfig:
    epsilon: float = DEFAULT_EPSILON
    sensor_dim: int = 2
    target1: str = "a"
    target2: str = "a"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("sensor coupling must be positive")
        object.__setattr__(self, "target1", normalize_target(self.target1))
        object.__setattr__(self, "target2", normalize_target(self.target2))


@dataclass
class CorrelationGrid:
    omega1_grid: np.ndarray
    omega2_grid: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SensorEstimate:
    """Explicit-sensor value extrapolated to epsilon -> 0 from epsilon and epsilon/2."""

    value: float
    at_epsilon: float
    at_half_epsilon: float
    epsilon: float
    linear_ok: bool
    backaction: float

    def __float__(self):
        return float(self.value)


# ---------------------------------------------------------------- model helpers

def _bare_liouvillian(model: ModelSpec) -> Superoperator:
    bare = model.bare()
    return build_liouvillian(hamiltonian(bare), collapse_operators(bare))


def mean_field(model: ModelSpec, rho: np.ndarray | None = None) -> complex:
    """<a> in the steady state of the sensor-free model."""
    if rho is None:
        rho = steady_state(_bare_liouvillian(model))
    a = embed(mode_operator("annihilate", model.space.mode_dims[0]), 0, model.space)
    return complex(np.trace(a.matrix @ rho))


def target_operator(model: ModelSpec, tag: str, alpha: complex | None = None):
    tag = normalize_target(tag)
    space = model.space
    if tag == "a":
        return embed(mode_operator("annihilate", space.mode_dims[0]), 0, space)
    if tag == "da":
        if alpha is None:
            alpha = mean_field(model)
        return displaced_mode_op(alpha, space)
    if space.n_modes < 2:
        raise ModelConstructionError("target b requires a phonon mode")
    return embed(mode_operator("annihilate", space.mode_dims[1]), 1, space)


def _attach(model: ModelSpec, sensors: Sequence[tuple[float, str]], gamma: float, epsilon: float,
            dim: int, alpha: complex | None = None) -> ModelSpec:
    bare = model.bare()
    if alpha is None and any(normalize_target(t) == "da" for _, t in sensors):
        alpha = mean_field(bare)
    modes = tuple(SensorMode(float(w), float(gamma), float(epsilon), target_operator(bare, t, alpha),
                             dim, normalize_target(t)) for w, t in sensors)
    return replace(bare, sensors=modes)


def attach_sensors(model: ModelSpec, filters: FilterSpec, cfg: SensorConfig,
                   alpha: complex | None = None) -> ModelSpec:
    """Model with two sensors at ``filters.omega1``/``omega2`` coupled to the configured targets."""
    return _attach(model, [(filters.omega1, cfg.target1), (filters.omega2, cfg.target2)],
                   filters.gamma_filter, cfg.epsilon, cfg.sensor_dim, alpha)


# ---------------------------------------------------------------- explicit sensors

def _sector_layout(model: ModelSpec):
    """Sector label and balancing scale for every Liouville index of a sensor model."""
    dims = model.full_space.mode_dims
    n_sys = model.space.n_modes
    D = model.full_space.dim
    occ = np.array(np.unravel_index(np.arange(D), dims))[n_sys:]  # (n_sensors, D)
    base = np.array([s.dim for s in model.sensors])
    code = np.zeros(D, dtype=np.int64)
    logw = np.zeros(D)
    for k, s in enumerate(model.sensors):
        code = code * base[k] + occ[k]
        # any positive scale is exact; epsilon = 0 decouples the sensor
        logw += occ[k] * math.log(s.epsilon if s.epsilon > 0 else 1.0)
    span = int(np.prod(base))
    # Liouville index j*D + i holds rho[i, j]: ket i, bra j
    labels = (code[None, :] * span + code[:, None]).reshape(-1, order="F")
    scale = np.exp(logw[:, None] + logw[None, :]).reshape(-1, order="F")
    return labels, scale


class ExplicitSensors:
    """Steady state of a model with sensor modes explicitly attached."""

    def __init__(self, model: ModelSpec, sensors: Sequence[tuple[float, str]], gamma: float,
                 epsilon: float, dim: int = 2, alpha: complex | None = None):
        self.model = _attach(model, sensors, gamma, epsilon, dim, alpha)
        self.L = build_liouvillian(hamiltonian(self.model), collapse_operators(self.model))
        self.labels, self.scale = _sector_layout(self.model)
        self.rho = steady_state_sectors(self.L, self.labels, self.scale)
        full = self.model.full_space
        n_sys = self.model.space.n_modes
        self.sensor_ops = [embed(mode_operator("annihilate", s.dim), n_sys + i, full).matrix
                           for i, s in enumerate(self.model.sensors)]

    def expect(self, op) -> complex:
        return complex((op @ self.rho).trace())

    def population(self, k: int) -> float:
        s = self.sensor_ops[k]
        return self.expect(s.conj().T @ s).real

    def cavity_population(self) -> float:
        full = self.model.full_space
        a = embed(mode_operator("annihilate", full.mode_dims[0]), 0, full).matrix
        return self.expect(a.conj().T @ a).real

    def g2_cross(self) -> float:
        s1, s2 = self.sensor_ops[:2]
        num = self.expect(s1.conj().T @ s2.conj().T @ s1 @ s2).real
        return num / _nonzero(self.population(0) * self.population(1))

    def g2_auto(self, k: int = 0) -> float:
        s = self.sensor_ops[k]
        sd = s.conj().T
        return self.expect(sd @ sd @ s @ s).real / _nonzero(self.population(k) ** 2)

    def g2_tau(self, tau_grid: Sequence[float], first: int = 0) -> np.ndarray:
        """Regression correlator Tr[n_probe e^{L tau}(s_first rho s_first^dag)] / (n1 n2)."""
        probe = 1 - first
        s_f, s_p = self.sensor_ops[first], self.sensor_ops[probe]
        v0 = vectorize((s_f @ self.rho) @ s_f.conj().T) / self.scale
        A = (sp.diags(1.0 / self.scale) @ self.L.matrix @ sp.diags(self.scale)).tocsc()
        vs = propagate(Superoperator(A), v0, tau_grid) * self.scale[None, :]
        D = self.model.full_space.dim
        npr = (s_p.conj().T @ s_p).toarray()
        num = np.array([np.sum(npr.T * unvectorize(v, D)).real for v in vs])
        return num / _nonzero(self.population(0) * self.population(1))


def _nonzero(x: float) -> float:
    if not abs(x) > _MIN_POPULATION:
        raise UndefinedCorrelationError("vanishing filtered intensity")
    return x


def _richardson(model, sensors, gamma, cfg: SensorConfig, dim, extract) -> SensorEstimate:
    bare_pop = None
    vals = []
    backaction = 0.0
    for eps in (cfg.epsilon, cfg.epsilon / 2):
        ex = ExplicitSensors(model, sensors, gamma, eps, dim)
        vals.append(extract(ex))
        if bare_pop is None:
            rho0 = steady_state(_bare_liouvillian(model))
            a = target_operator(model.bare(), "a").matrix
            bare_pop = float(np.trace(a.conj().T @ a @ rho0).real)
        if bare_pop > 0:
            backaction = max(backaction, abs(ex.cavity_population() - bare_pop) / bare_pop)
    v1, v2 = vals
    # leading corrections are O(eps^2)
    value = (4 * v2 - v1) / 3
    linear_ok = abs(v1 - v2) <= LINEARITY_TOL * max(abs(v2), 1e-300)
    return SensorEstimate(value, v1, v2, cfg.epsilon, bool(linear_ok and backaction < BACKACTION_TOL),
                          backaction)


def tps_explicit(model: ModelSpec, filters: FilterSpec, cfg: SensorConfig = SensorConfig()) -> SensorEstimate:
    sensors = [(filters.omega1, cfg.target1), (filters.omega2, cfg.target2)]
    return _richardson(model, sensors, filters.gamma_filter, cfg, max(cfg.sensor_dim, 2),
                       lambda ex: ex.g2_cross())


def autocorr_explicit(model: ModelSpec, omega: float, gamma_filter: float,
                      cfg: SensorConfig = SensorConfig(sensor_dim=3)) -> SensorEstimate:
    return _richardson(model, [(omega, cfg.target1)], gamma_filter, cfg, max(cfg.sensor_dim, 3),
                       lambda ex: ex.g2_auto(0))


def spectrum_sensor(model: ModelSpec, omega: float, gamma_filter: float,
                    cfg: SensorConfig = SensorConfig()) -> SensorEstimate:
    """Filtered spectrum Gamma/(2 pi eps^2) <s^dag s> from one explicit sensor."""
    def extract(ex):
        eps = ex.model.sensors[0].epsilon
        return gamma_filter / (2 * math.pi * eps ** 2) * ex.population(0)
    return _richardson(model, [(omega, cfg.target1)], gamma_filter, cfg, 2, extract)


# ---------------------------------------------------------------- conditional sensors

def _canon(entries) -> tuple:
    return tuple(sorted(e for e in entries if e[2] or e[3]))


def _adjoint(key: tuple) -> tuple:
    return tuple(sorted((w, t, m, n) for w, t, n, m in key))


class SensorEngine:
    """Perturbative weak-sensor blocks on top of one bare model.

    Keys are sorted tuples of ``(omega, target, n, m)``; the empty key is the
    steady state itself. Blocks are Hermitian-paired, ``sigma_{m,n} =
    sigma_{n,m}^dag``, so only one of each pair is solved. Single-sensor blocks are
    cached for the lifetime of the engine.
    """

    def __init__(self, model: ModelSpec, gamma_filter: float, L: Superoperator | None = None,
                 rho: np.ndarray | None = None, solver: str = "direct"):
        if not gamma_filter > 0:
            raise ValueError("filter linewidth must be positive")
        self.model = model.bare()
        self.gamma = float(gamma_filter)
        self.L = L if L is not None else _bare_liouvillian(self.model)
        self.rho = steady_state(self.L) if rho is None else rho
        self.d = self.L.hilbert_dim
        self.solver = solver
        a = target_operator(self.model, "a")
        self.alpha = complex(np.trace(a.matrix @ self.rho))
        self._ops = {}
        self._single = {}
        self._lock = threading.Lock()
        self.solve_count = 0

    def op(self, tag: str):
        tag = normalize_target(tag)
        if tag not in self._ops:
            self._ops[tag] = target_operator(self.model, tag, self.alpha).matrix.tocsr()
        return self._ops[tag]

    def shift(self, key: tuple) -> complex:
        z = 0j
        for w, _, n, m in key:
            z += 1j * w * (n - m) + 0.5 * self.gamma * (n + m)
        return z

    def dependencies(self, key: tuple):
        deps = []
        for k, (w, t, n, m) in enumerate(key):
            if n:
                deps.append(_canon(key[:k] + ((w, t, n - 1, m),) + key[k + 1:]))
            if m:
                deps.append(_canon(key[:k] + ((w, t, n, m - 1),) + key[k + 1:]))
        return deps

    def source(self, key: tuple, get) -> np.ndarray:
        rhs = np.zeros((self.d, self.d), dtype=complex)
        for k, (w, t, n, m) in enumerate(key):
            T = self.op(t)
            if n:
                lower = get(_canon(key[:k] + ((w, t, n - 1, m),) + key[k + 1:]))
                rhs += 1j * math.sqrt(n) * (T @ lower)
            if m:
                lower = get(_canon(key[:k] + ((w, t, n, m - 1),) + key[k + 1:]))
                rhs -= 1j * math.sqrt(m) * (T.conj() @ lower.T).T  # lower @ T^dag
        return rhs

    def _solve(self, z: complex, rhs: np.ndarray, lu=None, transpose: bool = False) -> np.ndarray:
        """Solve (L - z) X = R, or its transpose, for column-stacked right-hand sides."""
        if lu is None:
            lu = self.L.factor(z)
        x = lu.solve(rhs, trans="T" if transpose else "N")
        with self._lock:
            self.solve_count += 1 if rhs.ndim == 1 else rhs.shape[1]
        A = self.L.matrix.T if transpose else self.L.matrix
        r = A @ x - z * x - rhs
        resid = np.linalg.norm(r, axis=0) / np.maximum(np.linalg.norm(rhs, axis=0), 1e-300)
        if np.any(~np.isfinite(resid)) or np.max(resid) > SHIFT_RESIDUAL:
            raise NumericalError(f"conditional-state solve residual {np.max(resid):.3e}",
                                 float(np.max(resid)))
        return x

    def block(self, key: tuple, memo: dict | None = None) -> np.ndarray:
        key = _canon(key)
        if not key:
            return self.rho
        adj = _adjoint(key)
        if adj < key:
            return self.block(adj, memo).conj().T
        single = len(key) == 1
        store = self._single if single else memo
        if store is None:
            store = memo = {}
        if key in store:
            return store[key]
        rhs = self.source(key, lambda k: self.block(k, memo))
        x = unvectorize(self._solve(self.shift(key), vectorize(rhs)), self.d)
        if single:
            with self._lock:
                self._single[key] = x
        else:
            store[key] = x
        return x

    # -- observables

    def trace(self, key: tuple, memo: dict | None = None) -> float:
        """Tr sigma for a block with equal ket and bra occupations on every sensor.

        Trace preservation gives Tr[(L - z) X] = -z Tr X, so such traces follow
        from the source alone without a solve.
        """
        key = _canon(key)
        if not key:
            return 1.0
        if any(n != m for _, _, n, m in key):
            raise ValueError("trace shortcut needs a sensor-diagonal block")
        memo = {} if memo is None else memo
        r = self.source(key, lambda k: self.block(k, memo))
        return float((-np.trace(r) / self.shift(key)).real)

    def population(self, omega: float, tag: str = "a") -> float:
        """<s^dag s> / eps^2 for a sensor at ``omega``."""
        return self.trace(((float(omega), normalize_target(tag), 1, 1),))

    def spectrum(self, omega: float, tag: str = "a") -> float:
        return self.gamma / (2 * math.pi) * self.population(omega, tag)

    def autocorr(self, omega: float, tag: str = "a") -> float:
        s = (float(omega), normalize_target(tag))
        return 2 * self.trace((s + (2, 2),)) / _nonzero(self.population(*s) ** 2)

    def cross(self, omega1: float, tag1: str, omega2: float, tag2: str) -> float:
        s1 = (float(omega1), normalize_target(tag1))
        s2 = (float(omega2), normalize_target(tag2))
        num = self.trace((s1 + (1, 1), s2 + (1, 1)))
        return num / _nonzero(self.population(*s1) * self.population(*s2))

    def g2(self, omega1: float, omega2: float, tag1: str = "a", tag2: str | None = None) -> float:
        tag2 = tag1 if tag2 is None else tag2
        if omega1 == omega2 and normalize_target(tag1) == normalize_target(tag2):
            return self.autocorr(omega1, tag1)
        return self.cross(omega1, tag1, omega2, tag2)

    # -- batched evaluation for maps

    def blocks_batch(self, keys: Iterable[tuple], threads: int = 1) -> dict:
        """Compute many blocks level by level, one factorization per distinct shift."""
        keys = [_canon(k) for k in keys]
        need = {}
        stack = list(keys)
        while stack:
            k = stack.pop()
            k = min(k, _adjoint(k))
            if not k or k in need:
                continue
            need[k] = sum(n + m for _, _, n, m in k)
            stack.extend(self.dependencies(k))
        got = {(): self.rho}
        got.update({k: v for k, v in self._single.items() if k in need})

        def get(k):
            return got[k] if k in got else got[_adjoint(k)].conj().T

        for level in sorted(set(need.values())):
            groups = defaultdict(list)
            for k, lev in need.items():
                if lev == level and k not in got:
                    groups[self.shift(k)].append(k)

            def run(item):
                z, ks = item
                rhs = np.stack([vectorize(self.source(k, get)) for k in ks], axis=1)
                # one-off factorizations stay out of the shared cache to bound memory
                return ks, self._solve(z, rhs, self.L.lu(z))

            items = sorted(groups.items(), key=lambda kv: (kv[0].real, kv[0].imag))
            for ks, x in _map(run, items, threads):
                for j, k in enumerate(ks):
                    got[k] = unvectorize(x[:, j].copy(), self.d)
                    if len(k) == 1:
                        with self._lock:
                            self._single.setdefault(k, got[k])
        return {k: get(k) for k in keys}

    def autocorr_batch(self, omegas: Sequence[float], tag: str = "a", threads: int = 1) -> np.ndarray:
        tag = normalize_target(tag)
        sensors = [(float(w), tag) for w in omegas]
        blocks = self.blocks_batch([(s + (2, 1),) for s in sensors], threads)
        out = np.empty(len(sensors))
        for i, s in enumerate(sensors):
            memo = {s + (2, 1): blocks[(s + (2, 1),)]}
            t22 = self.trace((s + (2, 2),), memo)
            out[i] = 2 * t22 / _nonzero(self.population(*s) ** 2)
        return out

    def cross_batch(self, pairs: Sequence[tuple[float, float]], tag1: str = "a", tag2: str | None = None,
                    threads: int = 1) -> np.ndarray:
        """Cross-correlations of two distinct sensors for many frequency pairs.

        Per pair only the two level-two blocks B = sigma[(1,0),(1,0)] and
        C = sigma[(1,0),(0,1)] are solved, grouped across the grid by their shifts
        i(w1 +- w2) + Gamma. The level-three blocks D = sigma[(1,1),(1,0)] and
        E = sigma[(1,0),(1,1)] enter the final trace only through Tr(T2^dag D) and
        Tr(T1^dag E), which are obtained from one transposed solve per frequency.
        """
        tag1 = normalize_target(tag1)
        tag2 = tag1 if tag2 is None else normalize_target(tag2)
        pairs = [(float(a), float(b)) for a, b in pairs]
        if any(a == b and tag1 == tag2 for a, b in pairs):
            raise ValueError("identical sensors belong to the autocorrelation path")
        n = len(pairs)
        T1, T2 = self.op(tag1), self.op(tag2)
        T1c, T2c = T1.conj().tocsr(), T2.conj().tocsr()
        d, G = self.d, self.gamma
        w1s = sorted({a for a, _ in pairs})
        w2s = sorted({b for _, b in pairs})
        single = self.blocks_batch([((w, tag1, 1, 1),) for w in w1s] + [((w, tag2, 1, 1),) for w in w2s],
                                   threads)

        def S(w, t, nn, mm):
            return single[((w, t, 1, 1),)] if (nn, mm) == (1, 1) else self.block(((w, t, nn, mm),))

        # transposed solves: Tr(T^dag X) = y . vec(R) for X = (L - z)^-1 R
        def adjoint_weight(item):
            w, t = item
            z = 1j * w + 1.5 * G
            rhs = vectorize(self.op(t).conj().toarray())
            y = self._solve(z, rhs, self.L.lu(z), transpose=True)
            return unvectorize(y, d)

        wanted = sorted({(w, tag1) for w in w1s} | {(w, tag2) for w in w2s})
        Y = dict(zip(wanted, _map(adjoint_weight, wanted, threads)))
        YE = {w: Y[(w, tag1)] for w in w1s}
        YD = {w: Y[(w, tag2)] for w in w2s}
        pB = np.zeros(n, dtype=complex)
        qB = np.zeros(n, dtype=complex)
        pC = np.zeros(n, dtype=complex)
        qC = np.zeros(n, dtype=complex)
        p0 = np.empty(n, dtype=complex)
        q0 = np.empty(n, dtype=complex)
        pop1 = {w: self.trace(((w, tag1, 1, 1),), {}) for w in w1s}
        pop2 = {w: self.trace(((w, tag2, 1, 1),), {}) for w in w2s}
        for i, (a, b) in enumerate(pairs):
            p0[i] = 1j * np.sum(YE[a] * (T1 @ S(b, tag2, 1, 1)))
            q0[i] = 1j * np.sum(YD[b] * (T2 @ S(a, tag1, 1, 1)))

        groups = defaultdict(list)
        for i, (a, b) in enumerate(pairs):
            groups[("B", _shift_key(1j * (a + b) + G))].append(i)
            groups[("C", _shift_key(1j * (a - b) + G))].append(i)

        def run(item):
            (kind, zk), idx = item
            z = complex(*zk)
            cols = []
            for i in idx:
                a, b = pairs[i]
                if kind == "B":
                    r = 1j * (T1 @ S(b, tag2, 1, 0)) + 1j * (T2 @ S(a, tag1, 1, 0))
                else:
                    r = 1j * (T1 @ S(b, tag2, 0, 1)) - 1j * (T2c @ S(a, tag1, 1, 0).T).T
                cols.append(vectorize(r))
            x = self._solve(z, np.stack(cols, axis=1), self.L.lu(z))
            for j, i in enumerate(idx):
                a, b = pairs[i]
                X = unvectorize(x[:, j].copy(), d)
                if kind == "B":
                    # -i Tr(Y^T B T^dag) = -i sum (Y conj(T)) * B
                    pB[i] = -1j * np.sum((T2c.T @ YE[a].T).T * X)
                    qB[i] = -1j * np.sum((T1c.T @ YD[b].T).T * X)
                else:
                    # i sum Y * (T C) and i sum Y * (T C^dag)
                    pC[i] = 1j * np.sum((T2.T @ YE[a]) * X)
                    qC[i] = 1j * np.sum((T1.T @ YD[b]).T * X.conj())
            return None

        items = sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1]))
        list(_map(run, items, threads))
        p = p0 + pB + pC
        q = q0 + qB + qC
        trace_f = -(p.imag + q.imag) / G
        out = np.empty(n)
        for i, (a, b) in enumerate(pairs):
            out[i] = trace_f[i] / _nonzero(pop1[a] * pop2[b])
        return out

    def g2_batch(self, pairs: Sequence[tuple[float, float]], tag1: str = "a", tag2: str | None = None,
                 threads: int = 1) -> np.ndarray:
        tag1 = normalize_target(tag1)
        tag2 = tag1 if tag2 is None else normalize_target(tag2)
        pairs = [(float(a), float(b)) for a, b in pairs]
        same = [tag1 == tag2 and a == b for a, b in pairs]
        out = np.empty(len(pairs))
        diag = [i for i, s in enumerate(same) if s]
        off = [i for i, s in enumerate(same) if not s]
        if diag:
            out[diag] = self.autocorr_batch([pairs[i][0] for i in diag], tag1, threads)
        if off:
            out[off] = self.cross_batch([pairs[i] for i in off], tag1, tag2, threads)
        return out

    # -- delayed correlations

    def g2_tau(self, omega1: float, omega2: float, tau_grid: Sequence[float], tag1: str = "a",
               tag2: str | None = None) -> np.ndarray:
        """g2(omega1, omega2; tau); positive tau: the omega2 photon is detected after omega1."""
        tag2 = tag1 if tag2 is None else tag2
        s1 = (float(omega1), normalize_target(tag1))
        s2 = (float(omega2), normalize_target(tag2))
        taus = np.asarray(tau_grid, dtype=float)
        out = np.empty(taus.size)
        for sel, first, probe, sign in ((taus >= 0, s1, s2, 1.0), (taus < 0, s2, s1, -1.0)):
            if sel.any():
                t = sign * taus[sel]
                order = np.argsort(t, kind="stable")
                vals = np.empty(t.size)
                vals[order] = self._delayed(first, probe, t[order])
                out[sel] = vals
        return out

    def _delayed(self, first, probe, taus):
        # after a click of the `first` sensor its own back-coupling is O(eps^2) and
        # drops out; the probe sensor keeps its perturbative blocks 00, 10, 01, 11
        d2 = self.d ** 2
        memo = {}
        x00 = self.block((first + (1, 1),))
        x10 = self.block(_canon((first + (1, 1), probe + (1, 0))), memo)
        x01 = x10.conj().T
        x11 = self.block(_canon((first + (1, 1), probe + (1, 1))), memo)
        w, t = probe
        T = self.op(t)
        eye = sp.identity(self.d, dtype=complex, format="csc")
        left = sp.kron(eye, T, format="csc")            # X -> T X
        right = sp.kron(T.conj(), eye, format="csc")    # X -> X T^dag
        Ld = self.L.matrix
        I2 = sp.identity(d2, dtype=complex, format="csc")
        z10 = 1j * w + 0.5 * self.gamma
        z01 = -1j * w + 0.5 * self.gamma
        A = sp.bmat([
            [Ld, None, None, None],
            [-1j * left, Ld - z10 * I2, None, None],
            [1j * right, None, Ld - z01 * I2, None],
            [None, 1j * right, -1j * left, Ld - self.gamma * I2],
        ], format="csc")
        v0 = np.concatenate([vectorize(x) for x in (x00, x10, x01, x11)])
        vs = propagate(Superoperator(A), v0, taus)
        tr = np.zeros(d2, dtype=complex)
        tr[np.arange(self.d) * (self.d + 1)] = 1.0
        num = (vs[:, 3 * d2:] @ tr).real
        p1 = self.population(*first)
        p2 = self.population(*probe)
        return num / _nonzero(p1 * p2)


def _shift_key(z: complex) -> tuple:
    # algebraically equal shifts from different frequency sums share one factorization
    return (round(z.real, 12) + 0.0, round(z.imag, 12) + 0.0)


def _map(fn, items, threads: int):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


# ---------------------------------------------------------------- public wrappers

def autocorr_conditional(model: ModelSpec, omega: float, gamma_filter: float, target: str = "a",
                         engine: SensorEngine | None = None) -> float:
    engine = engine or SensorEngine(model, gamma_filter)
    return engine.autocorr(omega, target)


def tps_conditional(model: ModelSpec, filters: FilterSpec, targets: tuple[str, str] = ("a", "a"),
                    engine: SensorEngine | None = None) -> float:
    engine = engine or SensorEngine(model, filters.gamma_filter)
    return engine.g2(filters.omega1, filters.omega2, targets[0], targets[1])


def tps_tau(model: ModelSpec, filters: FilterSpec, cfg: SensorConfig, tau_grid: Sequence[float],
            method: str = "conditional", engine: SensorEngine | None = None) -> np.ndarray:
    taus = np.asarray(tau_grid, dtype=float)
    if method == "conditional":
        engine = engine or SensorEngine(model, filters.gamma_filter)
        return engine.g2_tau(filters.omega1, filters.omega2, taus, cfg.target1, cfg.target2)
    if method != "explicit":
        raise ValueError(f"unknown method {method!r}")
    ex = ExplicitSensors(model, [(filters.omega1, cfg.target1), (filters.omega2, cfg.target2)],
                         filters.gamma_filter, cfg.epsilon, max(cfg.sensor_dim, 2))
    out = np.empty(taus.size)
    for sign, first in ((1, 0), (-1, 1)):
        sel = taus >= 0 if sign > 0 else taus < 0
        if sel.any():
            t = sign * taus[sel]
            order = np.argsort(t, kind="stable")
            vals = np.empty(t.size)
            vals[order] = ex.g2_tau(t[order], first=first)
            out[sel] = vals
    return out


def tps_map(model: ModelSpec, omega1_grid, omega2_grid, gamma_filter: float,
            targets: tuple[str, str] = ("a", "a"), method: str = "conditional",
            cfg: SensorConfig | None = None, threads: int = 1, chunk: int = 600,
            engine: SensorEngine | None = None, autocorr=None) -> CorrelationGrid:
    """g2 over a rectangular grid; symmetric target pairs on equal axes are mirrored.

    ``autocorr``, a callable of one frequency, supplies the equal-frequency
    entries of the conditional method (used to share a cache with CSI maps).
    """
    w1 = np.asarray(omega1_grid, dtype=float)
    w2 = np.asarray(omega2_grid, dtype=float)
    t1, t2 = normalize_target(targets[0]), normalize_target(targets[1])
    values = np.full((w1.size, w2.size), np.nan)
    mirror = t1 == t2 and w1.shape == w2.shape and np.array_equal(w1, w2)
    idx = [(i, j) for i in range(w1.size) for j in range(w2.size) if not mirror or j >= i]
    if method == "conditional":
        engine = engine or SensorEngine(model, gamma_filter)
        if autocorr is not None and t1 == t2:
            for i, j in idx:
                if w1[i] == w2[j]:
                    values[i, j] = autocorr(w1[i])
            idx = [(i, j) for i, j in idx if w1[i] != w2[j]]
        for start in range(0, len(idx), chunk):
            part = idx[start:start + chunk]
            vals = engine.g2_batch([(w1[i], w2[j]) for i, j in part], t1, t2, threads)
            for (i, j), v in zip(part, vals):
                values[i, j] = v
    elif method == "explicit":
        cfg = cfg or SensorConfig(target1=t1, target2=t2)
        cfg = replace(cfg, target1=t1, target2=t2)

        def one(ij):
            i, j = ij
            if w1[i] == w2[j] and t1 == t2:
                return autocorr_explicit(model, w1[i], gamma_filter, replace(cfg, sensor_dim=3)).value
            return tps_explicit(model, FilterSpec(w1[i], w2[j], gamma_filter), cfg).value

        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                vals = list(pool.map(one, idx))
        else:
            vals = [one(ij) for ij in idx]
        for (i, j), v in zip(idx, vals):
            values[i, j] = v
    else:
        raise ValueError(f"unknown method {method!r}")
    if mirror:
        lower = np.tril_indices(w1.size, -1)
        values[lower] = values.T[lower]
    meta = {"method": method, "targets": [t1, t2], "gamma_filter": gamma_filter,
            "truncation": list(model.space.mode_dims)}
    if method == "explicit":
        meta["epsilon"] = cfg.epsilon
    return CorrelationGrid(w1, w2, values, meta)
