"""Hamiltonians and collapse operators for the driven optomechanical family.

Every model is written in the frame rotating at the laser frequency, so only the
cavity-laser detuning ``delta_a`` appears. Rates and frequencies share one unit;
presets use kappa = 1.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .errors import InvalidParameterError, ModelConstructionError
from .fock import HilbertSpace, OperatorMatrix, embed, identity, mode_operator

__all__ = [
    "SystemParams", "Variant", "ModelVariant", "ModelSpec", "SensorMode",
    "kerr_shift", "expansion_coefficient", "build_hamiltonian", "build_collapse_ops",
    "displaced_mode_op", "make_model", "laser_at_first_excited", "hamiltonian", "collapse_operators",
]

DEFAULT_CAVITY_DIM = 6
DEFAULT_PHONON_DIM = 8
DEFAULT_POLARON_CUTOFF = 8


@dataclass(frozen=True)
class SystemParams:
    delta_a: float
    omega_b: float
    g0: float
    omega_drive: float
    kappa: float = 1.0
    gamma: float = 0.1
    n_th: float = 0.0

    def __post_init__(self):
        if self.kappa <= 0:
            raise InvalidParameterError("kappa must be positive")
        if self.gamma <= 0:
            raise InvalidParameterError("gamma must be positive")
        if self.omega_b <= 0:
            raise InvalidParameterError("omega_b must be positive")
        if self.g0 < 0 or self.omega_drive < 0 or self.n_th < 0:
            raise InvalidParameterError("g0, omega_drive and n_th must be nonnegative")

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    def check_sideband_resolved(self) -> bool:
        ok = self.omega_b > self.kappa
        if not ok:
            warnings.warn(f"omega_b={self.omega_b} <= kappa={self.kappa}: not sideband resolved",
                          stacklevel=2)
        return ok


class Variant(str, enum.Enum):
    OM_FULL = "OM_full"
    KERR_DRIVEN = "KERR_DRIVEN"
    KERR_SQUEEZE_ONLY = "KERR_SQUEEZE_ONLY"
    KERR_FLUCT_DRIVE = "KERR_FLUCT_DRIVE"
    POLARON_DRIVE = "POLARON_DRIVE"
    ACTIVE_ONLY = "ACTIVE_ONLY"

    @property
    def single_mode(self) -> bool:
        return self in (Variant.KERR_DRIVEN, Variant.KERR_SQUEEZE_ONLY, Variant.KERR_FLUCT_DRIVE)

    @property
    def fluctuation(self) -> bool:
        return self in (Variant.KERR_SQUEEZE_ONLY, Variant.KERR_FLUCT_DRIVE)


@dataclass(frozen=True)
class ModelVariant:
    """Variant tag plus the extra data some variants carry.

    ``orders`` is the set of polaron drive expansion orders (POLARON_DRIVE only).
    ``alpha`` is the real coherent amplitude used by the fluctuation variants.
    ``alpha2_shift`` and ``cubic`` toggle the alpha^2 frequency shift and the cubic
    ``2 alpha (da^dag da^2 + h.c.)`` line of the Kerr expansion.
    """

    tag: Variant
    orders: tuple[int, ...] = ()
    alpha: complex | None = None
    alpha2_shift: bool = True
    cubic: bool = False

    def __post_init__(self):
        object.__setattr__(self, "tag", Variant(self.tag))
        orders = tuple(sorted(set(int(n) for n in self.orders)))
        if self.tag is Variant.POLARON_DRIVE:
            if not orders:
                raise ModelConstructionError("POLARON_DRIVE needs at least one expansion order")
            if orders[0] < 0:
                raise ModelConstructionError("expansion orders must be >= 0")
        object.__setattr__(self, "orders", orders)


@dataclass(frozen=True)
class SensorMode:
    """Weakly coupled filter mode: H += omega s^dag s + eps (s T^dag + s^dag T)."""

    omega: float
    gamma: float
    epsilon: float
    target: OperatorMatrix
    dim: int = 2
    tag: str = "a"


@dataclass(frozen=True)
class ModelSpec:
    params: SystemParams
    variant: ModelVariant
    space: HilbertSpace
    sensors: tuple[SensorMode, ...] = field(default=())

    def __post_init__(self):
        need = 1 if self.variant.tag.single_mode else 2
        if self.space.n_modes != need:
            raise ModelConstructionError(
                f"{self.variant.tag.value} needs {need} mode(s), got dims {self.space.mode_dims}")
        if self.variant.tag.fluctuation and self.variant.alpha is None:
            raise ModelConstructionError(f"{self.variant.tag.value} requires alpha")
        for s in self.sensors:
            if s.target.space != self.space:
                raise ModelConstructionError("sensor target does not act on the system space")

    @property
    def full_space(self) -> HilbertSpace:
        if not self.sensors:
            return self.space
        return HilbertSpace(self.space.mode_dims + tuple(s.dim for s in self.sensors))

    @property
    def truncation(self) -> tuple[int, ...]:
        return self.space.mode_dims

    def bare(self) -> "ModelSpec":
        return replace(self, sensors=())


def kerr_shift(params: SystemParams) -> float:
    if params.omega_b <= 0:
        raise InvalidParameterError("omega_b must be positive")
    return params.g0 ** 2 / params.omega_b


def expansion_coefficient(n: int, params: SystemParams) -> float:
    if n < 0:
        raise InvalidParameterError("expansion order must be >= 0")
    return (params.g0 / params.omega_b) ** n / math.factorial(n)


def laser_at_first_excited(params: SystemParams) -> SystemParams:
    """Tune the laser to the first excited level, i.e. delta_a = g0^2/omega_b."""
    return params.with_(delta_a=kerr_shift(params))


def make_model(variant, params: SystemParams, cavity_dim: int = DEFAULT_CAVITY_DIM,
               phonon_dim: int = DEFAULT_PHONON_DIM) -> ModelSpec:
    if not isinstance(variant, ModelVariant):
        variant = ModelVariant(Variant(variant))
    dims = (cavity_dim,) if variant.tag.single_mode else (cavity_dim, phonon_dim)
    return ModelSpec(params, variant, HilbertSpace(dims))


def _ops(space: HilbertSpace):
    a = embed(mode_operator("annihilate", space.mode_dims[0]), 0, space)
    b = embed(mode_operator("annihilate", space.mode_dims[1]), 1, space) if space.n_modes > 1 else None
    return a, b


def build_hamiltonian(spec: ModelSpec) -> OperatorMatrix:
    """System Hamiltonian on ``spec.space`` (sensor terms are added by :func:`hamiltonian`)."""
    p, v, space = spec.params, spec.variant, spec.space
    a, b = _ops(space)
    ad = a.dag()
    na = ad @ a
    dg = kerr_shift(p)
    tag = v.tag
    if tag is Variant.OM_FULL:
        bd = b.dag()
        return (p.delta_a * na + p.omega_b * (bd @ b) - p.g0 * (na @ (b + bd))
                + 1j * p.omega_drive * (a - ad))
    if tag is Variant.KERR_DRIVEN:
        return ((p.delta_a - dg) * na - dg * (ad @ ad @ a @ a)
                - 1j * p.omega_drive * (ad - a))
    if tag.fluctuation:
        alpha = abs(v.alpha)
        detuning = p.delta_a - dg - (4 * dg * alpha ** 2 if v.alpha2_shift else 0.0)
        h = detuning * na
        if tag is Variant.KERR_SQUEEZE_ONLY:
            return h - dg * alpha ** 2 * (ad @ ad + a @ a)
        h = h - 2 * dg * alpha ** 3 * (ad + a) - dg * (ad @ ad @ a @ a)
        if v.cubic:
            h = h - 2 * dg * alpha * (ad @ a @ a + ad @ ad @ a)
        return h
    bd = b.dag()
    if tag is Variant.POLARON_DRIVE:
        h = p.omega_b * (bd @ b) + p.delta_a * na
        x = bd - b
        for n in v.orders:
            h = h + (1j * p.omega_drive * expansion_coefficient(n, p)) * ((a - (-1) ** n * ad) @ (x ** n))
        return h
    if tag is Variant.ACTIVE_ONLY:
        return (p.delta_a * na + p.omega_b * (bd @ b)
                + 1j * p.omega_drive * (p.g0 / p.omega_b) * (ad @ bd - a @ b))
    raise ModelConstructionError(f"unknown variant {tag}")


def build_collapse_ops(params: SystemParams, space: HilbertSpace) -> list[OperatorMatrix]:
    """Prescaled GKSL operators: sqrt(kappa) a, sqrt(gamma(n_th+1)) b, sqrt(gamma n_th) b^dag."""
    a, b = _ops(space)
    ops = [math.sqrt(params.kappa) * a]
    if b is not None:
        ops.append(math.sqrt(params.gamma * (params.n_th + 1)) * b)
        if params.n_th > 0:
            ops.append(math.sqrt(params.gamma * params.n_th) * b.dag())
    return ops


def displaced_mode_op(alpha: complex, space: HilbertSpace) -> OperatorMatrix:
    a, _ = _ops(space)
    return a - complex(alpha) * identity(space)


def _lift(op: OperatorMatrix, space: HilbertSpace) -> OperatorMatrix:
    extra = space.dim // op.space.dim
    if extra == 1:
        return OperatorMatrix(space, op.matrix)
    return OperatorMatrix(space, sp.kron(op.matrix, sp.identity(extra, format="csc"), format="csc"))


def hamiltonian(spec: ModelSpec) -> OperatorMatrix:
    """Full Hamiltonian including any attached sensors (sensor modes follow the system modes)."""
    h = build_hamiltonian(spec)
    if not spec.sensors:
        return h
    full = spec.full_space
    h = _lift(h, full)
    n_sys = spec.space.n_modes
    for i, s in enumerate(spec.sensors):
        sig = embed(mode_operator("annihilate", s.dim), n_sys + i, full)
        t = _lift(s.target, full)
        h = h + s.omega * (sig.dag() @ sig) + s.epsilon * (sig @ t.dag() + sig.dag() @ t)
    return h


def collapse_operators(spec: ModelSpec) -> list[OperatorMatrix]:
    ops = build_collapse_ops(spec.params, spec.space)
    if not spec.sensors:
        return ops
    full = spec.full_space
    ops = [_lift(c, full) for c in ops]
    n_sys = spec.space.n_modes
    for i, s in enumerate(spec.sensors):
        sig = embed(mode_operator("annihilate", s.dim), n_sys + i, full)
        ops.append(math.sqrt(s.gamma) * sig)
    return ops


def is_hermitian(op: OperatorMatrix, rtol: float = 1e-12) -> bool:
    m = op.matrix
    scale = max(float(abs(m).max()) if m.nnz else 0.0, 1.0)
    d = m - m.conj().T
    return d.nnz == 0 or float(np.abs(d.data).max()) < rtol * scale
