"""Unfiltered observables: expectation values, colour-blind g2(tau) and the
one-photon spectrum obtained from the Liouvillian resolvent."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidDimensionError, UndefinedCorrelationError
from .fock import OperatorMatrix
from .liouvillian import Superoperator, propagate, shifted_solve, vectorize

__all__ = ["SpectrumTrace", "expectation", "g2_blind", "g2_blind_zero", "spectrum_resolvent"]

_POSITIVITY_TOL = 1e-12


@dataclass(frozen=True)
class SpectrumTrace:
    omega_grid: np.ndarray
    values: np.ndarray
    gamma_filter: float
    target: str = "a"

    def __post_init__(self):
        if len(self.omega_grid) != len(self.values):
            raise ValueError("frequency grid and values differ in length")
        if not self.gamma_filter > 0:
            raise ValueError("filter linewidth must be positive")


def _matrix(op):
    return op.matrix if isinstance(op, OperatorMatrix) else op


def expectation(rho: np.ndarray, op) -> complex:
    """Tr(O rho)."""
    m = _matrix(op)
    if m.shape != rho.shape:
        raise InvalidDimensionError(f"operator {m.shape} does not match state {rho.shape}")
    return complex((m @ rho).trace())


def g2_blind_zero(rho: np.ndarray, op) -> float:
    """<op^dag op^dag op op> / <op^dag op>^2 at zero delay."""
    m = _matrix(op)
    md = m.conj().T
    n = expectation(rho, md @ m).real
    if not n > 0:
        raise UndefinedCorrelationError("vanishing population")
    return expectation(rho, md @ md @ m @ m).real / n ** 2


def g2_blind(L: Superoperator, rho_ss: np.ndarray, op, tau_grid: Sequence[float]) -> np.ndarray:
    """Second-order coherence by quantum regression, for tau >= 0 (ascending grid).

    g2(tau) = Tr[op^dag op e^{L tau}(op rho op^dag)] / <op^dag op>^2
    """
    m = _matrix(op)
    md = m.conj().T
    n = expectation(rho_ss, md @ m).real
    if not n > 0:
        raise UndefinedCorrelationError("vanishing population")
    v0 = vectorize((m @ rho_ss) @ md)
    vs = propagate(L, v0, tau_grid)
    num_op = (md @ m).toarray()
    # Tr(A X) = sum_ij A_ji X_ij
    weights = vectorize(num_op.T)
    return (vs @ weights).real / n ** 2


def spectrum_resolvent(L: Superoperator, rho_ss: np.ndarray, op, omega_grid: Sequence[float],
                       gamma_filter: float, target: str = "a") -> SpectrumTrace:
    """Filtered one-photon spectrum (1/pi) Re int_0^inf e^{-(i w + G/2) t} <op^dag(t) op(0)> dt.

    The Laplace transform of the regression correlator at s = i w + G/2 is
    Tr[op^dag (s - L)^{-1}(op rho)], evaluated with one shifted solve per frequency.
    """
    if not gamma_filter > 0:
        raise ValueError("filter linewidth must be positive")
    m = _matrix(op)
    rhs = -vectorize(m @ rho_ss)
    weights = vectorize(m.conj().T.toarray().T)
    omegas = np.asarray(omega_grid, dtype=float)
    vals = np.empty(omegas.size)
    for k, w in enumerate(omegas):
        x = shifted_solve(L, 1j * w + 0.5 * gamma_filter, rhs)
        vals[k] = (weights @ x).real / math.pi
    if vals.size and vals.min() < -_POSITIVITY_TOL * max(1.0, np.abs(vals).max()):
        raise UndefinedCorrelationError(f"negative spectral density {vals.min():.3e}")
    return SpectrumTrace(omegas, vals, float(gamma_filter), target)
