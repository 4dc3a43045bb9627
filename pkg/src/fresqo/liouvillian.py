"""Vectorized master equation: steady states, shifted solves, propagation.

Vectorization is column stacking, ``vec(rho)[j*d + i] = rho[i, j]``, so that
``vec(A rho B) = (B^T kron A) vec(rho)``.
"""
from __future__ import annotations

import threading
from collections import OrderedDict
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .errors import DegenerateSteadyStateError, InvalidDimensionError, NumericalError, StiffnessError
from .fock import OperatorMatrix

__all__ = [
    "Superoperator", "build_liouvillian", "steady_state", "shifted_solve", "propagate",
    "vectorize", "unvectorize", "trace_row",
]

STEADY_RESIDUAL = 1e-10
SHIFT_RESIDUAL = 1e-9


def vectorize(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvectorize(v: np.ndarray, d: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if d is None:
        d = int(round(np.sqrt(v.size)))
    return v.reshape(d, d, order="F")


def trace_row(d: int) -> np.ndarray:
    """Row vector w with w . vec(rho) = Tr(rho)."""
    w = np.zeros(d * d, dtype=complex)
    w[np.arange(d) * (d + 1)] = 1.0
    return w


# memory budget for cached factorizations of one Liouvillian
DEFAULT_CACHE_BYTES = 1 << 30


class _FactorCache:
    """LRU of sparse LU factorizations keyed by the complex shift.

    Bounded both by entry count and by the memory held in the factors; the most
    recent entry is always kept. Factorizations of the same matrix are
    deterministic, so results do not depend on which thread created an entry.
    The lock only guards the dictionary.
    """

    def __init__(self, maxsize=16, max_bytes=DEFAULT_CACHE_BYTES):
        self.maxsize = maxsize
        self.max_bytes = max_bytes
        self._d = OrderedDict()
        self._bytes = 0
        self._lock = threading.Lock()

    @staticmethod
    def _size(lu) -> int:
        try:
            return 24 * lu.nnz
        except AttributeError:
            return 0

    def get(self, key, factory):
        with self._lock:
            if key in self._d:
                self._d.move_to_end(key)
                return self._d[key][0]
        lu = factory()
        size = self._size(lu)
        with self._lock:
            if key not in self._d:
                self._d[key] = (lu, size)
                self._bytes += size
            self._d.move_to_end(key)
            while len(self._d) > 1 and (len(self._d) > self.maxsize or self._bytes > self.max_bytes):
                self._bytes -= self._d.popitem(last=False)[1][1]
        return lu

    def __len__(self):
        return len(self._d)

    def clear(self):
        with self._lock:
            self._d.clear()
            self._bytes = 0


class PermutedLU:
    """Sparse LU of ``P A P^T`` for a symmetric permutation ``p``.

    Reverse Cuthill-McKee ordering keeps the Kronecker-structured Liouvillians
    banded, which gives less fill than a column-only ordering.
    """

    def __init__(self, A, perm=None):
        A = sp.csc_matrix(A)
        self.perm = rcm_permutation(A) if perm is None else perm
        self._lu = spla.splu(A[self.perm][:, self.perm].tocsc(), permc_spec="NATURAL")
        self.nnz = self._lu.nnz
        self.shape = A.shape

    def solve(self, rhs, trans="N"):
        rhs = np.asarray(rhs)
        x = np.empty(rhs.shape, dtype=np.result_type(rhs, complex))
        x[self.perm] = self._lu.solve(np.ascontiguousarray(rhs[self.perm]), trans=trans)
        return x


def rcm_permutation(A) -> np.ndarray:
    pattern = (abs(A) + abs(A.T)).tocsr()
    return reverse_cuthill_mckee(pattern, symmetric_mode=True)


class Superoperator:
    """Sparse Liouvillian acting on column-stacked density matrices."""

    def __init__(self, matrix, hamiltonian=None, collapse=(), cache_size=16):
        self.matrix = sp.csc_matrix(matrix, dtype=complex)
        n = self.matrix.shape[0]
        self.hilbert_dim = int(round(np.sqrt(n)))
        if self.hilbert_dim ** 2 != n or self.matrix.shape != (n, n):
            raise InvalidDimensionError(f"superoperator shape {self.matrix.shape} is not d^2 x d^2")
        self.hamiltonian = hamiltonian
        self.collapse = tuple(collapse)
        self._lu = _FactorCache(cache_size)
        self._eye = sp.identity(n, dtype=complex, format="csc")
        self._perm = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, v):
        return self.matrix @ v

    def factor(self, z: complex):
        """Cached sparse LU of L - z I."""
        z = complex(z)
        return self._lu.get(z, lambda: self.lu(z))

    def lu(self, z: complex) -> PermutedLU:
        """Uncached sparse LU of L - z I; the ordering is shared by all shifts."""
        if self._perm is None:
            self._perm = rcm_permutation(self.shifted(1.0))
        return PermutedLU(self.shifted(z), self._perm)

    def shifted(self, z: complex):
        return self.matrix - complex(z) * self._eye


def build_liouvillian(H: OperatorMatrix, collapse: Sequence[OperatorMatrix]) -> Superoperator:
    """L = -i(I(x)H - H^T(x)I) + sum_C [conj(C)(x)C - 1/2 I(x)C^dag C - 1/2 (C^dag C)^T(x)I]."""
    for c in collapse:
        if c.space != H.space:
            raise InvalidDimensionError("collapse operator and Hamiltonian live on different spaces")
    d = H.space.dim
    eye = sp.identity(d, dtype=complex, format="csc")
    h = H.matrix
    L = -1j * (sp.kron(eye, h, format="csc") - sp.kron(h.T, eye, format="csc"))
    for c in collapse:
        cm = c.matrix
        cdc = (cm.conj().T @ cm).tocsc()
        L = L + sp.kron(cm.conj(), cm, format="csc") - 0.5 * sp.kron(eye, cdc, format="csc") \
            - 0.5 * sp.kron(cdc.T, eye, format="csc")
    L = sp.csc_matrix(L)
    L.sum_duplicates()
    L.eliminate_zeros()
    return Superoperator(L, H, collapse)


def _as_super(L) -> Superoperator:
    return L if isinstance(L, Superoperator) else Superoperator(L)


def steady_state(L, scale: np.ndarray | None = None, check: bool = True) -> np.ndarray:
    """Unique steady state of ``L`` as a d x d density matrix.

    The population row of L with the largest diagonal magnitude is replaced by the
    trace constraint.
    ``scale`` optionally balances the system: the solve runs on
    ``S^-1 L S`` for ``S = diag(scale)``, which leaves the solution unchanged but
    keeps entries of very different magnitude (weak sensors) accurate.
    """
    L = _as_super(L)
    d = L.hilbert_dim
    A = L.matrix
    w = trace_row(d)
    if scale is not None:
        scale = np.asarray(scale, dtype=float)
        A = (sp.diags(1.0 / scale) @ A @ sp.diags(scale)).tocsc()
        w = w * scale
    y = _solve_constrained(A, w)
    resid = np.abs(A @ y).max()
    if not np.isfinite(resid) or resid > STEADY_RESIDUAL:
        y = _nullvector(A, w)
        resid = np.abs(A @ y).max()
        if not np.isfinite(resid) or resid > STEADY_RESIDUAL:
            raise DegenerateSteadyStateError(f"steady-state residual {resid:.3e}", resid)
    x = y * scale if scale is not None else y
    rho = unvectorize(x, d)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    if check:
        evals = np.linalg.eigvalsh(rho)
        if evals.min() < -STEADY_RESIDUAL:
            raise DegenerateSteadyStateError(f"steady state not positive: min eigenvalue {evals.min():.3e}",
                                             resid)
    return rho


def _constraint_row(A, w, candidates=None):
    # the replaced row must carry weight in the trace functional, otherwise the
    # trace-preservation dependency among the remaining rows keeps M singular
    rows = np.flatnonzero(w)
    if candidates is not None:
        rows = np.intersect1d(rows, candidates)
    return int(rows[np.argmax(np.abs(A.diagonal()[rows]))])


def _solve_constrained(A, w):
    r = _constraint_row(A, w)
    M = A.tocsr(copy=True)
    M.data[M.indptr[r]:M.indptr[r + 1]] = 0.0
    row = sp.csr_matrix((w[w != 0], (np.zeros(np.count_nonzero(w), int), np.flatnonzero(w))),
                        shape=(1, A.shape[1]))
    e = sp.csr_matrix(([1.0], ([r], [0])), shape=(A.shape[0], 1))
    M = (M + e @ row).tocsc()
    rhs = np.zeros(A.shape[0], dtype=complex)
    rhs[r] = 1.0
    try:
        y = PermutedLU(M).solve(rhs)
    except RuntimeError:
        return np.full(A.shape[0], np.nan, dtype=complex)
    return y


def _nullvector(A, w):
    try:
        _, vec = spla.eigs(A, k=1, sigma=0, which="LM")
    except Exception as exc:  # ARPACK convergence failures
        raise DegenerateSteadyStateError(f"eigen fallback failed: {exc}") from exc
    y = vec[:, 0]
    return y / (w @ y)


def shifted_solve(L, z: complex, rhs: np.ndarray, method: str = "direct") -> np.ndarray:
    """Solve (L - z I) x = rhs to relative residual 1e-9."""
    L = _as_super(L)
    rhs = np.asarray(rhs, dtype=complex)
    norm = np.linalg.norm(rhs)
    if norm == 0:
        return np.zeros_like(rhs)
    if method == "direct":
        x = L.factor(z).solve(rhs)
    elif method == "iterative":
        A = L.shifted(z)
        ilu = spla.spilu(A, drop_tol=1e-6, fill_factor=20)
        M = spla.LinearOperator(A.shape, ilu.solve, dtype=complex)
        x, info = spla.gmres(A, rhs, M=M, rtol=1e-12, atol=0.0, restart=60, maxiter=200)
        if info != 0:
            raise NumericalError(f"GMRES did not converge (info={info})")
    else:
        raise ValueError(f"unknown solve method {method!r}")
    resid = np.linalg.norm(L.matrix @ x - complex(z) * x - rhs) / norm
    if not np.isfinite(resid) or resid > SHIFT_RESIDUAL:
        raise NumericalError(f"shifted solve residual {resid:.3e} at z={z}", resid)
    return x


def propagate(L, v0: np.ndarray, tau_grid: Sequence[float]) -> np.ndarray:
    """Return exp(L tau) v0 for every tau in an ascending nonnegative grid (rows)."""
    L = _as_super(L)
    taus = np.asarray(tau_grid, dtype=float)
    if taus.ndim != 1 or (taus.size and (taus[0] < 0 or np.any(np.diff(taus) < 0))):
        raise ValueError("tau grid must be ascending and nonnegative")
    return _expm_steps(L.matrix, np.asarray(v0, dtype=complex), taus)


def _expm_steps(A, v0, taus):
    out = np.empty((taus.size, v0.size), dtype=complex)
    if taus.size == 0:
        return out
    steps = np.diff(taus)
    uniform = taus.size > 2 and np.allclose(steps, steps[0], rtol=1e-12, atol=0) and steps[0] > 0
    v = v0
    if taus[0] > 0:
        v = spla.expm_multiply(A * taus[0], v0)
    out[0] = v
    if uniform:
        out[1:] = spla.expm_multiply(A, v, start=0.0, stop=taus[-1] - taus[0], num=taus.size,
                                     endpoint=True)[1:]
    else:
        for k in range(1, taus.size):
            dt = taus[k] - taus[k - 1]
            v = spla.expm_multiply(A * dt, v) if dt > 0 else v
            out[k] = v
    if not np.all(np.isfinite(out)):
        raise StiffnessError("propagation produced non-finite values")
    return out


def steady_state_sectors(L, labels: np.ndarray, scale: np.ndarray, vacuum_label=0,
                         tol: float = 1e-13) -> np.ndarray:
    """Steady state of a large Liouvillian whose indices split into sectors.

    Used for explicitly attached sensor modes: ``labels`` assigns every Liouville
    index to a sector (the sensor occupations of ket and bra) and ``scale`` is the
    diagonal balancing of :func:`steady_state`. The balanced system is solved by
    GMRES preconditioned with exact LU factorizations of the diagonal sector
    blocks. The returned state is certified by the residual of the full system.
    """
    L = _as_super(L)
    d = L.hilbert_dim
    scale = np.asarray(scale, dtype=float)
    A = (sp.diags(1.0 / scale) @ L.matrix @ sp.diags(scale)).tocsr()
    w = trace_row(d) * scale
    labels = np.asarray(labels)
    r = _constraint_row(A, w, np.flatnonzero(labels == vacuum_label))
    M = A.copy()
    M.data[M.indptr[r]:M.indptr[r + 1]] = 0.0
    nz = np.flatnonzero(w)
    row = sp.csr_matrix((w[nz], (np.zeros(nz.size, int), nz)), shape=(1, A.shape[1]))
    M = (M + sp.csr_matrix(([1.0], ([r], [0])), shape=(A.shape[0], 1)) @ row).tocsr()
    blocks = []
    for lab in np.unique(labels):
        idx = np.flatnonzero(labels == lab)
        blocks.append((idx, spla.splu(M[idx][:, idx].tocsc())))

    def apply_prec(v):
        out = np.empty_like(v, dtype=complex)
        for idx, lu in blocks:
            out[idx] = lu.solve(v[idx])
        return out

    n = A.shape[0]
    rhs = np.zeros(n, dtype=complex)
    rhs[r] = 1.0
    prec = spla.LinearOperator((n, n), apply_prec, dtype=complex)
    y, info = spla.gmres(M, rhs, M=prec, rtol=tol, atol=0.0, restart=40, maxiter=50)
    resid = np.abs(A @ y).max()
    if info != 0 or not np.isfinite(resid) or resid > STEADY_RESIDUAL:
        raise DegenerateSteadyStateError(f"sector steady-state residual {resid:.3e} (info={info})", resid)
    rho = unvectorize(y * scale, d)
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real
