"""Sparse bosonic operators on truncated multi-mode Fock spaces.

Mode ordering convention: the first entry of ``HilbertSpace.mode_dims`` is the
leftmost Kronecker factor. Every module builds operators through this space so
the ordering is never transposed silently.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
import numpy as np
import scipy.sparse as sp

from .errors import EmbeddingError, InvalidDimensionError

__all__ = ["HilbertSpace", "OperatorMatrix", "mode_operator", "embed", "kron"]


@dataclass(frozen=True)
class HilbertSpace:
    mode_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.mode_dims)
        if not dims:
            raise InvalidDimensionError("a Hilbert space needs at least one mode")
        for d in dims:
            if d < 2:
                raise InvalidDimensionError(f"mode dimension {d} < 2")
        object.__setattr__(self, "mode_dims", dims)

    @property
    def dim(self) -> int:
        return int(np.prod(self.mode_dims))

    @property
    def n_modes(self) -> int:
        return len(self.mode_dims)

    def __add__(self, other: "HilbertSpace") -> "HilbertSpace":
        return HilbertSpace(self.mode_dims + other.mode_dims)


class OperatorMatrix:
    """Immutable sparse complex matrix tied to a :class:`HilbertSpace`."""

    __slots__ = ("space", "_m")

    def __init__(self, space: HilbertSpace, entries):
        m = sp.csc_matrix(entries, dtype=complex, copy=True)
        if m.shape != (space.dim, space.dim):
            raise InvalidDimensionError(
                f"matrix shape {m.shape} does not match space dimension {space.dim}")
        m.sum_duplicates()
        m.eliminate_zeros()
        m.data.flags.writeable = False
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "_m", m)

    def __setattr__(self, name, value):
        raise AttributeError("OperatorMatrix is immutable")

    @property
    def matrix(self) -> sp.csc_matrix:
        return self._m

    @property
    def shape(self):
        return self._m.shape

    def dense(self) -> np.ndarray:
        return self._m.toarray()

    def _check(self, other):
        if not isinstance(other, OperatorMatrix):
            return NotImplemented
        if other.space != self.space:
            raise InvalidDimensionError(
                f"space mismatch: {self.space.mode_dims} vs {other.space.mode_dims}")
        return other

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return OperatorMatrix(self.space, self._m + other._m)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return OperatorMatrix(self.space, self._m - other._m)

    def __neg__(self):
        return OperatorMatrix(self.space, -self._m)

    def __mul__(self, scalar):
        if isinstance(scalar, OperatorMatrix):
            raise TypeError("use @ for operator products")
        return OperatorMatrix(self.space, self._m * complex(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return OperatorMatrix(self.space, self._m / complex(scalar))

    def __matmul__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return OperatorMatrix(self.space, self._m @ other._m)

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative operator power")
        out = identity(self.space)
        for _ in range(n):
            out = out @ self
        return out

    def dag(self) -> "OperatorMatrix":
        return OperatorMatrix(self.space, self._m.conj().T)

    def allclose(self, other, atol=1e-12) -> bool:
        diff = self._m - other._m
        return diff.nnz == 0 or float(abs(diff).max()) <= atol

    def __repr__(self):
        return f"OperatorMatrix(dims={self.space.mode_dims}, nnz={self._m.nnz})"


def identity(space: HilbertSpace) -> OperatorMatrix:
    return OperatorMatrix(space, sp.identity(space.dim, dtype=complex, format="csc"))


def mode_operator(kind: str, dim: int) -> OperatorMatrix:
    """Ladder, number or identity operator for a single mode truncated at ``dim``."""
    if dim < 2:
        raise InvalidDimensionError(f"mode dimension {dim} < 2")
    space = HilbertSpace((dim,))
    n = np.arange(dim)
    if kind == "annihilate":
        m = sp.diags(np.sqrt(n[1:]).astype(complex), 1, shape=(dim, dim))
    elif kind == "create":
        m = sp.diags(np.sqrt(n[1:]).astype(complex), -1, shape=(dim, dim))
    elif kind == "number":
        m = sp.diags(n.astype(complex), 0)
    elif kind == "identity":
        m = sp.identity(dim, dtype=complex)
    else:
        raise ValueError(f"unknown mode operator kind {kind!r}")
    return OperatorMatrix(space, m)


def embed(op: OperatorMatrix, mode_index: int, space: HilbertSpace) -> OperatorMatrix:
    """Place a single-mode operator into slot ``mode_index`` of ``space``."""
    if not 0 <= mode_index < space.n_modes:
        raise EmbeddingError(f"mode index {mode_index} out of range for {space.mode_dims}")
    if op.space.n_modes != 1 or op.shape[0] != space.mode_dims[mode_index]:
        raise EmbeddingError(
            f"operator of dimension {op.shape[0]} cannot occupy mode {mode_index} "
            f"of dimension {space.mode_dims[mode_index]}")
    factors = [sp.identity(d, dtype=complex, format="csc") for d in space.mode_dims]
    factors[mode_index] = op.matrix
    return OperatorMatrix(space, reduce(lambda x, y: sp.kron(x, y, format="csc"), factors))


def kron(left: OperatorMatrix, right: OperatorMatrix) -> OperatorMatrix:
    return OperatorMatrix(left.space + right.space,
                          sp.kron(left.matrix, right.matrix, format="csc"))


def mode_ops(space: HilbertSpace, mode_index: int) -> OperatorMatrix:
    """Annihilation operator of one mode embedded in ``space``."""
    return embed(mode_operator("annihilate", space.mode_dims[mode_index]), mode_index, space)


def operator_on(space: HilbertSpace, op: OperatorMatrix, first_mode: int = 0) -> OperatorMatrix:
    """Embed a (possibly multi-mode) operator into a larger space starting at ``first_mode``."""
    k = op.space.n_modes
    if space.mode_dims[first_mode:first_mode + k] != op.space.mode_dims:
        raise EmbeddingError(
            f"cannot place modes {op.space.mode_dims} at slot {first_mode} of {space.mode_dims}")
    left = int(np.prod(space.mode_dims[:first_mode], dtype=int))
    right = int(np.prod(space.mode_dims[first_mode + k:], dtype=int))
    m = sp.kron(sp.kron(sp.identity(left, format="csc"), op.matrix), sp.identity(right, format="csc"),
                format="csc")
    return OperatorMatrix(space, m)
