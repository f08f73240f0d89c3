"""Signed sparse vectors and the positive/negative split into nonnegative space.

A vector ``u`` in ``D`` dimensions becomes a nonnegative vector in ``2D``
dimensions: the positive part of coordinate ``i`` lands at ``2i`` and the
magnitude of the negative part at ``2i + 1``.  Stored values are never zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp


class InvalidInputError(ValueError):
    """Raised when a vector or dataset violates its structural invariants."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SparseVector:
    """Signed sparse vector: sorted 0-based ``indices`` with nonzero ``values``."""

    dim: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        idx = np.array(self.indices, dtype=np.int64).reshape(-1)
        val = np.array(self.values, dtype=np.float64).reshape(-1)
        if int(self.dim) <= 0:
            raise InvalidInputError(f"dim must be positive, got {self.dim}")
        if idx.shape != val.shape:
            raise InvalidInputError("indices and values differ in length")
        if not np.all(np.isfinite(val)):
            raise InvalidInputError("non-finite value in sparse vector")
        if np.any(val == 0.0):
            raise InvalidInputError("stored zero in sparse vector")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.dim:
                raise InvalidInputError(f"index out of range for dim {self.dim}")
            if np.any(np.diff(idx) <= 0):
                raise InvalidInputError("indices must be strictly increasing")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "indices", _frozen(idx))
        object.__setattr__(self, "values", _frozen(val))

    @classmethod
    def from_dense(cls, dense: Sequence[float]) -> "SparseVector":
        arr = np.asarray(dense, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("non-finite value in dense input")
        (nz,) = np.nonzero(arr)
        return cls(arr.size, nz, arr[nz])

    @classmethod
    def from_pairs(cls, dim: int, pairs: Iterable[tuple[int, float]]) -> "SparseVector":
        """Build from (index, value) pairs, dropping explicit zeros."""
        pairs = [(int(i), float(v)) for i, v in pairs if float(v) != 0.0]
        if not pairs:
            return cls(dim, np.empty(0, np.int64), np.empty(0))
        idx, val = zip(*pairs)
        return cls(dim, np.array(idx), np.array(val))

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    def scaled(self, c: float) -> "SparseVector":
        return type(self)(self.dim, self.indices, self.values * c)

    def __neg__(self) -> "SparseVector":
        return type(self)(self.dim, self.indices, -self.values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparseVector):
            return NotImplemented
        return (
            type(self) is type(other)
            and self.dim == other.dim
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self) -> int:
        return hash((type(self).__name__, self.dim, self.indices.tobytes(), self.values.tobytes()))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim}, nnz={self.nnz})"


class TransformedVector(SparseVector):
    """Nonnegative ``2D``-dimensional vector; every stored value is > 0."""

    def __post_init__(self) -> None:
        super().__post_init__()
        if np.any(self.values <= 0.0):
            raise InvalidInputError("transformed vector values must be strictly positive")
        if self.dim % 2:
            raise InvalidInputError("transformed dimension must be even")
        if np.any(np.diff(self.indices // 2) == 0):
            raise InvalidInputError("both halves of an original coordinate are occupied")


def transform(u: SparseVector) -> TransformedVector:
    """Split signed ``u`` into interleaved positive/negative parts of length ``2 * u.dim``.

    Values are copied (or sign-flipped) without any other arithmetic, so the
    l1 mass is preserved exactly.
    """
    if isinstance(u, TransformedVector):
        raise InvalidInputError("vector is already transformed")
    neg = u.values < 0
    idx = 2 * u.indices + neg
    val = np.where(neg, -u.values, u.values)
    return TransformedVector(2 * u.dim, idx, val)


def untransform(v: TransformedVector) -> SparseVector:
    """Inverse of :func:`transform`."""
    neg = (v.indices % 2).astype(bool)
    return SparseVector(v.dim // 2, v.indices // 2, np.where(neg, -v.values, v.values))


def l1_mass(u: SparseVector) -> float:
    return float(np.sum(np.abs(u.values)))


def power(values: np.ndarray, gamma: float) -> np.ndarray:
    """Elementwise ``x ** gamma`` for positive ``x``, as ``exp(gamma * ln x)``.

    ``gamma == 1`` returns the input untouched so the unpowered kernels and
    their ``gamma = 1`` special cases share bit-identical arithmetic.
    """
    values = np.asarray(values, dtype=np.float64)
    if gamma == 1.0:
        return values
    return np.exp(gamma * np.log(values))


def powered(v: TransformedVector, gamma: float) -> TransformedVector:
    return TransformedVector(v.dim, v.indices, power(v.values, gamma))


@dataclass(frozen=True, eq=False)
class BinaryFeatureVector:
    """Sparse 0/1 vector of length ``k * 2**b`` holding exactly one 1 per block."""

    dim: int
    ones: np.ndarray

    def __post_init__(self) -> None:
        ones = np.array(self.ones, dtype=np.int64).reshape(-1)
        if ones.size and (np.any(np.diff(ones) <= 0) or ones[0] < 0 or ones[-1] >= self.dim):
            raise InvalidInputError("feature positions must be increasing and in range")
        object.__setattr__(self, "ones", _frozen(ones))

    @property
    def indices(self) -> np.ndarray:
        return self.ones

    @property
    def values(self) -> np.ndarray:
        return np.ones(self.ones.size)

    @property
    def nnz(self) -> int:
        return int(self.ones.size)

    def dot(self, other: "BinaryFeatureVector") -> int:
        return int(np.intersect1d(self.ones, other.ones, assume_unique=True).size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryFeatureVector):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self.ones, other.ones)

    def __hash__(self) -> int:
        return hash((self.dim, self.ones.tobytes()))


@dataclass
class Dataset:
    """Labeled rows sharing one dimensionality."""

    rows: list
    labels: np.ndarray
    dim: int
    row_ids: list = field(default=None)

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if len(self.rows) != self.labels.size:
            raise InvalidInputError(
                f"{len(self.rows)} rows but {self.labels.size} labels"
            )
        for n, row in enumerate(self.rows):
            if row.dim != self.dim:
                raise InvalidInputError(f"row {n} has dim {row.dim}, expected {self.dim}")
        if self.row_ids is None:
            self.row_ids = list(range(len(self.rows)))

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    def subset(self, which) -> "Dataset":
        which = list(which)
        return Dataset(
            [self.rows[i] for i in which],
            self.labels[which],
            self.dim,
            [self.row_ids[i] for i in which],
        )

    def widened(self, dim: int) -> "Dataset":
        """Same rows embedded in a space of ``dim >= self.dim`` coordinates."""
        if dim < self.dim:
            raise InvalidInputError(f"cannot narrow dim {self.dim} to {dim}")
        if dim == self.dim:
            return self
        rows = [
            BinaryFeatureVector(dim, r.ones)
            if isinstance(r, BinaryFeatureVector)
            else type(r)(dim, r.indices, r.values)
            for r in self.rows
        ]
        return Dataset(rows, self.labels, dim, list(self.row_ids))

    def transformed(self) -> "Dataset":
        return Dataset([transform(r) for r in self.rows], self.labels, 2 * self.dim, list(self.row_ids))

    def to_csr(self, dim: int | None = None) -> sp.csr_matrix:
        """Stack rows into a CSR matrix; ``dim`` may widen (never narrow) the column count."""
        dim = self.dim if dim is None else dim
        if dim < self.dim:
            raise InvalidInputError(f"cannot narrow dim {self.dim} to {dim}")
        indptr = np.zeros(len(self.rows) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([r.nnz for r in self.rows])
        if self.rows:
            indices = np.concatenate([r.indices for r in self.rows])
            data = np.concatenate([r.values for r in self.rows])
        else:
            indices, data = np.empty(0, np.int64), np.empty(0)
        return sp.csr_matrix((data, indices, indptr), shape=(len(self.rows), dim))
