"""Exact kernel evaluation: cosine/RBF baselines and the GMM family.

All min-max kernels go through :func:`minmax_ratio`, so ``pgmm(a, b, 1)`` is
the same computation as ``gmm(a, b)`` and ``epgmm(a, b, 1, g)`` the same as
``egmm(a, b, g)``.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .vectorspace import (
    Dataset,
    InvalidInputError,
    SparseVector,
    TransformedVector,
    power,
    transform,
)


class UndefinedSimilarityError(ValueError):
    """The kernel is 0/0 for this pair (e.g. two empty vectors)."""


class KernelKind(str, enum.Enum):
    LINEAR = "linear"
    RBF = "rbf"
    GMM = "gmm"
    EGMM = "egmm"
    PGMM = "pgmm"
    EPGMM = "epgmm"

    @property
    def minmax(self) -> bool:
        return self in (KernelKind.GMM, KernelKind.EGMM, KernelKind.PGMM, KernelKind.EPGMM)

    @property
    def exponentiated(self) -> bool:
        return self in (KernelKind.RBF, KernelKind.EGMM, KernelKind.EPGMM)


@dataclass(frozen=True)
class KernelSpec:
    """A kernel and its tuning parameters.

    ``gamma1`` is the only parameter of RBF, eGMM and pGMM, and the power of
    epGMM; ``gamma2`` is the outer exponent of epGMM.
    """

    kind: KernelKind
    gamma1: float | None = None
    gamma2: float | None = None

    def __post_init__(self) -> None:
        kind = KernelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        needs1 = kind in (KernelKind.RBF, KernelKind.EGMM, KernelKind.PGMM, KernelKind.EPGMM)
        for name, needed in (("gamma1", needs1), ("gamma2", kind is KernelKind.EPGMM)):
            value = getattr(self, name)
            if needed:
                if value is None or not (float(value) > 0 and math.isfinite(value)):
                    raise InvalidInputError(f"{kind.value} requires positive {name}, got {value}")
                object.__setattr__(self, name, float(value))
            elif value is not None:
                raise InvalidInputError(f"{kind.value} takes no {name}")

    @property
    def power(self) -> float:
        """Exponent applied to min/max before summing (1 for GMM and eGMM)."""
        return self.gamma1 if self.kind in (KernelKind.PGMM, KernelKind.EPGMM) else 1.0

    @property
    def outer(self) -> float | None:
        """Exponent of ``exp(-outer * (1 - s))``, or None when not exponentiated."""
        return {
            KernelKind.RBF: self.gamma1,
            KernelKind.EGMM: self.gamma1,
            KernelKind.EPGMM: self.gamma2,
        }.get(self.kind)

    def label(self) -> str:
        parts = [self.kind.value]
        if self.gamma1 is not None:
            parts.append(f"g1={self.gamma1:g}")
        if self.gamma2 is not None:
            parts.append(f"g2={self.gamma2:g}")
        return ",".join(parts)


def _check_dims(a: SparseVector, b: SparseVector) -> None:
    if a.dim != b.dim:
        raise InvalidInputError(f"dimension mismatch: {a.dim} vs {b.dim}")


def minmax_ratio(a: TransformedVector, b: TransformedVector, gamma: float = 1.0) -> float:
    """``sum(min(a, b) ** gamma) / sum(max(a, b) ** gamma)`` over sparse supports."""
    _check_dims(a, b)
    if a.nnz == 0 and b.nnz == 0:
        raise UndefinedSimilarityError("min-max similarity of two empty vectors is 0/0")
    _, ia, ib = np.intersect1d(a.indices, b.indices, assume_unique=True, return_indices=True)
    va, vb = a.values[ia], b.values[ib]
    a_only = np.ones(a.nnz, dtype=bool)
    a_only[ia] = False
    b_only = np.ones(b.nnz, dtype=bool)
    b_only[ib] = False
    num = np.sum(power(np.minimum(va, vb), gamma))
    den = (
        np.sum(power(a.values[a_only], gamma))
        + np.sum(power(b.values[b_only], gamma))
        + np.sum(power(np.maximum(va, vb), gamma))
    )
    return float(num / den)


def gmm(a: TransformedVector, b: TransformedVector) -> float:
    return minmax_ratio(a, b, 1.0)


def pgmm(a: TransformedVector, b: TransformedVector, gamma: float) -> float:
    _positive(gamma, "gamma")
    return minmax_ratio(a, b, gamma)


def egmm(a: TransformedVector, b: TransformedVector, gamma: float) -> float:
    _positive(gamma, "gamma")
    return math.exp(-gamma * (1.0 - minmax_ratio(a, b, 1.0)))


def epgmm(a: TransformedVector, b: TransformedVector, gamma1: float, gamma2: float) -> float:
    _positive(gamma1, "gamma1")
    _positive(gamma2, "gamma2")
    return math.exp(-gamma2 * (1.0 - minmax_ratio(a, b, gamma1)))


def cosine(u: SparseVector, v: SparseVector) -> float:
    _check_dims(u, v)
    nu = float(np.dot(u.values, u.values))
    nv = float(np.dot(v.values, v.values))
    if nu == 0.0 or nv == 0.0:
        raise UndefinedSimilarityError("cosine similarity undefined for a zero vector")
    _, iu, iv = np.intersect1d(u.indices, v.indices, assume_unique=True, return_indices=True)
    dot = float(np.dot(u.values[iu], v.values[iv]))
    return min(1.0, max(-1.0, dot / math.sqrt(nu * nv)))


def linear(u: SparseVector, v: SparseVector) -> float:
    """Cosine similarity; the linear baseline works on normalized inner products."""
    return cosine(u, v)


def rbf(u: SparseVector, v: SparseVector, gamma: float) -> float:
    _positive(gamma, "gamma")
    return math.exp(-gamma * (1.0 - cosine(u, v)))


def _positive(x: float, name: str) -> None:
    if not (x > 0 and math.isfinite(x)):
        raise InvalidInputError(f"{name} must be positive and finite, got {x}")


def evaluate(u: SparseVector, v: SparseVector, spec: KernelSpec) -> float:
    """Kernel value between two signed (untransformed) vectors."""
    if spec.kind is KernelKind.LINEAR:
        return linear(u, v)
    if spec.kind is KernelKind.RBF:
        return rbf(u, v, spec.gamma1)
    s = minmax_ratio(transform(u), transform(v), spec.power)
    if spec.outer is None:
        return s
    return math.exp(-spec.outer * (1.0 - s))


@dataclass
class GramMatrix:
    """Symmetric kernel matrix over the rows of one dataset."""

    values: np.ndarray
    row_ids: list
    spec: KernelSpec

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def check(self, atol: float = 1e-12) -> None:
        """Raise if symmetry, range or the unit diagonal is violated."""
        k = self.values
        if k.shape != (len(self.row_ids), len(self.row_ids)):
            raise InvalidInputError("gram matrix shape does not match row ids")
        if not np.array_equal(k, k.T):
            raise InvalidInputError("gram matrix is not symmetric")
        lo = {
            KernelKind.LINEAR: -1.0,
            KernelKind.RBF: math.exp(-2.0 * (self.spec.outer or 0.0)),
            KernelKind.EGMM: math.exp(-(self.spec.outer or 0.0)),
            KernelKind.EPGMM: math.exp(-(self.spec.outer or 0.0)),
        }.get(self.spec.kind, 0.0)
        if np.any(k < lo - atol) or np.any(k > 1.0 + atol):
            raise InvalidInputError(f"gram values outside [{lo}, 1]")
        if np.any(np.diag(k) != 1.0):
            raise InvalidInputError("gram diagonal is not exactly 1")


def _apply_outer(s: np.ndarray, spec: KernelSpec) -> np.ndarray:
    if spec.outer is None:
        return s
    return np.exp(-spec.outer * (1.0 - s))


class _MinMaxBlock:
    """Min-max sums of arbitrary query rows against a fixed set of rows."""

    def __init__(self, against: sp.csr_matrix, gamma: float) -> None:
        self.gamma = gamma
        self.csc = against.tocsc()
        powered = against.copy()
        powered.data = power(powered.data, gamma)
        self.row_mass = np.asarray(powered.sum(axis=1)).ravel()

    def ratios(self, q: TransformedVector) -> np.ndarray:
        m = self.csc[:, q.indices].toarray()
        present = m > 0
        lo = np.minimum(m, q.values)
        num_terms = np.zeros_like(m)
        num_terms[present] = power(lo[present], self.gamma)
        pm = np.zeros_like(m)
        pm[present] = power(m[present], self.gamma)
        # mass of each target row on coordinates outside the query support
        outside = np.maximum(self.row_mass - pm.sum(axis=1), 0.0)
        den = power(np.maximum(m, q.values), self.gamma).sum(axis=1) + outside
        return num_terms.sum(axis=1) / den


def _cosine_rows(against: sp.csr_matrix, q: SparseVector) -> np.ndarray:
    qv = sp.csr_matrix((q.values, q.indices, [0, q.nnz]), shape=(1, q.dim))
    dots = np.asarray((against @ qv.T).todense()).ravel()
    norms = np.asarray(against.multiply(against).sum(axis=1)).ravel()
    nq = float(np.dot(q.values, q.values))
    return np.clip(dots / np.sqrt(norms * nq), -1.0, 1.0)


def _rows_against(
    queries: Sequence[SparseVector],
    against: Dataset,
    spec: KernelSpec,
    threads: int,
    query_offset: int | None,
) -> np.ndarray:
    """Kernel values of each query (signed) row vs every row of ``against``."""
    if spec.kind.minmax:
        targets = against.transformed()
        block = _MinMaxBlock(targets.to_csr(), spec.power)
        tq = [transform(q) for q in queries]
        empty = [j for j, r in enumerate(targets.rows) if r.nnz == 0]

        def one(i: int) -> np.ndarray:
            if tq[i].nnz == 0 and empty:
                raise UndefinedSimilarityError(
                    f"rows {_rid(i, query_offset)} and {empty[0]} are both empty"
                )
            return _apply_outer(block.ratios(tq[i]), spec)

    else:
        mat = against.to_csr()
        zero = [j for j, r in enumerate(against.rows) if r.nnz == 0]
        if zero:
            raise UndefinedSimilarityError(f"row {zero[0]} is a zero vector; cosine undefined")

        def one(i: int) -> np.ndarray:
            if queries[i].nnz == 0:
                raise UndefinedSimilarityError(
                    f"row {_rid(i, query_offset)} is a zero vector; cosine undefined"
                )
            c = _cosine_rows(mat, queries[i])
            return c if spec.kind is KernelKind.LINEAR else _apply_outer(c, spec)

    out = np.empty((len(queries), len(against)))
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        for i, row in enumerate(pool.map(one, range(len(queries)))):
            out[i] = row
    return out


def _rid(i: int, offset: int | None) -> str:
    return str(i if offset is None else i + offset)


def gram(data: Dataset, spec: KernelSpec, threads: int = 1) -> GramMatrix:
    """Exact symmetric kernel matrix of ``data`` under ``spec``.

    Rows are computed independently (optionally on ``threads`` workers); the
    upper triangle is mirrored so the result is exactly symmetric and the
    diagonal is evaluated with the scalar routine.
    """
    n = len(data)
    full = _rows_against(data.rows, data, spec, threads, query_offset=0)
    upper = np.triu(full, 1)
    values = upper + upper.T
    for i, row in enumerate(data.rows):
        try:
            values[i, i] = evaluate(row, row, spec)
        except UndefinedSimilarityError as exc:
            raise UndefinedSimilarityError(f"row {i}: {exc}") from exc
    g = GramMatrix(values, list(data.row_ids), spec)
    if n:
        g.check()
    return g


def cross_gram(queries: Dataset, against: Dataset, spec: KernelSpec, threads: int = 1) -> np.ndarray:
    """Rectangular kernel matrix: ``queries`` rows vs ``against`` rows (e.g. test vs train)."""
    if queries.dim != against.dim:
        raise InvalidInputError(f"dimension mismatch: {queries.dim} vs {against.dim}")
    return _rows_against(queries.rows, against, spec, threads, query_offset=0)


def from_pgmm(pgmm_gram: np.ndarray, gamma2: float) -> np.ndarray:
    """epGMM values from precomputed pGMM values (reuse of cached power kernels)."""
    return np.exp(-gamma2 * (1.0 - pgmm_gram))
