"""Generalized consistent weighted sampling for the powered min-max kernel.

For a nonnegative vector ``v`` and tuning exponent ``gamma``, sample ``j``
draws, for every stored coordinate ``i``::

    t_i = floor(gamma * ln(v_i) / r_i + beta_i)
    a_i = ln(c_i) - r_i * (t_i + 1 - beta_i)

and returns ``(argmin_i a_i, t at the argmin)``.  With ``r, c ~ Gamma(2, 1)``
and ``beta ~ U[0, 1)`` shared across vectors (see :mod:`gmmkern.streams`),
two vectors collide on the full pair with probability ``pgmm(u, v, gamma)``.
"""

from __future__ import annotations

import enum
import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numba
import numpy as np

from . import streams
from .vectorspace import InvalidInputError, TransformedVector


class EmptyVectorError(ValueError):
    """A vector with no positive coordinate cannot be hashed."""


class ConfigMismatchError(ValueError):
    """Two signatures were produced under different hash configurations."""


@dataclass(frozen=True)
class HashConfig:
    gamma: float
    k: int
    seed: int
    dim: int

    def __post_init__(self) -> None:
        if not (self.gamma > 0 and np.isfinite(self.gamma)):
            raise InvalidInputError(f"gamma must be positive, got {self.gamma}")
        if not 1 <= self.k <= streams.MAX_SAMPLES:
            raise InvalidInputError(f"k must be in [1, {streams.MAX_SAMPLES}], got {self.k}")
        if not 0 <= self.seed < 1 << 64:
            raise InvalidInputError("seed must be an unsigned 64-bit integer")
        if not 1 <= self.dim <= streams.MAX_COORD:
            raise InvalidInputError(f"dim must be in [1, {streams.MAX_COORD}], got {self.dim}")
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def digest(self) -> str:
        """Short stable identifier of the configuration."""
        text = f"gcws-v1 gamma={self.gamma!r} k={self.k} seed={self.seed} dim={self.dim}"
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    @property
    def index_bits(self) -> int:
        """Bits needed to store any sampled coordinate, ``ceil(log2(dim))``."""
        return max(1, (self.dim - 1).bit_length())


class HashSample(NamedTuple):
    istar: int
    tstar: int


@dataclass(frozen=True, eq=False)
class HashSignature:
    config_digest: str
    istar: np.ndarray
    tstar: np.ndarray

    def __post_init__(self) -> None:
        istar = np.array(self.istar, dtype=np.int64).reshape(-1)
        tstar = np.array(self.tstar, dtype=np.int64).reshape(-1)
        if istar.shape != tstar.shape:
            raise InvalidInputError("istar and tstar lengths differ")
        istar.setflags(write=False)
        tstar.setflags(write=False)
        object.__setattr__(self, "istar", istar)
        object.__setattr__(self, "tstar", tstar)

    @property
    def k(self) -> int:
        return int(self.istar.size)

    @property
    def samples(self) -> list[HashSample]:
        return [HashSample(int(i), int(t)) for i, t in zip(self.istar, self.tstar)]

    def tobytes(self) -> bytes:
        return self.config_digest.encode() + self.istar.tobytes() + self.tstar.tobytes()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HashSignature):
            return NotImplemented
        return (
            self.config_digest == other.config_digest
            and np.array_equal(self.istar, other.istar)
            and np.array_equal(self.tstar, other.tstar)
        )

    def __hash__(self) -> int:
        return hash(self.tobytes())


@numba.njit(cache=True, nogil=True)
def _sample_block(indices, log_weights, key, j0, istar, tstar):
    """Fill ``istar``/``tstar`` for samples ``j0 .. j0 + len(istar) - 1``."""
    m = indices.size
    for n in range(istar.size):
        j = j0 + n
        best_a = np.inf
        best_p = 0
        best_t = 0.0
        for p in range(m):
            r, c, beta = streams.triple(key, j, indices[p])
            t = np.floor(log_weights[p] / r + beta)
            a = np.log(c) - r * (t + 1.0 - beta)
            # strict "<" keeps the first minimum: ties go to the lowest coordinate
            if a < best_a:
                best_a, best_p, best_t = a, p, t
        istar[n] = indices[best_p]
        tstar[n] = np.int64(best_t)


def _log_weights(v: TransformedVector, config: HashConfig) -> np.ndarray:
    if v.dim != config.dim:
        raise InvalidInputError(f"vector dim {v.dim} does not match config dim {config.dim}")
    if v.nnz == 0:
        raise EmptyVectorError("cannot hash an empty vector")
    return config.gamma * np.log(v.values)


def hash_one(v: TransformedVector, config: HashConfig, j: int) -> HashSample:
    """Sample ``j`` of the signature of ``v``."""
    if not 0 <= j < config.k:
        raise InvalidInputError(f"sample index {j} outside [0, {config.k})")
    lw = _log_weights(v, config)
    istar = np.empty(1, dtype=np.int64)
    tstar = np.empty(1, dtype=np.int64)
    _sample_block(v.indices, lw, streams.key_of(config.seed), j, istar, tstar)
    return HashSample(int(istar[0]), int(tstar[0]))


def signature(v: TransformedVector, config: HashConfig) -> HashSignature:
    """All ``k`` samples of ``v``; sample ``j`` uses random stream ``j``."""
    lw = _log_weights(v, config)
    istar = np.empty(config.k, dtype=np.int64)
    tstar = np.empty(config.k, dtype=np.int64)
    _sample_block(v.indices, lw, streams.key_of(config.seed), 0, istar, tstar)
    return HashSignature(config.digest, istar, tstar)


def signatures(
    rows: Sequence[TransformedVector], config: HashConfig, threads: int = 1
) -> list[HashSignature]:
    """Signatures of many rows; output does not depend on ``threads``."""
    if threads <= 1:
        return [signature(v, config) for v in rows]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda v: signature(v, config), rows))


class CollisionMode(str, enum.Enum):
    FULL = "full"
    INDEX_ONLY = "index_only"


def collisions(sa: HashSignature, sb: HashSignature, mode: CollisionMode | str = "full") -> int:
    """Number of samples on which the two signatures agree."""
    mode = CollisionMode(mode)
    if sa.config_digest != sb.config_digest:
        raise ConfigMismatchError(f"signature configs differ: {sa.config_digest} vs {sb.config_digest}")
    if sa.k != sb.k:
        raise ConfigMismatchError(f"signature lengths differ: {sa.k} vs {sb.k}")
    same = sa.istar == sb.istar
    if mode is CollisionMode.FULL:
        same &= sa.tstar == sb.tstar
    return int(np.count_nonzero(same))


def estimate_collision(sa: HashSignature, sb: HashSignature, mode: CollisionMode | str = "full") -> float:
    """Fraction of matching samples: an estimate of ``pgmm`` (exact-probability in full mode)."""
    return collisions(sa, sb, mode) / sa.k
