"""Counter-based random variates keyed by (seed, sample index, coordinate).

Every variate is a pure function of its key, so any vector hashed under the
same seed sees identical randomness at coordinate ``i`` of sample ``j``,
regardless of which other coordinates, rows or threads are involved.  The
generator is SplitMix64 evaluated at an explicit counter: the 64-bit state
for counter ``n`` is ``key + n * 0x9E3779B97F4A7C15`` followed by the
SplitMix64 finalizer.

The scalar primitives are numba-compiled and shared by :func:`draw_randoms`
and the hashing loop in :mod:`gmmkern.gcws`, so both see the same numbers.
"""

from __future__ import annotations

import numba
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S12 = np.uint64(12)
_S11 = np.uint64(11)
_ONE = np.uint64(1)

# bit layout of the counter: sample index (29) | stream (3) | coordinate (32)
COORD_BITS = 32
STREAM_BITS = 3
SAMPLE_BITS = 29
MAX_COORD = 1 << COORD_BITS
MAX_SAMPLES = 1 << SAMPLE_BITS
_SAMPLE_SHIFT = np.uint64(COORD_BITS + STREAM_BITS)
_STREAM_SHIFT = np.uint64(COORD_BITS)

STREAM_R = (0, 1)
STREAM_C = (2, 3)
STREAM_BETA = 4

_INV52 = 1.0 / (1 << 52)
_INV53 = 1.0 / (1 << 53)


@numba.njit(cache=True, inline="always")
def mix64(z):
    # uint64 arithmetic wraps modulo 2**64 by design
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@numba.njit(cache=True)
def seed_key(seed):
    """Scramble a master seed into a 64-bit stream key."""
    return mix64(np.uint64(seed) + _GOLDEN)


@numba.njit(cache=True, inline="always")
def raw_bits(key, j, i, stream):
    counter = (
        (np.uint64(j) << _SAMPLE_SHIFT) | (np.uint64(stream) << _STREAM_SHIFT) | np.uint64(i)
    )
    return mix64(np.uint64(key) + (counter + _ONE) * _GOLDEN)


@numba.njit(cache=True, inline="always")
def open_uniform(key, j, i, stream):
    """Uniform on (0, 1) as ``(m + 0.5) / 2**52``; exact in a double, so no endpoint occurs."""
    m = raw_bits(key, j, i, stream) >> _S12
    return (np.float64(m) + 0.5) * _INV52


@numba.njit(cache=True, inline="always")
def uniform(key, j, i, stream):
    """Uniform on [0, 1) with 53 bits of resolution."""
    m = raw_bits(key, j, i, stream) >> _S11
    return np.float64(m) * _INV53


@numba.njit(cache=True, inline="always")
def gamma2(key, j, i, s0, s1):
    """Gamma(2, 1) as the sum of two unit exponentials."""
    return -np.log(open_uniform(key, j, i, s0)) - np.log(open_uniform(key, j, i, s1))


@numba.njit(cache=True, inline="always")
def triple(key, j, i):
    r = gamma2(key, j, i, 0, 1)
    c = gamma2(key, j, i, 2, 3)
    beta = uniform(key, j, i, 4)
    return r, c, beta


@numba.njit(cache=True, nogil=True)
def _triples(key, js, is_, r, c, beta):
    for n in range(js.size):
        r[n], c[n], beta[n] = triple(key, js[n], is_[n])


def draw_randoms(seed: int, j, i) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The (r, c, beta) triple used by consistent weighted sampling at (j, i).

    ``r`` and ``c`` are Gamma(2, 1) and strictly positive; ``beta`` is uniform
    on [0, 1).  ``j`` and ``i`` broadcast against each other.
    """
    j, i = np.broadcast_arrays(np.asarray(j, dtype=np.int64), np.asarray(i, dtype=np.int64))
    _check_ranges(j, i)
    shape = j.shape
    js = np.ascontiguousarray(j).ravel().astype(np.uint64)
    is_ = np.ascontiguousarray(i).ravel().astype(np.uint64)
    r, c, beta = (np.empty(js.size) for _ in range(3))
    _triples(key_of(seed), js, is_, r, c, beta)
    return r.reshape(shape), c.reshape(shape), beta.reshape(shape)


def key_of(seed: int) -> np.uint64:
    if not 0 <= int(seed) < 1 << 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return np.uint64(seed_key(np.uint64(int(seed))))


def _check_ranges(j: np.ndarray, i: np.ndarray) -> None:
    if j.size and (j.min() < 0 or j.max() >= MAX_SAMPLES):
        raise ValueError(f"sample index out of range [0, {MAX_SAMPLES})")
    if i.size and (i.min() < 0 or i.max() >= MAX_COORD):
        raise ValueError(f"coordinate out of range [0, {MAX_COORD})")
