import math

import numpy as np
import pytest
from scipy import stats

from gmmkern import gcws, kernels
from gmmkern.gcws import (
    CollisionMode,
    ConfigMismatchError,
    EmptyVectorError,
    HashConfig,
    hash_one,
    signature,
    signatures,
)
from gmmkern.streams import draw_randoms
from gmmkern.vectorspace import InvalidInputError, SparseVector, TransformedVector, powered, transform

from conftest import random_nonzero


def oracle_sample(v, gamma, seed, j):
    """Plain numpy consistent weighted sampling over the shared variates."""
    r, c, beta = draw_randoms(seed, j, v.indices)
    t = np.floor(gamma * np.log(v.values) / r + beta)
    a = np.log(c) - r * (t + 1 - beta)
    p = int(np.argmin(a))  # first minimum, i.e. lowest coordinate
    return int(v.indices[p]), int(t[p])


def tv(dim, pairs):
    return TransformedVector.from_pairs(dim, pairs)


def test_matches_numpy_oracle(rng):
    for _ in range(40):
        v = transform(random_nonzero(rng, dim=30, density=0.3))
        gamma = float(rng.choice([0.25, 1.0, 5.0]))
        cfg = HashConfig(gamma, 64, int(rng.integers(1 << 40)), v.dim)
        sig = signature(v, cfg)
        expect = [oracle_sample(v, gamma, cfg.seed, j) for j in range(cfg.k)]
        assert sig.samples == expect


def test_single_nonzero_always_sampled():
    v = tv(10, [(7, 3.0)])
    sig = signature(v, HashConfig(1.0, 200, 5, 10))
    assert set(sig.istar.tolist()) == {7}


def test_hash_one_agrees_with_signature(rng):
    v = transform(random_nonzero(rng))
    cfg = HashConfig(0.5, 50, 11, v.dim)
    sig = signature(v, cfg)
    for j in (0, 1, 17, 49):
        assert hash_one(v, cfg, j) == sig.samples[j]
    with pytest.raises(InvalidInputError):
        hash_one(v, cfg, 50)


def test_deterministic_across_calls_and_threads(rng):
    rows = [transform(random_nonzero(rng)) for _ in range(25)]
    cfg = HashConfig(1.0, 128, 3, rows[0].dim)
    one = signatures(rows, cfg, threads=1)
    four = signatures(rows, cfg, threads=4)
    again = signatures(rows, cfg, threads=1)
    assert [s.tobytes() for s in one] == [s.tobytes() for s in four] == [s.tobytes() for s in again]


def test_power_reduction_identity(rng):
    for _ in range(100):
        v = transform(random_nonzero(rng))
        gamma = float(rng.uniform(0.1, 8.0))
        j = int(rng.integers(0, 1000))
        seed = int(rng.integers(1 << 32))
        lhs = hash_one(v, HashConfig(gamma, 1000, seed, v.dim), j)
        rhs = hash_one(powered(v, gamma), HashConfig(1.0, 1000, seed, v.dim), j)
        assert lhs == rhs


def test_relabeling_keeps_coordinate_randomness():
    # adding a coordinate elsewhere never changes the variates at the others,
    # so a sample that picks a shared coordinate in both vectors has the same t
    base = tv(20, [(2, 1.0), (9, 2.5)])
    more = tv(20, [(2, 1.0), (9, 2.5), (15, 0.01)])
    cfg = HashConfig(1.0, 500, 8, 20)
    sa, sb = signature(base, cfg), signature(more, cfg)
    same = sa.istar == sb.istar
    assert same.mean() > 0.9
    assert np.array_equal(sa.tstar[same], sb.tstar[same])


def test_k_equals_one():
    v = tv(4, [(0, 1.0), (3, 2.0)])
    sig = signature(v, HashConfig(1.0, 1, 0, 4))
    assert sig.k == 1 and sig.samples[0] == hash_one(v, HashConfig(1.0, 1, 0, 4), 0)


def test_collision_examples():
    cfg = HashConfig(1.0, 500, 1, 8)
    a = tv(8, [(0, 1.0), (2, 3.0)])
    b = tv(8, [(4, 1.0), (6, 3.0)])
    sa, sb = signature(a, cfg), signature(b, cfg)
    assert gcws.estimate_collision(sa, sb) == 0.0
    assert gcws.estimate_collision(sa, sa) == 1.0
    assert gcws.collisions(sa, sa, "index_only") == 500


def test_binomial_concentration(rng):
    k = 10_000
    a = transform(random_nonzero(rng, dim=40, density=0.4))
    b = transform(random_nonzero(rng, dim=40, density=0.4))
    # share support so the similarity is not tiny
    b = TransformedVector(a.dim, a.indices, a.values * rng.uniform(0.5, 1.5, a.nnz))
    cfg = HashConfig(1.0, k, 77, a.dim)
    p = kernels.gmm(a, b)
    est = gcws.estimate_collision(signature(a, cfg), signature(b, cfg))
    assert abs(est - p) <= 3 * math.sqrt(p * (1 - p) / k)


def test_unbiased_over_seeds(rng):
    a = transform(SparseVector.from_dense(rng.normal(size=15)))
    b = transform(SparseVector.from_dense(rng.normal(size=15)))
    for gamma in (0.5, 2.0):
        p = kernels.pgmm(a, b, gamma)
        k, seeds = 10_000, 5
        est = np.mean(
            [
                gcws.estimate_collision(
                    signature(a, HashConfig(gamma, k, s, a.dim)), signature(b, HashConfig(gamma, k, s, a.dim))
                )
                for s in range(seeds)
            ]
        )
        assert abs(est - p) <= 4 * math.sqrt(p * (1 - p) / (k * seeds))


def test_sampling_distribution_and_scale_covariance():
    # istar is drawn with probability w_i ** gamma / sum(w ** gamma), and
    # scaling v by 2 leaves that distribution untouched
    v = tv(10, [(1, 0.5), (4, 1.0), (6, 2.0), (9, 4.0)])
    gamma = 1.5
    k = 10_000
    w = v.values**gamma
    expect = w / w.sum() * k

    def counts(vec):
        sig = signature(vec, HashConfig(gamma, k, 2024, 10))
        return np.array([np.count_nonzero(sig.istar == i) for i in v.indices])

    c1, c2 = counts(v), counts(v.scaled(2.0))
    assert stats.chisquare(c1, expect).pvalue > 0.01
    assert stats.chisquare(c2, expect).pvalue > 0.01
    table = np.vstack([c1, c2])
    assert stats.chi2_contingency(table).pvalue > 0.01


def test_index_only_dominates_full(rng):
    for _ in range(10):
        a, b = transform(random_nonzero(rng)), transform(random_nonzero(rng))
        cfg = HashConfig(2.0, 300, 4, a.dim)
        sa, sb = signature(a, cfg), signature(b, cfg)
        assert gcws.collisions(sa, sb, CollisionMode.INDEX_ONLY) >= gcws.collisions(sa, sb, CollisionMode.FULL)


def test_config_mismatch():
    v = tv(4, [(0, 1.0)])
    s1 = signature(v, HashConfig(1.0, 10, 0, 4))
    s2 = signature(v, HashConfig(1.0, 10, 1, 4))
    with pytest.raises(ConfigMismatchError):
        gcws.collisions(s1, s2)
    assert HashConfig(1.0, 10, 0, 4).digest != HashConfig(1.0, 10, 1, 4).digest
    assert HashConfig(1.0, 10, 0, 4).digest == HashConfig(1, 10, 0, 4).digest


def test_empty_and_bad_inputs():
    with pytest.raises(EmptyVectorError):
        signature(tv(4, []), HashConfig(1.0, 5, 0, 4))
    with pytest.raises(InvalidInputError):
        signature(tv(4, [(1, 1.0)]), HashConfig(1.0, 5, 0, 6))
    for bad in (dict(gamma=0.0), dict(gamma=-1.0), dict(k=0), dict(seed=-1), dict(dim=0)):
        args = dict(gamma=1.0, k=5, seed=0, dim=4) | bad
        with pytest.raises(InvalidInputError):
            HashConfig(**args)


def test_index_bits():
    assert HashConfig(1.0, 1, 0, 2).index_bits == 1
    assert HashConfig(1.0, 1, 0, 200).index_bits == 8
    assert HashConfig(1.0, 1, 0, 256).index_bits == 8
    assert HashConfig(1.0, 1, 0, 257).index_bits == 9
