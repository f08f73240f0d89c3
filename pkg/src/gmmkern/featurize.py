"""b-bit truncation and one-hot expansion of hash signatures.

Sample ``j`` with sampled coordinate ``i*`` becomes a single 1 at position
``j * 2**b + (i* mod 2**b)``; the ``t*`` half of each sample is dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gcws import HashSignature
from .vectorspace import BinaryFeatureVector, Dataset, InvalidInputError

MAX_BITS = 24


@dataclass(frozen=True)
class FeatureConfig:
    b: int
    k: int

    def __post_init__(self) -> None:
        if not 1 <= self.b <= MAX_BITS:
            raise InvalidInputError(f"b must be in [1, {MAX_BITS}], got {self.b}")
        if self.k < 1:
            raise InvalidInputError(f"k must be positive, got {self.k}")

    @property
    def dim(self) -> int:
        return self.k << self.b


def encode(sig: HashSignature, fc: FeatureConfig) -> BinaryFeatureVector:
    if sig.k != fc.k:
        raise InvalidInputError(f"signature has k={sig.k}, feature config expects k={fc.k}")
    width = 1 << fc.b
    ones = np.arange(fc.k, dtype=np.int64) * width + (sig.istar & (width - 1))
    return BinaryFeatureVector(fc.dim, ones)


def encode_all(
    sigs: Sequence[HashSignature], labels, fc: FeatureConfig, row_ids=None
) -> Dataset:
    """Featurize a whole set of signatures into a linear-learning dataset."""
    rows = [encode(s, fc) for s in sigs]
    return Dataset(rows, labels, fc.dim, row_ids)
