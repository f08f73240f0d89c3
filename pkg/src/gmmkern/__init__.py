"""GMM-family kernels over signed data and GCWS hashing for linear learning."""

from .featurize import FeatureConfig, encode
from .gcws import HashConfig, HashSignature, estimate_collision, hash_one, signature, signatures
from .kernels import (
    GramMatrix,
    KernelKind,
    KernelSpec,
    UndefinedSimilarityError,
    cross_gram,
    egmm,
    epgmm,
    gmm,
    gram,
    linear,
    pgmm,
    rbf,
)
from .learn import TrainConfig, evaluate, train_linear
from .vectorspace import (
    BinaryFeatureVector,
    Dataset,
    InvalidInputError,
    SparseVector,
    TransformedVector,
    l1_mass,
    transform,
)

__version__ = "0.1.0"
