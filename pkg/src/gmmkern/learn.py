"""L2-regularized linear SVM trained by dual coordinate descent.

Binary problems train one weight vector; more classes use one-vs-rest.  The
solver is the standard dual method for the hinge loss: each step minimizes
the dual exactly in one coordinate, so the dual objective never increases.
A constant bias feature is appended (and regularized) unless ``bias=0``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
import scipy.sparse as sp

from .vectorspace import Dataset, InvalidInputError

log = logging.getLogger(__name__)


class SingleClassError(ValueError):
    """Training data must contain at least two classes."""


@dataclass(frozen=True)
class TrainConfig:
    C: float = 1.0
    max_iters: int = 1000
    tol: float = 0.1
    bias: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.C > 0:
            raise InvalidInputError(f"C must be positive, got {self.C}")
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be at least 1")
        if not self.tol > 0:
            raise InvalidInputError("tol must be positive")
        if self.bias < 0:
            raise InvalidInputError("bias must be nonnegative")


@dataclass
class LinearModel:
    classes: np.ndarray
    weights: np.ndarray  # (n_vectors, dim)
    intercepts: np.ndarray  # (n_vectors,)
    dim: int
    config: TrainConfig
    objectives: list = field(default_factory=list)  # dual objective per epoch, per vector

    def decision_function(self, data: Dataset) -> np.ndarray:
        if data.dim != self.dim:
            raise InvalidInputError(f"data dim {data.dim} does not match model dim {self.dim}")
        return data.to_csr() @ self.weights.T + self.intercepts

    def predict(self, data: Dataset) -> np.ndarray:
        scores = self.decision_function(data)
        if len(self.classes) == 2:
            return np.where(scores[:, 0] > 0, self.classes[1], self.classes[0])
        # argmax keeps the first maximum, i.e. the lowest class id on ties
        return self.classes[np.argmax(scores, axis=1)]

    def to_json(self) -> dict:
        return {
            "classes": self.classes.tolist(),
            "dim": self.dim,
            "config": self.config.__dict__,
            "intercepts": self.intercepts.tolist(),
            "weights": [
                {"indices": np.flatnonzero(w).tolist(), "values": w[w != 0].tolist()}
                for w in self.weights
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LinearModel":
        dim = int(obj["dim"])
        weights = np.zeros((len(obj["weights"]), dim))
        for w, sparse_w in zip(weights, obj["weights"]):
            w[sparse_w["indices"]] = sparse_w["values"]
        return cls(
            np.asarray(obj["classes"], dtype=np.int64),
            weights,
            np.asarray(obj["intercepts"], dtype=np.float64),
            dim,
            TrainConfig(**obj["config"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "LinearModel":
        return cls.from_json(json.loads(Path(path).read_text()))


@numba.njit(cache=True, nogil=True)
def _dcd_epoch(indptr, indices, data, y, C, qdiag, alpha, w, order):
    """One pass of exact coordinate minimization; returns (max, min) projected gradient."""
    pg_max = -np.inf
    pg_min = np.inf
    for i in order:
        lo, hi = indptr[i], indptr[i + 1]
        g = 0.0
        for p in range(lo, hi):
            g += w[indices[p]] * data[p]
        g = y[i] * g - 1.0
        a = alpha[i]
        if a == 0.0:
            pg = min(g, 0.0)
        elif a == C:
            pg = max(g, 0.0)
        else:
            pg = g
        pg_max = max(pg_max, pg)
        pg_min = min(pg_min, pg)
        if pg != 0.0 and qdiag[i] > 0.0:
            new = min(max(a - g / qdiag[i], 0.0), C)
            d = (new - a) * y[i]
            alpha[i] = new
            for p in range(lo, hi):
                w[indices[p]] += d * data[p]
    return pg_max, pg_min


def _train_binary(x: sp.csr_matrix, y: np.ndarray, cfg: TrainConfig, seed) -> tuple[np.ndarray, list]:
    n = x.shape[0]
    qdiag = np.asarray(x.multiply(x).sum(axis=1)).ravel()
    alpha = np.zeros(n)
    w = np.zeros(x.shape[1])
    rng = np.random.default_rng(seed)
    indptr = x.indptr.astype(np.int64)
    indices = x.indices.astype(np.int64)
    objectives = []
    for epoch in range(cfg.max_iters):
        order = rng.permutation(n)
        pg_max, pg_min = _dcd_epoch(indptr, indices, x.data, y, cfg.C, qdiag, alpha, w, order)
        objectives.append(0.5 * float(w @ w) - float(alpha.sum()))
        if pg_max - pg_min < cfg.tol:
            break
    else:
        log.warning("dual coordinate descent hit max_iters=%d without reaching tol", cfg.max_iters)
    return w, objectives


def _design(data: Dataset, bias: float) -> sp.csr_matrix:
    x = data.to_csr().astype(np.float64)
    if bias > 0:
        x = sp.hstack([x, sp.csr_matrix(np.full((x.shape[0], 1), bias))], format="csr")
    x.sort_indices()
    return x


def train_linear(data: Dataset, cfg: TrainConfig = TrainConfig()) -> LinearModel:
    """Fit a (one-vs-rest) linear SVM minimizing ``0.5 |w|^2 + C * sum(hinge)``."""
    classes = data.classes
    if classes.size < 2:
        raise SingleClassError(f"need at least 2 classes, got {classes.tolist()}")
    x = _design(data, cfg.bias)
    if not np.all(np.isfinite(x.data)):
        raise InvalidInputError("non-finite feature value")
    targets = [classes[1]] if classes.size == 2 else list(classes)
    weights, intercepts, objectives = [], [], []
    for n, cls in enumerate(targets):
        y = np.where(data.labels == cls, 1.0, -1.0)
        w, obj = _train_binary(x, y, cfg, (cfg.seed, n))
        if cfg.bias > 0:
            weights.append(w[:-1])
            intercepts.append(w[-1] * cfg.bias)
        else:
            weights.append(w)
            intercepts.append(0.0)
        objectives.append(obj)
    return LinearModel(classes, np.array(weights), np.array(intercepts), data.dim, cfg, objectives)


def evaluate(model: LinearModel, data: Dataset) -> float:
    """Fraction of rows whose predicted label matches."""
    if len(data) == 0:
        raise InvalidInputError("cannot evaluate on an empty dataset")
    return float(np.mean(model.predict(data) == data.labels))


def empty_model(classes, dim: int) -> LinearModel:
    """All-zero weights; predicts the lowest class everywhere."""
    classes = np.asarray(sorted(classes), dtype=np.int64)
    nvec = 1 if classes.size == 2 else classes.size
    return LinearModel(classes, np.zeros((nvec, dim)), np.zeros(nvec), dim, TrainConfig())
