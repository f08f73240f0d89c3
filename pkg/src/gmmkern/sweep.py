"""Resumable (gamma, C) grid sweeps over kernel and hashed pipelines.

Three pipelines share one results table:

* ``kernel``: exact Gram matrices (train x train, test x train) fed to a
  precomputed-kernel SVM (scikit-learn's libsvm binding);
* ``hashed``: GCWS signatures -> b-bit one-hot features -> internal linear SVM;
* ``raw``: the internal linear SVM on the original features.

Every finished cell is appended to the CSV at once; rerunning with the same
output file skips cells already present.  When the sweep ends the file is
rewritten in grid order, so its content does not depend on thread timing.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from sklearn.svm import SVC

from . import featurize, gcws, kernels
from .kernels import KernelKind, KernelSpec
from .learn import TrainConfig, evaluate, train_linear
from .vectorspace import Dataset, InvalidInputError

log = logging.getLogger(__name__)

CSV_HEADER = ["kernel", "gamma1", "gamma2", "C", "accuracy", "seconds"]
CACHE_ENV = "GMMKERN_CACHE_DIR"


def _matlab_range(start: float, step: float, stop: float) -> list[float]:
    n = int(round((stop - start) / step))
    return [round(start + i * step, 10) for i in range(n + 1)]


GAMMA_PRESETS: dict[str, list[float]] = {
    "rbf58": (
        [0.001, 0.01]
        + _matlab_range(0.1, 0.1, 2)
        + [2.5]
        + _matlab_range(3, 1, 20)
        + _matlab_range(25, 5, 50)
        + _matlab_range(60, 10, 100)
        + [120, 150, 200, 300, 500, 1000]
    ),
    "pgmm27": (
        [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.75, 1, 1.25, 1.5, 2]
        + [5, 10, 15, 20, 25]
        + _matlab_range(30, 10, 100)
    ),
}

DEFAULT_CS = [0.01, 0.1, 1.0, 10.0, 100.0, 1000.0]


@dataclass(frozen=True)
class SweepGrid:
    gammas: Sequence[float]
    Cs: Sequence[float]
    gamma2s: Sequence[float] | None = None

    def __post_init__(self) -> None:
        if not self.gammas or not self.Cs:
            raise InvalidInputError("sweep grid needs at least one gamma and one C")
        for g in list(self.gammas) + list(self.Cs) + list(self.gamma2s or []):
            if not g > 0:
                raise InvalidInputError(f"grid values must be positive, got {g}")
        if self.gamma2s is not None and not self.gamma2s:
            raise InvalidInputError("gamma2s, when given, must be nonempty")


@dataclass(frozen=True)
class Pipeline:
    """What a sweep evaluates.  ``kind`` is ``kernel``, ``hashed`` or ``raw``."""

    kind: str
    kernel: KernelKind = KernelKind.PGMM
    k: int = 1024
    b: int = 8
    seed: int = 0
    tol: float = 0.1
    max_iters: int = 1000

    def __post_init__(self) -> None:
        if self.kind not in ("kernel", "hashed", "raw"):
            raise InvalidInputError(f"unknown pipeline {self.kind!r}")
        object.__setattr__(self, "kernel", KernelKind(self.kernel))

    @property
    def name(self) -> str:
        if self.kind == "kernel":
            return self.kernel.value
        if self.kind == "hashed":
            return f"hashed-pgmm-k{self.k}-b{self.b}"
        return "raw-linear"

    @property
    def uses_gamma1(self) -> bool:
        return self.kind == "hashed" or (
            self.kind == "kernel" and self.kernel not in (KernelKind.LINEAR, KernelKind.GMM)
        )

    @property
    def uses_gamma2(self) -> bool:
        return self.kind == "kernel" and self.kernel is KernelKind.EPGMM


@dataclass(frozen=True)
class Cell:
    kernel: str
    gamma1: float | None
    gamma2: float | None
    C: float

    @property
    def key(self) -> tuple[str, str, str, str]:
        return (self.kernel, _fmt(self.gamma1), _fmt(self.gamma2), _fmt(self.C))


@dataclass
class CellResult:
    cell: Cell
    accuracy: float  # fraction in [0, 1]
    seconds: float

    def csv_row(self) -> list[str]:
        return list(self.cell.key[:4]) + [format_accuracy(self.accuracy), f"{self.seconds:.3f}"]


@dataclass
class CellFailure:
    cell: Cell
    error: str


@dataclass
class SweepResult:
    rows: list[list[str]] = field(default_factory=list)
    failures: list[CellFailure] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.failures


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x)).removesuffix(".0")


def format_accuracy(acc: float) -> str:
    """Accuracy as a percentage with two decimals, e.g. ``98.96``."""
    return f"{100.0 * acc:.2f}"


def cells_for(pipeline: Pipeline, grid: SweepGrid) -> list[Cell]:
    g1s = list(grid.gammas) if pipeline.uses_gamma1 else [None]
    g2s = list(grid.gamma2s or grid.gammas) if pipeline.uses_gamma2 else [None]
    return [
        Cell(pipeline.name, g1, g2, float(C)) for g1 in g1s for g2 in g2s for C in grid.Cs
    ]


def read_results(path) -> list[list[str]]:
    p = Path(path)
    if not p.exists() or p.stat().st_size == 0:
        return []
    with open(p, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise InvalidInputError(f"{path}: unexpected header {header}")
        return [row for row in reader if row]


def _data_digest(*datasets: Dataset) -> str:
    h = hashlib.sha256()
    for d in datasets:
        m = d.to_csr()
        for part in (m.indptr, m.indices, m.data, d.labels, np.array([d.dim])):
            h.update(np.ascontiguousarray(part).tobytes())
    return h.hexdigest()[:16]


class _GramCache:
    """pGMM/GMM/cosine Gram matrices keyed by power, kept in memory and optionally on disk."""

    def __init__(self, train: Dataset, test: Dataset, threads: int, cache_dir=None) -> None:
        self.train, self.test, self.threads = train, test, threads
        self.dir = Path(cache_dir) if cache_dir else None
        self.digest = _data_digest(train, test)
        self._mem: dict = {}
        self._lock = threading.Lock()

    def base(self, family: str, power: float) -> tuple[np.ndarray, np.ndarray]:
        key = (family, power)
        with self._lock:
            if key not in self._mem:
                self._mem[key] = self._load_or_compute(family, power)
            return self._mem[key]

    def _load_or_compute(self, family: str, power: float):
        path = None
        if self.dir is not None:
            path = self.dir / f"gram-{self.digest}-{family}-{power!r}.npz"
            if path.exists():
                with np.load(path) as z:
                    return z["train"], z["test"]
        spec = KernelSpec(KernelKind.PGMM, power) if family == "minmax" else KernelSpec(KernelKind.LINEAR)
        ktrain = kernels.gram(self.train, spec, self.threads).values
        ktest = kernels.cross_gram(self.test, self.train, spec, self.threads)
        if path is not None:
            self.dir.mkdir(parents=True, exist_ok=True)
            np.savez(path, train=ktrain, test=ktest)
        return ktrain, ktest

    def matrices(self, spec: KernelSpec) -> tuple[np.ndarray, np.ndarray]:
        """Train and test kernel matrices for ``spec``, derived from the cached base."""
        if spec.kind.minmax:
            ktrain, ktest = self.base("minmax", spec.power)
        else:
            ktrain, ktest = self.base("cosine", 1.0)
        if spec.outer is None:
            return ktrain, ktest
        return kernels.from_pgmm(ktrain, spec.outer), kernels.from_pgmm(ktest, spec.outer)


def _kernel_spec(kind: KernelKind, g1, g2) -> KernelSpec:
    if kind in (KernelKind.LINEAR, KernelKind.GMM):
        return KernelSpec(kind)
    if kind is KernelKind.EPGMM:
        return KernelSpec(kind, g1, g2)
    return KernelSpec(kind, g1)


def precomputed_svm_accuracy(ktrain, ytrain, ktest, ytest, C: float) -> float:
    """Train a libsvm C-SVC on a precomputed kernel and score the test rows."""
    model = SVC(C=C, kernel="precomputed")
    model.fit(ktrain, ytrain)
    return float(np.mean(model.predict(ktest) == ytest))


def _hashed(train: Dataset, test: Dataset, pipeline: Pipeline, gamma: float, threads: int):
    tt, te = train.transformed(), test.transformed()
    config = gcws.HashConfig(gamma, pipeline.k, pipeline.seed, tt.dim)
    fc = featurize.FeatureConfig(pipeline.b, pipeline.k)
    ftrain = featurize.encode_all(gcws.signatures(tt.rows, config, threads), tt.labels, fc)
    ftest = featurize.encode_all(gcws.signatures(te.rows, config, threads), te.labels, fc)
    return ftrain, ftest


def sweep(
    train: Dataset,
    test: Dataset,
    pipeline: Pipeline,
    grid: SweepGrid,
    out=None,
    threads: int = 1,
    cache_dir=None,
    on_cell: Callable[[CellResult], None] | None = None,
) -> SweepResult:
    """Evaluate every grid cell for ``pipeline``; see the module docstring."""
    if train.dim != test.dim:
        raise InvalidInputError(f"train dim {train.dim} != test dim {test.dim}")
    cache_dir = cache_dir if cache_dir is not None else os.environ.get(CACHE_ENV)
    cells = cells_for(pipeline, grid)
    previous = read_results(out) if out else []
    done = {tuple(r[:4]): r for r in previous}
    todo = [c for c in cells if c.key not in done]
    result = SweepResult()
    lock = threading.Lock()

    if out and not previous:
        with open(out, "w", newline="") as fh:
            csv.writer(fh).writerow(CSV_HEADER)

    def record(res: CellResult) -> None:
        row = res.csv_row()
        with lock:
            done[res.cell.key] = row
            if out:
                with open(out, "a", newline="") as fh:
                    csv.writer(fh).writerow(row)
        if on_cell:
            on_cell(res)

    grams = _GramCache(train, test, threads, cache_dir) if pipeline.kind == "kernel" else None
    by_gamma: dict[tuple, list[Cell]] = {}
    for c in todo:
        by_gamma.setdefault((c.gamma1, c.gamma2), []).append(c)

    for (g1, g2), group in by_gamma.items():
        t0 = time.perf_counter()
        try:
            if pipeline.kind == "kernel":
                ktrain, ktest = grams.matrices(_kernel_spec(pipeline.kernel, g1, g2))

                def run(cell: Cell) -> float:
                    return precomputed_svm_accuracy(ktrain, train.labels, ktest, test.labels, cell.C)

            else:
                ftrain, ftest = (
                    _hashed(train, test, pipeline, g1, threads)
                    if pipeline.kind == "hashed"
                    else (train, test)
                )

                def run(cell: Cell) -> float:
                    cfg = TrainConfig(
                        C=cell.C, tol=pipeline.tol, max_iters=pipeline.max_iters, seed=pipeline.seed
                    )
                    return evaluate(train_linear(ftrain, cfg), ftest)

        except Exception as exc:  # one bad gamma must not sink the sweep
            log.error("preparing gamma1=%s gamma2=%s failed: %s", g1, g2, exc)
            result.failures.extend(CellFailure(c, repr(exc)) for c in group)
            continue
        prep = time.perf_counter() - t0

        def timed(cell: Cell):
            t = time.perf_counter()
            try:
                acc = run(cell)
            except Exception as exc:
                log.error("cell %s failed: %s", cell.key, exc)
                return CellFailure(cell, repr(exc))
            res = CellResult(cell, acc, prep / len(group) + time.perf_counter() - t)
            record(res)
            return res

        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            for outcome in pool.map(timed, group):
                if isinstance(outcome, CellFailure):
                    result.failures.append(outcome)

    ordered_keys = [c.key for c in cells]
    extra = [k for k in done if k not in set(ordered_keys)]
    result.rows = [done[k] for k in ordered_keys + extra if k in done]
    if out:
        tmp = Path(str(out) + ".tmp")
        with open(tmp, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            w.writerows(result.rows)
        os.replace(tmp, out)
    return result


def best_over_gamma(rows: Sequence[Sequence[str]]) -> dict[str, list[tuple[float, float]]]:
    """Per kernel, the best accuracy over all gammas at each C (sorted by C)."""
    best: dict[str, dict[float, float]] = {}
    for kernel, _g1, _g2, C, acc, *_ in rows:
        per_c = best.setdefault(kernel, {})
        c, a = float(C), float(acc)
        per_c[c] = max(per_c.get(c, -np.inf), a)
    return {k: sorted(v.items()) for k, v in best.items()}


def curves_by_gamma(rows: Sequence[Sequence[str]], kernel: str) -> dict[tuple[str, str], list[tuple[float, float]]]:
    """Accuracy-vs-C curve for every (gamma1, gamma2) of one kernel."""
    curves: dict[tuple[str, str], list[tuple[float, float]]] = {}
    for k, g1, g2, C, acc, *_ in rows:
        if k == kernel:
            curves.setdefault((g1, g2), []).append((float(C), float(acc)))
    return {key: sorted(v) for key, v in curves.items()}
