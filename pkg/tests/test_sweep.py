import csv

import numpy as np
import pytest

from gmmkern import sweep
from gmmkern.kernels import KernelKind
from gmmkern.sweep import CSV_HEADER, Pipeline, SweepGrid
from gmmkern.vectorspace import Dataset, InvalidInputError, SparseVector

from conftest import random_dataset


@pytest.fixture
def split(rng):
    data = random_dataset(rng, n=80, dim=6, density=0.7)
    # learnable labels: sign of the first coordinate's contribution
    labels = np.array([int(r.to_dense()[:3].sum() > 0) for r in data.rows])
    data = Dataset(data.rows, labels, data.dim)
    return data.subset(range(40)), data.subset(range(40, 80))


def accuracies(rows):
    return [r[4] for r in rows]


def test_one_by_one_grid(split, tmp_path):
    out = tmp_path / "r.csv"
    res = sweep.sweep(*split, Pipeline("kernel", "pgmm"), SweepGrid([0.5], [1.0]), out)
    assert res.complete and len(res.rows) == 1
    with open(out, newline="") as fh:
        lines = list(csv.reader(fh))
    assert lines[0] == CSV_HEADER
    assert lines[1][:4] == ["pgmm", "0.5", "", "1"]
    assert 0 <= float(lines[1][4]) <= 100


def test_pgmm_gamma_one_equals_gmm(split):
    grid = SweepGrid([1.0], [0.1, 1.0, 10.0])
    p = sweep.sweep(*split, Pipeline("kernel", "pgmm"), grid)
    g = sweep.sweep(*split, Pipeline("kernel", "gmm"), grid)
    assert accuracies(p.rows) == accuracies(g.rows)


def test_epgmm_gamma_one_equals_egmm(split):
    e = sweep.sweep(*split, Pipeline("kernel", "egmm"), SweepGrid([2.0], [1.0]))
    ep = sweep.sweep(*split, Pipeline("kernel", "epgmm"), SweepGrid([1.0], [1.0], gamma2s=[2.0]))
    assert accuracies(e.rows) == accuracies(ep.rows)
    assert ep.rows[0][1:3] == ["1", "2"]


def test_cells_layout():
    grid = SweepGrid([0.5, 2.0], [1.0, 10.0], gamma2s=[3.0])
    assert len(sweep.cells_for(Pipeline("kernel", "gmm"), grid)) == 2
    assert len(sweep.cells_for(Pipeline("kernel", "rbf"), grid)) == 4
    assert len(sweep.cells_for(Pipeline("kernel", "epgmm"), grid)) == 4
    assert len(sweep.cells_for(Pipeline("raw"), grid)) == 2
    assert Pipeline("hashed", k=64, b=4).name == "hashed-pgmm-k64-b4"


def test_best_over_gamma_dominates(split):
    res = sweep.sweep(*split, Pipeline("kernel", "pgmm"), SweepGrid([0.25, 1.0, 4.0], [0.1, 10.0]))
    best = dict(sweep.best_over_gamma(res.rows)["pgmm"])
    for curve in sweep.curves_by_gamma(res.rows, "pgmm").values():
        for c, acc in curve:
            assert best[c] >= acc
    assert set(sweep.curves_by_gamma(res.rows, "pgmm")) == {("0.25", ""), ("1", ""), ("4", "")}


def test_resume_skips_finished_cells(split, tmp_path):
    out = tmp_path / "r.csv"
    full = sweep.sweep(*split, Pipeline("kernel", "rbf"), SweepGrid([0.5, 2.0], [1.0, 10.0]), out)
    # keep only the first two rows, as if interrupted
    lines = out.read_text().splitlines()
    out.write_text("\n".join(lines[:3]) + "\n")
    seen = []
    again = sweep.sweep(
        *split, Pipeline("kernel", "rbf"), SweepGrid([0.5, 2.0], [1.0, 10.0]), out, on_cell=seen.append
    )
    assert len(seen) == 2
    assert [r[:5] for r in again.rows] == [r[:5] for r in full.rows]
    assert [r[:5] for r in sweep.read_results(out)] == [r[:5] for r in full.rows]


@pytest.mark.parametrize("pipeline", [Pipeline("kernel", "epgmm"), Pipeline("hashed", k=64, b=4), Pipeline("raw")])
def test_thread_count_does_not_change_results(split, pipeline):
    grid = SweepGrid([0.5, 1.0], [0.1, 1.0], gamma2s=[1.0])
    one = sweep.sweep(*split, pipeline, grid, threads=1)
    four = sweep.sweep(*split, pipeline, grid, threads=4)
    assert [r[:5] for r in one.rows] == [r[:5] for r in four.rows]


def test_failures_are_reported_not_fatal(split, tmp_path):
    train, test = split
    empty = SparseVector(train.dim, [], [])
    bad = Dataset(train.rows[:-1] + [empty], train.labels, train.dim)
    res = sweep.sweep(bad, test, Pipeline("hashed", k=16, b=2), SweepGrid([1.0], [1.0, 10.0]), tmp_path / "r.csv")
    assert not res.complete
    assert len(res.failures) == 2 and "empty" in res.failures[0].error
    # other pipelines on the same data still run
    assert sweep.sweep(bad, test, Pipeline("raw"), SweepGrid([1.0], [1.0])).complete


def test_disk_cache(split, tmp_path, monkeypatch):
    cache = tmp_path / "cache"
    grid = SweepGrid([0.5], [1.0])
    first = sweep.sweep(*split, Pipeline("kernel", "pgmm"), grid, cache_dir=cache)
    files = list(cache.iterdir())
    assert len(files) == 1
    calls = []
    monkeypatch.setattr(sweep.kernels, "gram", lambda *a, **k: calls.append(1))
    second = sweep.sweep(*split, Pipeline("kernel", "epgmm"), SweepGrid([0.5], [1.0], [1.0]), cache_dir=cache)
    assert not calls and second.complete
    monkeypatch.undo()
    egmm = sweep.sweep(*split, Pipeline("kernel", "egmm"), SweepGrid([1.0], [1.0]), cache_dir=cache)
    assert first.complete and egmm.complete
    assert len(list(cache.iterdir())) == 2


def test_grid_validation(split):
    with pytest.raises(InvalidInputError):
        SweepGrid([], [1.0])
    with pytest.raises(InvalidInputError):
        SweepGrid([1.0], [0.0])
    with pytest.raises(InvalidInputError):
        Pipeline("boosting")
    train, test = split
    with pytest.raises(InvalidInputError):
        sweep.sweep(train, test.widened(test.dim + 1), Pipeline("raw"), SweepGrid([1.0], [1.0]))


def test_presets():
    assert len(sweep.GAMMA_PRESETS["rbf58"]) == 58
    assert len(set(sweep.GAMMA_PRESETS["rbf58"])) == 58
    assert sweep.GAMMA_PRESETS["pgmm27"][:3] == [0.05, 0.1, 0.15]
    assert sweep.GAMMA_PRESETS["pgmm27"][-1] == 100


def test_plots_written(split, tmp_path):
    from gmmkern import plotting

    res = sweep.sweep(*split, Pipeline("kernel", "pgmm"), SweepGrid([0.5, 1.0], [0.1, 1.0]))
    plotting.plot_best_over_gamma(res.rows, tmp_path / "best.png", "test")
    plotting.plot_gamma_curves(res.rows, "pgmm", tmp_path / "curves.pdf")
    assert (tmp_path / "best.png").read_bytes()[:4] == b"\x89PNG"
    assert (tmp_path / "curves.pdf").read_bytes()[:4] == b"%PDF"
