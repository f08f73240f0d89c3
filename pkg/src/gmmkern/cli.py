"""Command-line front end: one subcommand per pipeline stage.

Every command echoes a replayable command line with all effective settings
(seeds and threads included) to stderr, writes its artifact to a temporary
file and renames it into place, and exits 0 only if that succeeded.
"""

from __future__ import annotations

import argparse
import logging
import os
import shlex
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import featurize, gcws, io_formats, kernels, learn, sweep
from .kernels import KernelKind, KernelSpec
from .vectorspace import Dataset, transform

log = logging.getLogger("gmmkern")

PROG = "gmmkern"


class UsageError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    if text in sweep.GAMMA_PRESETS:
        return list(sweep.GAMMA_PRESETS[text])
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated numbers or one of {sorted(sweep.GAMMA_PRESETS)}"
        ) from None


def _threads(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog=PROG, description="GMM-family kernels and GCWS hashing.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    default_threads = os.cpu_count() or 1

    s = sub.add_parser("transform", help="split signed features into nonnegative 2D features")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)

    s = sub.add_parser("gram", help="exact kernel matrix in LIBSVM precomputed format")
    s.add_argument("--kernel", required=True, choices=[k.value for k in KernelKind])
    s.add_argument("--gamma1", type=float)
    s.add_argument("--gamma2", type=float)
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--against", help="kernel rows against this (training) file instead of --in")
    s.add_argument("--out", required=True)
    s.add_argument("--threads", type=_threads, default=default_threads)

    s = sub.add_parser("hash", help="GCWS signatures of every row")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--gamma", type=float, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--dim", type=int, help="original dimensionality (default: largest index)")
    s.add_argument("--out", required=True)
    s.add_argument("--threads", type=_threads, default=default_threads)

    s = sub.add_parser("featurize", help="b-bit one-hot features from signatures")
    s.add_argument("--in", dest="inp", required=True, help="signature file")
    s.add_argument("--labels", required=True, help="LIBSVM file the signatures were made from")
    s.add_argument("--b", type=int, required=True)
    s.add_argument("--out", required=True)

    s = sub.add_parser("train", help="linear SVM on a LIBSVM file")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--C", type=float, required=True)
    s.add_argument("--tol", type=float, default=0.1)
    s.add_argument("--max-iters", type=int, default=1000)
    s.add_argument("--bias", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--dim", type=int)
    s.add_argument("--model", required=True)

    s = sub.add_parser("predict", help="apply a linear model and report accuracy")
    s.add_argument("--model", required=True)
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", help="write one predicted label per line")

    s = sub.add_parser("sweep", help="(gamma, C) grid over a train/test split")
    s.add_argument("--pipeline", choices=["kernel", "hashed", "raw"], default="kernel")
    s.add_argument("--kernel", choices=[k.value for k in KernelKind], default="pgmm")
    s.add_argument("--train", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--gammas", type=_float_list, default=[1.0])
    s.add_argument("--gamma2s", type=_float_list)
    s.add_argument("--Cs", type=_float_list, default=list(sweep.DEFAULT_CS))
    s.add_argument("--k", type=int, default=1024)
    s.add_argument("--b", type=int, default=8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tol", type=float, default=0.1)
    s.add_argument("--out", required=True)
    s.add_argument("--plot", help="also render accuracy-vs-C figure(s) to this path")
    s.add_argument("--cache-dir", default=os.environ.get(sweep.CACHE_ENV))
    s.add_argument("--threads", type=_threads, default=default_threads)
    return p


def effective_config(args: argparse.Namespace) -> str:
    """A command line that replays this run exactly."""
    argv = [PROG, args.command]
    for key, value in vars(args).items():
        if key in ("command", "verbose") or value is None:
            continue
        flag = "--in" if key == "inp" else "--" + key.replace("_", "-")
        if key in ("gammas", "gamma2s", "Cs"):
            value = ",".join(repr(float(v)) for v in value)
        argv += [flag, str(value)]
    return shlex.join(argv)


@contextmanager
def _atomic(path):
    path = Path(path)
    tmp = path.with_name(path.name + ".partial")
    try:
        yield tmp
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def _need(*paths) -> None:
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise UsageError(f"input file not found: {p}")


def _read_pair(a, b, dim=None) -> tuple[Dataset, Dataset]:
    da = io_formats.read_libsvm(a, dim)
    db = io_formats.read_libsvm(b, dim)
    d = max(da.dim, db.dim)
    return da.widened(d), db.widened(d)


def cmd_transform(args) -> None:
    _need(args.inp)
    data = io_formats.read_libsvm(args.inp)
    out = Dataset([transform(r) for r in data.rows], data.labels, 2 * data.dim)
    with _atomic(args.out) as tmp:
        io_formats.write_libsvm(out, tmp)


def cmd_gram(args) -> None:
    _need(args.inp, args.against)
    kind = KernelKind(args.kernel)
    spec = KernelSpec(
        kind,
        args.gamma1 if kind not in (KernelKind.LINEAR, KernelKind.GMM) else None,
        args.gamma2 if kind is KernelKind.EPGMM else None,
    )
    if args.against:
        queries, train = _read_pair(args.inp, args.against)
        values = kernels.cross_gram(queries, train, spec, args.threads)
        labels = queries.labels
    else:
        data = io_formats.read_libsvm(args.inp)
        values = kernels.gram(data, spec, args.threads)
        labels = data.labels
    with _atomic(args.out) as tmp:
        io_formats.write_precomputed(values, labels, tmp)


def cmd_hash(args) -> None:
    _need(args.inp)
    data = io_formats.read_libsvm(args.inp, args.dim).transformed()
    config = gcws.HashConfig(args.gamma, args.k, args.seed, data.dim)
    sigs = gcws.signatures(data.rows, config, args.threads)
    with _atomic(args.out) as tmp:
        io_formats.write_signatures(tmp, sigs, config, data.row_ids)


def cmd_featurize(args) -> None:
    _need(args.inp, args.labels)
    config, row_ids, sigs = io_formats.read_signatures(args.inp)
    labels = io_formats.read_libsvm(args.labels).labels
    try:
        row_labels = labels[np.asarray(row_ids, dtype=np.int64)]
    except (IndexError, ValueError):
        raise UsageError("signature row ids do not index rows of --labels") from None
    if args.b > config.index_bits:
        log.info("b=%d exceeds the %d bits needed for dim %d", args.b, config.index_bits, config.dim)
    data = featurize.encode_all(sigs, row_labels, featurize.FeatureConfig(args.b, config.k), row_ids)
    with _atomic(args.out) as tmp:
        io_formats.write_libsvm(data, tmp)


def cmd_train(args) -> None:
    _need(args.inp)
    data = io_formats.read_libsvm(args.inp, args.dim)
    cfg = learn.TrainConfig(args.C, args.max_iters, args.tol, args.bias, args.seed)
    model = learn.train_linear(data, cfg)
    print(f"train accuracy {sweep.format_accuracy(learn.evaluate(model, data))}")
    with _atomic(args.model) as tmp:
        model.save(tmp)


def cmd_predict(args) -> None:
    _need(args.model, args.inp)
    model = learn.LinearModel.load(args.model)
    data = io_formats.read_libsvm(args.inp)
    if data.dim > model.dim:
        raise UsageError(f"data has {data.dim} features, model only {model.dim}")
    data = data.widened(model.dim)
    acc = learn.evaluate(model, data)
    print(f"accuracy {sweep.format_accuracy(acc)}")
    if args.out:
        with _atomic(args.out) as tmp:
            Path(tmp).write_text("".join(f"{int(y)}\n" for y in model.predict(data)))


def cmd_sweep(args) -> int:
    _need(args.train, args.test)
    train, test = _read_pair(args.train, args.test)
    pipeline = sweep.Pipeline(
        args.pipeline, args.kernel, k=args.k, b=args.b, seed=args.seed, tol=args.tol
    )
    grid = sweep.SweepGrid(args.gammas, args.Cs, args.gamma2s)

    def show(res: sweep.CellResult) -> None:
        log.info("%s", ",".join(res.csv_row()))

    result = sweep.sweep(train, test, pipeline, grid, args.out, args.threads, args.cache_dir, show)
    for kernel, curve in sweep.best_over_gamma(result.rows).items():
        best_c, best = max(curve, key=lambda t: t[1])
        print(f"{kernel}: best accuracy {best:.2f} at C={best_c:g}")
    if args.plot:
        from . import plotting

        plotting.plot_best_over_gamma(result.rows, args.plot)
        if pipeline.uses_gamma1:
            stem = Path(args.plot)
            plotting.plot_gamma_curves(
                result.rows, pipeline.name, stem.with_name(stem.stem + "-gammas" + stem.suffix)
            )
    for f in result.failures:
        print(f"failed cell {f.cell.key}: {f.error}", file=sys.stderr)
    return 0 if result.complete else 1


COMMANDS = {
    "transform": cmd_transform,
    "gram": cmd_gram,
    "hash": cmd_hash,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "predict": cmd_predict,
    "sweep": cmd_sweep,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(levelname)s: %(message)s",
    )
    print(f"config: {effective_config(args)}", file=sys.stderr)
    try:
        return COMMANDS[args.command](args) or 0
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
