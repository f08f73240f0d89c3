"""LIBSVM sparse files, LIBSVM precomputed-kernel files and signature files.

Indices are 1-based on disk and 0-based in memory.
"""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .gcws import HashConfig, HashSignature
from .kernels import GramMatrix
from .vectorspace import BinaryFeatureVector, Dataset, SparseVector

log = logging.getLogger(__name__)


class FormatError(ValueError):
    """A file does not follow the expected format."""

    def __init__(self, path, line_no: int, message: str) -> None:
        super().__init__(f"{path}:{line_no}: {message}")
        self.line_no = line_no


def format_value(x: float) -> str:
    """Shortest decimal string that parses back to the same double."""
    text = repr(float(x))
    return text[:-2] if text.endswith(".0") else text


def format_kernel_value(x: float) -> str:
    return f"{float(x):.17g}"


def _parse_label(token: str, label_map: dict | None, path, line_no: int) -> int:
    try:
        value = float(token)
    except ValueError:
        value = None
    if value is not None and math.isfinite(value) and value == int(value):
        return int(value)
    if label_map is None:
        raise FormatError(path, line_no, f"non-integer label {token!r} (pass a label map)")
    if token not in label_map:
        label_map[token] = max(label_map.values(), default=-1) + 1
    return label_map[token]


def parse_libsvm_line(line: str, path="<string>", line_no: int = 1, label_map=None):
    """Return ``(label, indices0, values)`` for one non-empty line."""
    parts = line.split()
    label = _parse_label(parts[0], label_map, path, line_no)
    idx = np.empty(len(parts) - 1, dtype=np.int64)
    val = np.empty(len(parts) - 1)
    for n, tok in enumerate(parts[1:]):
        key, sep, raw = tok.partition(":")
        try:
            if not sep:
                raise ValueError
            idx[n] = int(key) - 1
            val[n] = float(raw)
        except ValueError:
            raise FormatError(path, line_no, f"malformed feature {tok!r}") from None
        if idx[n] < 0:
            raise FormatError(path, line_no, f"index must be >= 1, got {key}")
        if not math.isfinite(val[n]):
            raise FormatError(path, line_no, f"non-finite value {raw!r}")
    if idx.size > 1 and np.any(np.diff(idx) <= 0):
        raise FormatError(path, line_no, "feature indices are not strictly increasing")
    return label, idx, val


def read_libsvm(path, dim: int | None = None, label_map: dict | None = None) -> Dataset:
    """Load a LIBSVM sparse file.  ``dim`` defaults to the largest index seen.

    Explicit zero values are dropped; blank lines are skipped with a warning.
    """
    labels, parsed = [], []
    seen = 1
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                log.warning("%s:%d: skipping empty line", path, line_no)
                continue
            if line.lstrip().startswith("#"):
                continue
            label, idx, val = parse_libsvm_line(line, path, line_no, label_map)
            if idx.size:
                seen = max(seen, int(idx[-1]) + 1)
            keep = val != 0.0
            labels.append(label)
            parsed.append((idx[keep], val[keep]))
    if dim is None:
        dim = seen
    elif seen > dim:
        raise FormatError(path, 0, f"index {seen} exceeds requested dim {dim}")
    rows = [SparseVector(dim, i, v) for i, v in parsed]
    return Dataset(rows, np.array(labels, dtype=np.int64), dim)


def libsvm_line(label: int, row) -> str:
    parts = [str(int(label))]
    if isinstance(row, BinaryFeatureVector):
        parts.extend(f"{i + 1}:1" for i in row.ones)
    else:
        parts.extend(f"{i + 1}:{format_value(v)}" for i, v in zip(row.indices, row.values))
    return " ".join(parts)


def write_libsvm(data: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for label, row in zip(data.labels, data.rows):
            fh.write(libsvm_line(label, row) + "\n")


def save_label_map(label_map: dict, path) -> None:
    Path(path).write_text(json.dumps(label_map, sort_keys=True, indent=1))


def load_label_map(path) -> dict:
    p = Path(path)
    return json.loads(p.read_text()) if p.exists() else {}


def write_precomputed(gram, labels: Sequence[int], path) -> None:
    """LIBSVM ``-t 4`` input: ``label 0:<serial> 1:K(i,1) ... n:K(i,n)``.

    ``gram`` may be a :class:`GramMatrix` (training) or any 2-d array, e.g.
    test rows against training rows.  Serials are 1-based row numbers.
    """
    values = gram.values if isinstance(gram, GramMatrix) else np.asarray(gram)
    labels = list(labels)
    if values.ndim != 2 or values.shape[0] != len(labels):
        raise ValueError(f"gram has {values.shape[0]} rows but {len(labels)} labels")
    with open(path, "w", encoding="utf-8") as fh:
        for i, (label, row) in enumerate(zip(labels, values), start=1):
            cells = " ".join(f"{j}:{format_kernel_value(v)}" for j, v in enumerate(row, start=1))
            fh.write(f"{int(label)} 0:{i} {cells}\n")


def read_precomputed(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Parse a precomputed-kernel file into ``(labels, serials, matrix)``."""
    labels, serials, rows = [], [], []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            labels.append(_parse_label(parts[0], None, path, line_no))
            key, _, raw = parts[1].partition(":")
            if key != "0":
                raise FormatError(path, line_no, "first feature must be 0:<serial>")
            serials.append(int(float(raw)))
            row = []
            for expected, tok in enumerate(parts[2:], start=1):
                key, _, raw = tok.partition(":")
                if int(key) != expected:
                    raise FormatError(path, line_no, f"expected index {expected}, got {key}")
                row.append(float(raw))
            rows.append(row)
    if len({len(r) for r in rows}) > 1:
        raise FormatError(path, 0, "rows have different lengths")
    return np.array(labels, dtype=np.int64), np.array(serials), np.array(rows)


_SIG_HEADER = "# gcws"


def write_signatures(
    path, sigs: Iterable[HashSignature], config: HashConfig, row_ids: Sequence | None = None
) -> None:
    """One row per vector: ``row_id k b_available istar:tstar ...``.

    A leading comment line records the full hash configuration and digest.
    ``b_available`` is the number of low bits of ``istar`` that are meaningful.
    """
    sigs = list(sigs)
    row_ids = list(range(len(sigs))) if row_ids is None else list(row_ids)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"{_SIG_HEADER} digest={config.digest} gamma={config.gamma!r} "
            f"k={config.k} seed={config.seed} dim={config.dim}\n"
        )
        for rid, sig in zip(row_ids, sigs, strict=True):
            if sig.config_digest != config.digest:
                raise ValueError(f"signature for row {rid} was made under another config")
            pairs = " ".join(f"{i}:{t}" for i, t in zip(sig.istar.tolist(), sig.tstar.tolist()))
            fh.write(f"{rid} {sig.k} {config.index_bits} {pairs}\n")


def read_signatures(path) -> tuple[HashConfig, list, list[HashSignature]]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith(_SIG_HEADER):
            raise FormatError(path, 1, "missing signature header")
        fields = dict(tok.split("=", 1) for tok in header[len(_SIG_HEADER):].split())
        try:
            config = HashConfig(
                float(fields["gamma"]), int(fields["k"]), int(fields["seed"]), int(fields["dim"])
            )
        except (KeyError, ValueError) as exc:
            raise FormatError(path, 1, f"bad signature header: {exc}") from None
        if config.digest != fields.get("digest"):
            raise FormatError(path, 1, "header digest does not match its configuration")
        row_ids, sigs = [], []
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split()
            try:
                rid, k = parts[0], int(parts[1])
                pairs = [tok.split(":") for tok in parts[3:]]
                istar = [int(i) for i, _ in pairs]
                tstar = [int(t) for _, t in pairs]
            except (IndexError, ValueError):
                raise FormatError(path, line_no, "malformed signature row") from None
            if k != config.k or len(istar) != k:
                raise FormatError(path, line_no, f"expected {config.k} samples")
            row_ids.append(int(rid) if rid.lstrip("-").isdigit() else rid)
            sigs.append(HashSignature(config.digest, istar, tstar))
    return config, row_ids, sigs
