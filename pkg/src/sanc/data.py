"""libsvm-format datasets: parsing, label mapping, serialization, and a synthetic generator."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)


class LibsvmFormatError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Dataset:
    """Sparse rows (0-based column indices) and one real label per row."""

    X: sp.csr_matrix
    labels: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.X.indptr[i], self.X.indptr[i + 1]
        return self.X.indices[lo:hi], self.X.data[lo:hi]

    def head(self, n_rows: int) -> "Dataset":
        return Dataset(self.X[:n_rows], self.labels[:n_rows].copy())


def parse_libsvm(source, dim: int | None = None, max_rows: int | None = None) -> Dataset:
    """Parse ``<label> <index>:<value> ...`` lines from a path or text stream.

    Indices are 1-based and strictly increasing within a row; ``#`` starts a
    comment. ``dim`` widens (never narrows) the feature dimension, and
    ``max_rows`` stops after that many examples.
    """
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", newline=None) as fh:
            return parse_libsvm(fh, dim=dim, max_rows=max_rows)

    labels: list[float] = []
    indptr = [0]
    indices: list[int] = []
    values: list[float] = []
    max_index = 0
    for lineno, raw in enumerate(source, start=1):
        if max_rows is not None and len(labels) >= max_rows:
            break
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            labels.append(float(tokens[0]))
        except ValueError:
            raise LibsvmFormatError(f"malformed label {tokens[0]!r}", lineno) from None
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            try:
                if not sep:
                    raise ValueError
                idx, val = int(idx_s), float(val_s)
            except ValueError:
                raise LibsvmFormatError(f"malformed token {tok!r}", lineno) from None
            if idx < 1:
                raise LibsvmFormatError(f"index {idx} must be >= 1", lineno)
            if idx == prev:
                raise LibsvmFormatError(f"duplicate index {idx}", lineno)
            if idx < prev:
                raise LibsvmFormatError(f"non-ascending index {idx} after {prev}", lineno)
            prev = idx
            indices.append(idx - 1)
            values.append(val)
        max_index = max(max_index, prev)
        indptr.append(len(indices))
    if not labels:
        raise LibsvmFormatError("no examples found (empty file)", 0)
    width = max(max_index, dim or 0)
    X = sp.csr_matrix(
        (np.array(values, dtype=np.float64), np.array(indices, dtype=np.int64), np.array(indptr)),
        shape=(len(labels), width),
    )
    return Dataset(X, np.array(labels, dtype=np.float64))


def to_libsvm(ds: Dataset) -> str:
    out = io.StringIO()
    for i in range(ds.n):
        cols, vals = ds.row(i)
        feats = " ".join(f"{c + 1}:{float(v)!r}" for c, v in zip(cols, vals))
        out.write(f"{float(ds.labels[i])!r} {feats}".rstrip() + "\n")
    return out.getvalue()


def write_libsvm(ds: Dataset, path) -> None:
    Path(path).write_text(to_libsvm(ds), encoding="utf-8", newline="\n")


def map_labels(ds: Dataset, target: str) -> Dataset:
    """Map a two-valued label set onto {0, 1} (``zero_one``) or {-1, +1} (``plus_minus``)."""
    if target not in ("zero_one", "plus_minus"):
        raise ValueError(f"unknown label target {target!r}")
    distinct = np.unique(ds.labels)
    if distinct.size != 2:
        raise ValueError(f"expected exactly two distinct labels, found {distinct.size}")
    low, high = (0.0, 1.0) if target == "zero_one" else (-1.0, 1.0)
    mapped = np.where(ds.labels == distinct[0], low, high)
    logger.info("label map %s -> %s, %s -> %s", distinct[0], low, distinct[1], high)
    return Dataset(ds.X, mapped)


def scale_unit_range(ds: Dataset) -> Dataset:
    """Divide each feature column by its largest magnitude (keeps sparsity)."""
    peak = np.asarray(abs(ds.X).max(axis=0).todense()).ravel()
    peak[peak == 0] = 1.0
    return Dataset(sp.csr_matrix(ds.X @ sp.diags(1.0 / peak)), ds.labels.copy())


def make_w1a_like(n: int = 2477, d: int = 300, seed: int = 0, positive_rate: float = 0.03) -> Dataset:
    """Synthetic stand-in for w1a: sparse binary features, rare positive class, labels in {-1, +1}.

    Rows carry on average about 11 active features drawn with a skewed
    popularity profile; labels come from a sparse planted linear score with
    logistic noise, thresholded so roughly ``positive_rate`` rows are positive.
    """
    rng = np.random.default_rng(seed)
    popularity = 1.0 / np.arange(1, d + 1) ** 0.8
    popularity = rng.permutation(popularity / popularity.sum())
    indptr = [0]
    indices: list[np.ndarray] = []
    for _ in range(n):
        k = min(d, 1 + rng.poisson(10.5))
        cols = np.sort(rng.choice(d, size=k, replace=False, p=popularity))
        indices.append(cols)
        indptr.append(indptr[-1] + k)
    cols = np.concatenate(indices)
    X = sp.csr_matrix((np.ones(cols.size), cols, np.array(indptr)), shape=(n, d))
    w_star = np.where(rng.random(d) < 0.15, rng.normal(0.0, 2.0, d), 0.0)
    score = X @ w_star + rng.logistic(size=n)
    threshold = np.quantile(score, 1.0 - positive_rate)
    return Dataset(X, np.where(score > threshold, 1.0, -1.0))
