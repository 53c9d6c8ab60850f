"""LIBSVM parsing and nested sample hierarchies."""

from __future__ import annotations

import bz2
import gzip
import hashlib
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, ParseError


@dataclass(frozen=True, eq=False)
class SparseDataset:
    """Labeled sparse design matrix with labels in {-1, +1}.

    ``features`` is a CSR matrix of shape ``(n_samples, n_features)`` with
    sorted, duplicate-free column indices in every row.
    """

    features: sp.csr_matrix
    labels: np.ndarray
    name: str = ""

    def __post_init__(self):
        X = self.features
        if not sp.isspmatrix_csr(X):
            raise TypeError("features must be a scipy CSR matrix")
        if self.labels.ndim != 1 or self.labels.shape[0] != X.shape[0]:
            raise ValueError(
                f"labels length {self.labels.shape[0]} != n_samples {X.shape[0]}"
            )
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        starts, ends = X.indptr[:-1], X.indptr[1:]
        steps = np.diff(X.indices)
        # a non-increasing step is only allowed where a new row begins
        bad = np.flatnonzero(steps <= 0) + 1
        if bad.size and not np.all(np.isin(bad, starts[ends > starts])):
            raise ValueError("column indices must be strictly ascending within rows")
        X.has_sorted_indices = True
        self.features.data.flags.writeable = False
        self.labels.flags.writeable = False

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(indices, values)`` of sample ``i``."""
        a, b = self.features.indptr[i], self.features.indptr[i + 1]
        return self.features.indices[a:b], self.features.data[a:b]

    def digest(self) -> str:
        """Content hash, stable across processes."""
        h = hashlib.sha256()
        X = self.features
        h.update(np.asarray(X.shape, dtype=np.int64).tobytes())
        h.update(X.indptr.astype(np.int64).tobytes())
        h.update(X.indices.astype(np.int64).tobytes())
        h.update(X.data.astype(np.float64).tobytes())
        h.update(self.labels.astype(np.float64).tobytes())
        return h.hexdigest()

    @classmethod
    def from_dense(cls, X, y, name: str = "") -> "SparseDataset":
        X = sp.csr_matrix(np.asarray(X, dtype=np.float64))
        X.sort_indices()
        return cls(X, np.asarray(y, dtype=np.float64), name)


def _map_labels(raw: list[float]) -> np.ndarray:
    y = np.asarray(raw, dtype=np.float64)
    distinct = np.unique(y)
    if set(distinct.tolist()) <= {-1.0, 1.0}:
        return y
    if distinct.size == 2:
        return np.where(y == distinct[0], -1.0, 1.0)
    raise ParseError(
        f"cannot map label set {distinct.tolist()} onto {{-1, +1}}", line=None
    )


def parse_libsvm(
    stream: Iterable[str], n_features: int | None = None, name: str = ""
) -> SparseDataset:
    """Parse LIBSVM text (``label idx:val idx:val ...``, 1-based indices).

    ``n_features`` may raise the inferred dimension (max index seen) but not
    lower it. Blank lines and ``#`` comments are ignored.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    labels: list[float] = []
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    max_index = 0
    for lineno, line in enumerate(stream, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            labels.append(float(tokens[0]))
        except ValueError:
            raise ParseError(f"bad label {tokens[0]!r}", line=lineno) from None
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(f"malformed pair {tok!r}", line=lineno)
            try:
                idx = int(idx_s)
            except ValueError:
                raise ParseError(f"bad feature index in {tok!r}", line=lineno) from None
            try:
                val = float(val_s)
            except ValueError:
                raise ParseError(f"non-numeric value in {tok!r}", line=lineno) from None
            if idx < 1:
                raise ParseError(f"feature index {idx} < 1", line=lineno)
            if idx <= prev:
                raise ParseError(
                    f"feature indices not ascending ({prev} then {idx})", line=lineno
                )
            if not np.isfinite(val):
                raise ParseError(f"non-finite value in {tok!r}", line=lineno)
            prev = idx
            indices.append(idx - 1)
            data.append(val)
        max_index = max(max_index, prev)
        indptr.append(len(indices))

    d = max_index
    if n_features is not None:
        if n_features < max_index:
            raise ParseError(
                f"n_features={n_features} is below the largest index {max_index}",
                line=None,
            )
        d = n_features
    y = _map_labels(labels)
    X = sp.csr_matrix(
        (
            np.asarray(data, dtype=np.float64),
            np.asarray(indices, dtype=np.int32),
            np.asarray(indptr, dtype=np.int64),
        ),
        shape=(len(labels), d),
    )
    return SparseDataset(X, y, name)


def _open_text(path: Path) -> TextIO:
    if path.suffix == ".gz":
        return gzip.open(path, "rt")
    if path.suffix == ".bz2":
        return bz2.open(path, "rt")
    return open(path, "r")


def load_libsvm(path, n_features: int | None = None) -> SparseDataset:
    """Read a LIBSVM file, transparently decompressing ``.gz`` and ``.bz2``."""
    path = Path(path)
    name = path.name
    for suffix in (".gz", ".bz2"):
        name = name.removesuffix(suffix)
    with _open_text(path) as fh:
        return parse_libsvm(fh, n_features=n_features, name=name)


def write_libsvm(dataset: SparseDataset, stream: TextIO) -> None:
    """Serialize with 1-based indices; values use ``repr`` so parsing is exact."""
    for i in range(dataset.n_samples):
        idx, vals = dataset.row(i)
        label = "+1" if dataset.labels[i] > 0 else "-1"
        pairs = " ".join(f"{j + 1}:{float(v)!r}" for j, v in zip(idx, vals))
        stream.write(f"{label} {pairs}".rstrip() + "\n")


@dataclass(frozen=True, eq=False)
class SampleHierarchy:
    """Nested index sets, coarsest first; the last level is every sample."""

    levels: tuple[np.ndarray, ...]
    seed: int | None = None

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(lv) for lv in self.levels)

    def __getitem__(self, level: int) -> np.ndarray:
        return self.levels[level]


def uniform_subset(
    parent: np.ndarray, size: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw ``size`` entries of ``parent`` uniformly without replacement.

    Partial Fisher-Yates shuffle; returns a sorted copy. Taking the whole
    parent consumes no random numbers.
    """
    m = len(parent)
    if size > m:
        raise ConfigError(f"cannot draw {size} samples from a set of {m}")
    if size == m:
        return np.array(parent, dtype=np.int64)
    pool = np.array(parent, dtype=np.int64)
    picks = rng.integers(np.arange(size), m)
    for i, j in enumerate(picks):
        pool[i], pool[j] = pool[j], pool[i]
    return np.sort(pool[:size])


def validate_level_sizes(level_sizes: Sequence[int], n_samples: int) -> list[int]:
    sizes = [int(s) for s in level_sizes]
    if not sizes:
        raise ConfigError("level_sizes is empty")
    if any(s < 1 for s in sizes):
        raise ConfigError(f"level sizes must be >= 1, got {sizes}")
    if any(a > b for a, b in zip(sizes, sizes[1:])):
        raise ConfigError(f"level sizes must be nondecreasing, got {sizes}")
    if sizes[-1] != n_samples:
        raise ConfigError(
            f"finest level size {sizes[-1]} must equal n_samples={n_samples}"
        )
    return sizes


def draw_levels(
    n_samples: int, level_sizes: Sequence[int], rng: np.random.Generator
) -> tuple[np.ndarray, ...]:
    sizes = validate_level_sizes(level_sizes, n_samples)
    levels = [np.arange(n_samples, dtype=np.int64)]
    for size in reversed(sizes[:-1]):
        levels.append(uniform_subset(levels[-1], size, rng))
    return tuple(reversed(levels))


def build_hierarchy(
    dataset: SparseDataset | int,
    level_sizes: Sequence[int],
    seed: int | np.random.Generator | None = 0,
) -> SampleHierarchy:
    """Build ``D^1 <= ... <= D^L`` by uniform subsampling from the finer level.

    ``seed`` may be an existing generator, in which case draws are taken
    from (and advance) that stream.
    """
    n = dataset if isinstance(dataset, int) else dataset.n_samples
    if isinstance(seed, np.random.Generator):
        rng, stored = seed, None
    else:
        rng, stored = np.random.default_rng(seed), seed
    levels = draw_levels(n, level_sizes, rng)
    for level in levels:
        level.flags.writeable = False
    return SampleHierarchy(levels, stored)


def doubling_sizes(coarsest: int, n_levels: int, n_samples: int) -> list[int]:
    """Level sizes from the coarsest size by repeated doubling, finest = n."""
    if n_levels < 1:
        raise ConfigError("need at least one level")
    if n_levels == 1:
        return [n_samples]
    sizes = [coarsest * 2**k for k in range(n_levels - 1)] + [n_samples]
    return validate_level_sizes(sizes, n_samples)
