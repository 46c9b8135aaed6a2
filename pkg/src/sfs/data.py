"""Datasets, CSV ingestion, the synthetic ring benchmark and stratified folds."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class DataError(ValueError):
    """Raised when input data violates a dataset invariant."""


@dataclass(frozen=True)
class Dataset:
    """Samples ``X`` (n x m) with class labels in ``1..K``.

    ``raw_labels`` keeps the original label strings in the order of their
    encoded ids (``raw_labels[c - 1]`` is the label of class ``c``).
    """

    X: np.ndarray
    labels: np.ndarray
    feature_names: Optional[tuple[str, ...]] = None
    raw_labels: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        labels = np.array(self.labels, dtype=int)
        if X.ndim != 2:
            raise DataError("X must be a 2-D matrix")
        n, m = X.shape
        if n < 2 or m < 1:
            raise DataError(f"need n >= 2 and m >= 1, got n={n}, m={m}")
        if labels.shape != (n,):
            raise DataError("labels must have one entry per row of X")
        bad = np.argwhere(~np.isfinite(X))
        if bad.size:
            r, c = bad[0]
            raise DataError(f"non-finite value at row {r + 1}, column {c + 1}")
        K = int(labels.max()) if n else 0
        if labels.min() < 1 or K < 2:
            raise DataError("fewer than 2 classes")
        missing = set(range(1, K + 1)) - set(labels.tolist())
        if missing:
            raise DataError(f"class ids {sorted(missing)} do not appear")
        if self.feature_names is not None and len(self.feature_names) != m:
            raise DataError("feature_names length does not match X")
        X.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    @property
    def K(self) -> int:
        return int(self.labels.max())

    def subset(self, idx) -> "Dataset":
        """Rows ``idx`` of the dataset; labels are kept as-is (not re-encoded)."""
        return Dataset(self.X[idx], self.labels[idx], self.feature_names, self.raw_labels)


def encode_labels(raw: Sequence) -> tuple[np.ndarray, tuple[str, ...]]:
    """Map labels to ``1..K`` in order of first appearance."""
    mapping: dict[str, int] = {}
    out = np.empty(len(raw), dtype=int)
    for i, lab in enumerate(raw):
        key = str(lab)
        if key not in mapping:
            mapping[key] = len(mapping) + 1
        out[i] = mapping[key]
    return out, tuple(mapping)


def load_csv(path, label_column: str = "label") -> Dataset:
    """Read a headered, comma-separated UTF-8 file into a :class:`Dataset`.

    Every column other than ``label_column`` must parse as a float.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"empty file: {path}") from None
        if label_column not in header:
            raise DataError(f"label column {label_column!r} not found in header")
        li = header.index(label_column)
        names = tuple(h for j, h in enumerate(header) if j != li)
        rows, raw = [], []
        for r, rec in enumerate(reader, start=1):
            if not rec:
                continue
            if len(rec) != len(header):
                raise DataError(f"row {r} has {len(rec)} fields, expected {len(header)}")
            vals = []
            for j, cell in enumerate(rec):
                if j == li:
                    continue
                try:
                    x = float(cell)
                except ValueError:
                    raise DataError(f"non-numeric value {cell!r} at row {r}, column {j + 1}") from None
                if not math.isfinite(x):
                    raise DataError(f"non-finite value at row {r}, column {j + 1}")
                vals.append(x)
            rows.append(vals)
            raw.append(rec[li].strip())
    labels, raw_labels = encode_labels(raw)
    if len(raw_labels) < 2:
        raise DataError("fewer than 2 classes")
    return Dataset(np.array(rows, dtype=float).reshape(len(rows), len(names)),
                   labels, names, raw_labels)


def write_csv(ds: Dataset, path, label_column: str = "label") -> None:
    names = ds.feature_names or tuple(f"f{j + 1}" for j in range(ds.m))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([*names, label_column])
        for x, y in zip(ds.X, ds.labels):
            lab = ds.raw_labels[y - 1] if ds.raw_labels else int(y)
            w.writerow([repr(float(v)) for v in x] + [lab])


# Ring geometry. The rings form a chain: rings 1 and 3 lie in the
# (f1, f2) plane centred at f2 = -/+ RING_OFFSET, ring 2 lies in the
# (f2, f3) plane through the origin, so 1-2 and 2-3 are interlinked.
# With three equal classes the population variances are
#   var f1 = (R^2 + tau^2 + nu) / 3           ~ 0.347
#   var f2 = (2 D^2 + 1.5 (R^2 + tau^2)) / 3  ~ 2.005
#   var f3 = (R^2 + tau^2) / 6 + 2 nu / 3     ~ 0.188
# for R = RING_RADIUS, tau = RING_RADIAL_STD, nu = RING_THICKNESS_STD^2,
# D = RING_OFFSET.
RING_RADIUS = 1.0
RING_RADIAL_STD = 0.1
RING_THICKNESS_STD = math.sqrt(0.03)
RING_OFFSET = 1.5


@dataclass(frozen=True)
class RingConfig:
    samples_per_class: int = 200
    num_classes: int = 3
    num_features: int = 10
    noise_variance: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.samples_per_class < 1:
            raise DataError("samples_per_class must be >= 1")
        if self.num_classes < 2:
            raise DataError("num_classes must be >= 2")
        if self.num_features < 3:
            raise DataError("num_features must be >= 3")
        if not self.noise_variance > 0:
            raise DataError("noise_variance must be > 0")


def _ring_placement(c: int, num_classes: int) -> tuple[float, bool]:
    """Offset along feature 2 and plane orientation of ring ``c`` (0-based)."""
    offset = (c - (num_classes - 1) / 2.0) * RING_OFFSET
    return offset, c % 2 == 1


def generate_rings(cfg: RingConfig) -> Dataset:
    """Interlinked noisy rings in features 1-3 plus Gaussian nuisance features.

    Class ``c`` is a ring of radius ``RING_RADIUS`` with Gaussian radial
    noise. Consecutive rings alternate between the (f1, f2) and (f2, f3)
    planes and are spaced ``RING_OFFSET`` apart along f2, so neighbours
    pass through each other. Features 4 and up are i.i.d. N(0, noise_variance).
    """
    rng = np.random.default_rng(cfg.seed)
    n_c = cfg.samples_per_class
    blocks = []
    for c in range(cfg.num_classes):
        offset, vertical = _ring_placement(c, cfg.num_classes)
        theta = rng.uniform(0.0, 2.0 * np.pi, n_c)
        radius = RING_RADIUS + RING_RADIAL_STD * rng.standard_normal(n_c)
        thickness = RING_THICKNESS_STD * rng.standard_normal(n_c)
        a, b = radius * np.cos(theta), radius * np.sin(theta)
        if vertical:
            pts = np.column_stack([thickness, offset + a, b])
        else:
            pts = np.column_stack([a, offset + b, thickness])
        blocks.append(pts)
    informative = np.vstack(blocks)
    n = informative.shape[0]
    noise = math.sqrt(cfg.noise_variance) * rng.standard_normal((n, cfg.num_features - 3))
    X = np.hstack([informative, noise])
    labels = np.repeat(np.arange(1, cfg.num_classes + 1), n_c)
    names = tuple(f"f{j + 1}" for j in range(cfg.num_features))
    return Dataset(X, labels, names)


@dataclass(frozen=True)
class FoldPlan:
    """Fold index in ``1..k`` for every sample."""

    assignments: np.ndarray
    k: int
    seed: int

    def train_test(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        test = np.flatnonzero(self.assignments == fold)
        train = np.flatnonzero(self.assignments != fold)
        return train, test

    def __iter__(self):
        for f in range(1, self.k + 1):
            yield self.train_test(f)


def kfold_split(labels, k: int, seed: int = 0) -> FoldPlan:
    """Stratified ``k``-fold assignment, deterministic in ``seed``.

    Each class is shuffled and dealt round-robin; the dealing start rotates
    with the cumulative class count so fold totals stay balanced too.
    """
    labels = np.asarray(labels.labels if isinstance(labels, Dataset) else labels)
    if k < 2:
        raise DataError("k must be >= 2")
    rng = np.random.default_rng(seed)
    out = np.zeros(labels.shape[0], dtype=int)
    start = 0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if idx.size < k:
            raise DataError(f"class {c} has {idx.size} samples, fewer than k={k}")
        idx = rng.permutation(idx)
        out[idx] = (start + np.arange(idx.size)) % k + 1
        start = (start + idx.size) % k
    return FoldPlan(out, k, seed)
