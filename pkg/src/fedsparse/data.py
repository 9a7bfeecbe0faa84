"""Desk-scale data sources: synthetic Gaussian blobs, CSV in/out,
feature normalization, and stratified train/test splitting.

CSV interchange format: UTF-8, comma-separated, no header by default,
input_dim float feature columns followed by one integer label column.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    class_count: int
    name: str = ""

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2:
            raise ValueError("inputs must be a 2-d matrix")
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.inputs.shape[0]} input rows but {self.labels.shape[0]} labels"
            )
        if self.inputs.shape[0] < 1:
            raise ValueError("dataset must contain at least one sample")
        if self.labels.min() < 0 or self.labels.max() >= self.class_count:
            raise ValueError(f"labels must lie in [0, {self.class_count})")

    def __len__(self) -> int:
        return int(self.inputs.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.inputs.shape[1])

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.inputs[indices], self.labels[indices],
                       self.class_count, self.name)


def gen_synthetic(classes: int, per_class: int, input_dim: int,
                  separation: float, rng_seed, name: str = "synthetic") -> Dataset:
    """Isotropic unit-variance Gaussian blobs.

    Class c is centered at separation * u_c. The directions u_c are
    orthonormal when input_dim >= classes (QR of a seeded Gaussian
    matrix), otherwise plain normalized Gaussian directions.
    """
    if classes < 2:
        raise ValueError("need at least two classes")
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    if input_dim < 1:
        raise ValueError("input_dim must be >= 1")
    if separation < 0:
        raise ValueError("separation must be >= 0")
    rng = np.random.default_rng(rng_seed)
    raw = rng.standard_normal((input_dim, classes)) if input_dim >= classes else None
    if raw is not None:
        q, _ = np.linalg.qr(raw)
        directions = q.T[:classes]
    else:
        directions = rng.standard_normal((classes, input_dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    inputs = np.empty((classes * per_class, input_dim))
    labels = np.empty(classes * per_class, dtype=np.int64)
    for c in range(classes):
        block = slice(c * per_class, (c + 1) * per_class)
        inputs[block] = separation * directions[c] + rng.standard_normal((per_class, input_dim))
        labels[block] = c
    order = rng.permutation(classes * per_class)
    return Dataset(inputs[order], labels[order], classes, name)


def load_csv(path, input_dim: int, class_count: int, skip_header: bool = False) -> Dataset:
    """Parse a feature/label CSV; errors carry the 1-based line number."""
    inputs = []
    labels = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if skip_header and lineno == 1:
                continue
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != input_dim + 1:
                raise ValueError(
                    f"{path}:{lineno}: expected {input_dim + 1} columns, got {len(cells)}"
                )
            try:
                row = [float(c) for c in cells[:-1]]
                label = int(cells[-1])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if not (0 <= label < class_count):
                raise ValueError(
                    f"{path}:{lineno}: label {label} outside [0, {class_count})"
                )
            inputs.append(row)
            labels.append(label)
    if not inputs:
        raise ValueError(f"{path}: no data rows")
    return Dataset(np.array(inputs), np.array(labels), class_count, name=str(path))


def save_csv(ds: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row, label in zip(ds.inputs, ds.labels):
            fh.write(",".join(repr(float(x)) for x in row))
            fh.write(f",{int(label)}\n")


@dataclass
class NormStats:
    """Per-feature train statistics, reusable on held-out data."""

    mean: np.ndarray
    std: np.ndarray

    def apply(self, ds: Dataset) -> Dataset:
        scale = np.where(self.std == 0.0, 1.0, self.std)
        shifted = (ds.inputs - self.mean) / scale
        return Dataset(shifted, ds.labels, ds.class_count, ds.name)


def normalize(ds: Dataset) -> tuple[Dataset, NormStats]:
    """Zero-mean unit-variance features; constant features go to zero."""
    if len(ds) < 2:
        raise ValueError("normalize needs at least two samples")
    mean = ds.inputs.mean(axis=0)
    std = ds.inputs.std(axis=0)
    stats = NormStats(mean, std)
    return stats.apply(ds), stats


def train_test_split(ds: Dataset, test_fraction: float,
                     rng_seed) -> tuple[Dataset, Dataset]:
    """Stratified split: each class contributes round(fraction * count)
    test samples (at least one stays in train). Deterministic given seed."""
    if not (0.0 < test_fraction < 1.0):
        raise ValueError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(rng_seed)
    test_idx = []
    train_idx = []
    for cls in np.unique(ds.labels):
        cls_idx = rng.permutation(np.flatnonzero(ds.labels == cls))
        n_cls = cls_idx.shape[0]
        if n_cls == 1:
            warnings.warn(f"class {cls} has a single sample; keeping it in train")
            train_idx.append(cls_idx)
            continue
        n_test = int(np.floor(test_fraction * n_cls + 0.5))
        n_test = min(n_test, n_cls - 1)  # keep the class represented in train
        test_idx.append(cls_idx[:n_test])
        train_idx.append(cls_idx[n_test:])
    train = np.sort(np.concatenate(train_idx))
    if not test_idx or sum(t.shape[0] for t in test_idx) == 0:
        raise ValueError("test_fraction too small: empty test split")
    test = np.sort(np.concatenate(test_idx))
    return ds.subset(train), ds.subset(test)
