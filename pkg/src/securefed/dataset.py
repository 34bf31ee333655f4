"""Data handling: IDX ingestion, synthetic generation, IID sharding, attacks.

A Dataset is immutable after construction and shared by every simulated
client; label-flipping attacks produce per-shard label overlays instead of
mutating anything.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .numerics import RngStream

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    """Wrong magic number or malformed IDX structure."""


class IdxTruncatedError(OSError):
    """IDX file ends before the declared payload."""


class DatasetConsistencyError(ValueError):
    """Image and label files disagree (e.g. different sample counts)."""


@dataclass(frozen=True)
class Dataset:
    """Labeled feature vectors with values in [0, 1].

    features: (n, d) float64; labels: (n,) int64 in [0, num_classes).
    Arrays are frozen read-only so the one dataset can be shared across all
    simulated clients.
    """

    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if f.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {f.shape}")
        if y.shape != (f.shape[0],):
            raise ValueError("features and labels must have the same length")
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if f.size and (f.min() < 0.0 or f.max() > 1.0):
            raise ValueError("feature values must lie in [0, 1]")
        if y.size and (y.min() < 0 or y.max() >= self.num_classes):
            raise ValueError("labels must lie in [0, num_classes)")
        f.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "labels", y)

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: np.ndarray) -> Dataset:
        """New Dataset restricted to the given sample indices."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.num_classes)


@dataclass(frozen=True)
class Shard:
    """One client's slice of a parent dataset (indices, not copies)."""

    owner: int
    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1:
            raise ValueError("shard indices must be 1-D")
        if len(np.unique(idx)) != len(idx):
            raise ValueError("shard indices must be unique")
        idx.flags.writeable = False
        object.__setattr__(self, "indices", idx)

    @property
    def size(self) -> int:
        return self.indices.shape[0]


@dataclass(frozen=True)
class AttackSpec:
    """Single-class label flip: relabel source_class samples as target_class."""

    source_class: int
    target_class: int
    kind: str = "label_flip"

    def __post_init__(self):
        if self.kind != "label_flip":
            raise ValueError(f"unsupported attack kind {self.kind!r}")
        if self.source_class == self.target_class:
            raise ValueError("source_class and target_class must differ")
        if self.source_class < 0 or self.target_class < 0:
            raise ValueError("attack classes must be nonnegative")


def _read_exact(f, count: int, path: str) -> bytes:
    data = f.read(count)
    if len(data) != count:
        raise IdxTruncatedError(f"{path}: expected {count} bytes, got {len(data)}")
    return data


def load_mnist_idx(image_path, label_path) -> Dataset:
    """Load an MNIST-style IDX image/label pair.

    Big-endian headers: images 0x00000803 with dims (n, rows, cols), labels
    0x00000801 with dim (n). Pixels are divided by 255 into [0, 1] and
    flattened row-major.
    """
    image_path, label_path = str(image_path), str(label_path)
    with open(image_path, "rb") as f:
        magic, n, rows, cols = struct.unpack(">IIII", _read_exact(f, 16, image_path))
        if magic != IMAGE_MAGIC:
            raise IdxFormatError(f"{image_path}: bad image magic 0x{magic:08x}")
        pixels = np.frombuffer(_read_exact(f, n * rows * cols, image_path), dtype=np.uint8)
    with open(label_path, "rb") as f:
        magic, n_labels = struct.unpack(">II", _read_exact(f, 8, label_path))
        if magic != LABEL_MAGIC:
            raise IdxFormatError(f"{label_path}: bad label magic 0x{magic:08x}")
        labels = np.frombuffer(_read_exact(f, n_labels, label_path), dtype=np.uint8)
    if n != n_labels:
        raise DatasetConsistencyError(f"{n} images but {n_labels} labels")
    features = pixels.astype(np.float64).reshape(n, rows * cols) / 255.0
    return Dataset(features, labels.astype(np.int64), num_classes=10)


def write_idx(dataset: Dataset, image_path, label_path, rows: int = 28, cols: int = 28) -> None:
    """Write a Dataset back to an IDX pair (inverse of load_mnist_idx).

    Feature values must sit on the k/255 grid (as anything loaded from IDX
    does); they are scaled by 255 and rounded to the nearest byte.
    """
    if dataset.dim != rows * cols:
        raise ValueError(f"dataset dim {dataset.dim} != rows*cols = {rows * cols}")
    pixels = np.round(dataset.features * 255.0).astype(np.uint8)
    with open(image_path, "wb") as f:
        f.write(struct.pack(">IIII", IMAGE_MAGIC, dataset.size, rows, cols))
        f.write(pixels.tobytes())
    with open(label_path, "wb") as f:
        f.write(struct.pack(">II", LABEL_MAGIC, dataset.size))
        f.write(dataset.labels.astype(np.uint8).tobytes())


def generate_synthetic(num_classes: int, per_class: int, dim: int,
                       separation: float, rng: RngStream) -> Dataset:
    """Class-conditional isotropic Gaussians clipped to [0, 1].

    Class j's mean is `separation` on the coordinates assigned to it
    (coordinate i belongs to class i mod num_classes) and 0 elsewhere;
    noise is sigma = 0.1.
    """
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    if dim < 1 or num_classes < 1:
        raise ValueError("dim and num_classes must be >= 1")
    means = np.zeros((num_classes, dim))
    coords = np.arange(dim) % num_classes
    for j in range(num_classes):
        means[j, coords == j] = separation
    labels = np.repeat(np.arange(num_classes, dtype=np.int64), per_class)
    noise = rng.normal(0.0, 0.1, size=(labels.shape[0], dim))
    features = np.clip(means[labels] + noise, 0.0, 1.0)
    return Dataset(features, labels, num_classes)


def partition_iid(dataset: Dataset, num_clients: int, rng: RngStream) -> list[Shard]:
    """Uniform random permutation split into num_clients contiguous blocks.

    Shards are disjoint, cover the dataset, and differ in size by at most 1
    (earlier shards take the remainder).
    """
    n = dataset.size
    if num_clients < 1 or n < num_clients:
        raise ValueError(f"cannot split {n} samples across {num_clients} clients")
    perm = rng.permutation(n)
    base, extra = divmod(n, num_clients)
    shards = []
    start = 0
    for c in range(num_clients):
        size = base + (1 if c < extra else 0)
        shards.append(Shard(owner=c, indices=perm[start:start + size]))
        start += size
    return shards


def apply_attack(dataset: Dataset, shard: Shard, spec: AttackSpec) -> np.ndarray:
    """Shard-local label overlay: source-class labels become target_class.

    Returns a fresh label vector aligned with shard.indices; the dataset and
    all other labels are untouched.
    """
    if spec.source_class >= dataset.num_classes or spec.target_class >= dataset.num_classes:
        raise ValueError("attack classes must be < num_classes")
    overlay = dataset.labels[shard.indices].copy()
    overlay[overlay == spec.source_class] = spec.target_class
    return overlay


def holdout_split(dataset: Dataset, validation_count: int, rng: RngStream) -> tuple[Dataset, Dataset]:
    """Split off a server-held validation set; returns (remainder, validation)."""
    if validation_count < 1:
        raise ValueError("validation_count must be >= 1 (validation set cannot be empty)")
    if validation_count >= dataset.size:
        raise ValueError("validation_count must be < dataset size")
    perm = rng.permutation(dataset.size)
    validation = dataset.subset(perm[:validation_count])
    remainder = dataset.subset(perm[validation_count:])
    return remainder, validation


def shard_arrays(dataset: Dataset, shard: Shard,
                 label_overlay: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Materialize a shard's (features, labels), honoring an optional overlay."""
    x = dataset.features[shard.indices]
    y = dataset.labels[shard.indices] if label_overlay is None else np.asarray(label_overlay, dtype=np.int64)
    if y.shape != (shard.size,):
        raise ValueError("label overlay length must match shard size")
    return x, y
