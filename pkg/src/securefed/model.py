"""The federated classifier: one-hidden-layer ReLU MLP with softmax output.

Parameters live in a single flat float64 vector (layout: W1, b1, W2, b2,
all row-major) so client updates, aggregation, and checkpointing operate on
plain vectors. The heavy math is delegated to the selected kernel backend.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .dataset import Dataset
from .numerics import RngStream
from .reporting import Metrics, classification_metrics

Arch = tuple[int, int, int]  # (input_dim, hidden_dim, num_classes)

EVAL_BATCH = 512


def flat_length(arch: Arch) -> int:
    d, h, c = arch
    return d * h + h + h * c + c


@dataclass
class ModelParams:
    """Flat parameter vector plus the layer shapes needed to interpret it."""

    arch: Arch
    flat: np.ndarray

    def __post_init__(self):
        self.arch = tuple(int(v) for v in self.arch)
        self.flat = np.asarray(self.flat, dtype=np.float64)
        if self.flat.shape != (flat_length(self.arch),):
            raise ValueError(f"flat length {self.flat.shape} does not match arch {self.arch}")
        if not np.all(np.isfinite(self.flat)):
            raise ValueError("model parameters contain non-finite values")

    def views(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(w1, b1, w2, b2) views into the flat vector (no copies)."""
        return _views_of(self.flat, self.arch)

    def copy(self) -> ModelParams:
        return ModelParams(self.arch, self.flat.copy())


def _views_of(flat: np.ndarray, arch: Arch):
    d, h, c = arch
    o = 0
    w1 = flat[o:o + d * h].reshape(d, h); o += d * h
    b1 = flat[o:o + h]; o += h
    w2 = flat[o:o + h * c].reshape(h, c); o += h * c
    b2 = flat[o:o + c]
    return w1, b1, w2, b2


@dataclass(frozen=True)
class Hyper:
    """Local-training knobs used by every client."""

    learning_rate: float = 0.05
    local_epochs: int = 2
    batch_size: int = 64

    def __post_init__(self):
        if self.learning_rate < 0.0:
            raise ValueError("learning_rate must be >= 0")
        if self.local_epochs < 1 or self.batch_size < 1:
            raise ValueError("local_epochs and batch_size must be >= 1")


def init_model(arch: Arch, rng: RngStream) -> ModelParams:
    """Glorot-uniform weights, zero biases."""
    d, h, c = arch
    if d < 1 or h < 1 or c < 1:
        raise ValueError("all architecture dims must be positive")
    flat = np.zeros(flat_length(arch))
    w1, b1, w2, b2 = _views_of(flat, arch)
    s1 = np.sqrt(6.0 / (d + h))
    s2 = np.sqrt(6.0 / (h + c))
    w1[...] = rng.uniform(-s1, s1, size=(d, h))
    w2[...] = rng.uniform(-s2, s2, size=(h, c))
    return ModelParams(arch, flat)


def forward_loss_grad(params: ModelParams, x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient w.r.t. the flat parameter vector."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if x.shape[0] == 0:
        raise ValueError("batch must be non-empty")
    if x.shape[1] != params.arch[0]:
        raise ValueError(f"feature width {x.shape[1]} != input_dim {params.arch[0]}")
    grad = np.zeros_like(params.flat)
    w1, b1, w2, b2 = params.views()
    gw1, gb1, gw2, gb2 = _views_of(grad, params.arch)
    loss = kernels.batch_loss_grad(x, y, w1, b1, w2, b2, gw1, gb1, gw2, gb2)
    return loss, grad


def train_local(start: ModelParams, x: np.ndarray, y: np.ndarray,
                hyper: Hyper, rng: RngStream) -> np.ndarray:
    """Mini-batch SGD from `start`; returns the weight delta (trained - start).

    `start` is never mutated. Batch order is drawn from the supplied stream,
    so identical (data, hyper, seed) triples give identical deltas.
    """
    if x.shape[0] == 0:
        raise ValueError("cannot train on an empty shard")
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    n = x.shape[0]
    flat = start.flat.copy()
    grad = np.zeros_like(flat)
    w1, b1, w2, b2 = _views_of(flat, start.arch)
    gw1, gb1, gw2, gb2 = _views_of(grad, start.arch)
    for _ in range(hyper.local_epochs):
        order = rng.permutation(n)
        for lo in range(0, n, hyper.batch_size):
            idx = order[lo:lo + hyper.batch_size]
            xb = x[idx]
            yb = y[idx]
            kernels.batch_loss_grad(xb, yb, w1, b1, w2, b2, gw1, gb1, gw2, gb2)
            flat -= hyper.learning_rate * grad
    return flat - start.flat


def predict_logits(params: ModelParams, features: np.ndarray) -> np.ndarray:
    """Logits for a full dataset, evaluated in fixed-size chunks."""
    x = np.ascontiguousarray(features, dtype=np.float64)
    w1, b1, w2, b2 = params.views()
    chunks = [kernels.batch_forward(x[lo:lo + EVAL_BATCH], w1, b1, w2, b2)
              for lo in range(0, x.shape[0], EVAL_BATCH)]
    return np.concatenate(chunks, axis=0)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=1, keepdims=True))


def mean_loss(params: ModelParams, features: np.ndarray, labels: np.ndarray) -> float:
    """Mean softmax cross-entropy of params on the given samples."""
    if features.shape[0] == 0:
        raise ValueError("dataset must be non-empty")
    log_probs = _log_softmax(predict_logits(params, features))
    return -float(np.mean(log_probs[np.arange(features.shape[0]), labels]))


def evaluate(params: ModelParams, dataset: Dataset) -> Metrics:
    """Mean loss, accuracy, and per-class / macro P-R-F1 (argmax prediction)."""
    if dataset.size == 0:
        raise ValueError("dataset must be non-empty")
    log_probs = _log_softmax(predict_logits(params, dataset.features))
    loss = -float(np.mean(log_probs[np.arange(dataset.size), dataset.labels]))
    predictions = np.argmax(log_probs, axis=1)
    return classification_metrics(predictions, dataset.labels, dataset.num_classes, loss=loss)


def save_params(params: ModelParams, blob_path, meta_path=None) -> None:
    """Checkpoint: little-endian float64 blob + JSON sidecar for the arch."""
    blob_path = Path(blob_path)
    meta_path = Path(meta_path) if meta_path else blob_path.with_suffix(blob_path.suffix + ".json")
    blob_path.write_bytes(params.flat.astype("<f8").tobytes())
    meta_path.write_text(json.dumps({"arch": list(params.arch)}) + "\n")


def load_params(blob_path, meta_path=None) -> ModelParams:
    blob_path = Path(blob_path)
    meta_path = Path(meta_path) if meta_path else blob_path.with_suffix(blob_path.suffix + ".json")
    arch = tuple(json.loads(meta_path.read_text())["arch"])
    flat = np.frombuffer(blob_path.read_bytes(), dtype="<f8").astype(np.float64)
    return ModelParams(arch, flat)
