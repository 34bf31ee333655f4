"""Anomaly-detection phase: PCA reduction, clustering scores, threshold.

Operates purely on the current round's updates and the server's validation
losses; no client ground truth enters here. Anomaly scores are distances to
the majority cluster's centroid after 2-means in the reduced space, and the
threshold is calibrated from the low-validation-loss half of the cohort.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .client import ClientUpdate
from .numerics import PcaModel, RngStream, kmeans, pca_fit, pca_transform, wcss

THRESHOLD_FLOOR = 1e-6  # keeps the anomaly/threshold ratio well-defined

DEFAULT_COMPONENTS = 5


@dataclass(frozen=True)
class AnomalyReport:
    """Per-round output of the anomaly phase."""

    round_index: int
    client_ids: tuple[int, ...]
    scores: np.ndarray
    tau_star: float
    reduced: np.ndarray | None
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "round": self.round_index,
            "client_ids": list(self.client_ids),
            "scores": self.scores.tolist(),
            "tau_star": self.tau_star,
            "degenerate": self.degenerate,
            "reduced": self.reduced.tolist() if self.reduced is not None else None,
        }


def stack_deltas(updates: list[ClientUpdate]) -> np.ndarray:
    """Client deltas as rows, ordered by client id."""
    ordered = sorted(updates, key=lambda u: u.client_id)
    return np.stack([u.delta for u in ordered])


def reduce_updates(updates: list[ClientUpdate], k: int = DEFAULT_COMPONENTS) -> tuple[PcaModel, np.ndarray]:
    """PCA-fit this round's stacked deltas and return per-client coordinates.

    k is clipped to n-1 (at n clients, centered rows have rank at most n-1).
    The fit is per-round only; no state crosses rounds.
    """
    if len(updates) < 2:
        raise ValueError("anomaly detection requires at least 2 client updates")
    if k < 1:
        raise ValueError("k must be >= 1")
    deltas = stack_deltas(updates)
    k = min(k, deltas.shape[0] - 1, deltas.shape[1])
    model = pca_fit(deltas, k)
    reduced = pca_transform(model, deltas)
    if model.degenerate:
        reduced = np.zeros_like(reduced)
    return model, reduced


def anomaly_scores(reduced: np.ndarray, rng: RngStream) -> np.ndarray:
    """Distance of each row to the majority cluster's centroid after 2-means.

    The majority cluster is the larger one; on a size tie, the one with the
    smaller within-cluster sum of squares. Degenerate (zero-spread) input
    yields all-zero scores.
    """
    points = np.asarray(reduced, dtype=np.float64)
    n = points.shape[0]
    if n < 2:
        raise ValueError("anomaly scoring requires at least 2 clients")
    if not np.any(points != points[0]):
        return np.zeros(n)

    assignments, centroids = kmeans(points, 2, rng)
    sizes = np.bincount(assignments, minlength=2)
    if sizes[0] != sizes[1]:
        majority = int(np.argmax(sizes))
    else:
        spreads = [wcss(points[assignments == c], np.zeros(sizes[c], dtype=np.int64),
                        centroids[c][None, :]) for c in (0, 1)]
        majority = int(np.argmin(spreads))
    return np.sqrt(np.sum((points - centroids[majority]) ** 2, axis=1))


def estimate_threshold(scores: np.ndarray, validation_losses: np.ndarray) -> float:
    """Anomaly threshold from the low-loss reference half of the cohort.

    Reference set: clients whose validation loss is <= the median loss;
    the threshold is the maximum anomaly score inside that set, floored at
    THRESHOLD_FLOOR.
    """
    scores = np.asarray(scores, dtype=np.float64)
    losses = np.asarray(validation_losses, dtype=np.float64)
    if scores.shape != losses.shape or scores.ndim != 1 or scores.shape[0] < 2:
        raise ValueError("scores and losses must be aligned vectors of length >= 2")
    reference = scores[losses <= np.median(losses)]
    return max(float(reference.max()), THRESHOLD_FLOOR)


def threshold_over_all(scores: np.ndarray) -> float:
    """Threshold variant that skips validation: max score over all clients.

    Used by the no-synthetic-validation ablation.
    """
    scores = np.asarray(scores, dtype=np.float64)
    return max(float(scores.max()), THRESHOLD_FLOOR)
