"""Trust scoring and learning-zone assignment.

Each client's update is applied to a temporary copy of the global model and
scored on the server's validation set; the trust score combines the
normalized anomaly score, validation loss, and update magnitude, each term
clamped to [0, 1] so fixed zone thresholds stay meaningful across rounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .client import ClientUpdate
from .dataset import Dataset
from .detection import AnomalyReport
from .model import ModelParams, mean_loss
from .numerics import l2_norm

ZONE_HIGH = 1
ZONE_UNCERTAIN = 2
ZONE_LOW = 3


@dataclass(frozen=True)
class TrustConfig:
    """Weights and thresholds for trust scoring and zone assignment.

    anomaly/loss/gradient weights normally sum to 1; sums below 1 are
    allowed (the no-synthetic-validation ablation zeroes the loss weight
    without renormalizing). Zone weights must be non-increasing.
    """

    anomaly_weight: float = 0.4
    loss_weight: float = 0.4
    gradient_weight: float = 0.2
    tau_high: float = 0.6
    tau_low: float = 0.4
    zone_weights: tuple[float, float, float] = (1.0, 0.5, 0.0)

    def __post_init__(self):
        w = (self.anomaly_weight, self.loss_weight, self.gradient_weight)
        if any(v < 0 for v in w):
            raise ValueError("trust weights must be nonnegative")
        total = sum(w)
        if not 0.0 < total <= 1.0 + 1e-9:
            raise ValueError(f"trust weights must sum to (0, 1], got {total}")
        if not 0.0 < self.tau_low < self.tau_high <= total + 1e-9:
            raise ValueError("need 0 < tau_low < tau_high <= sum of trust weights")
        zw = self.zone_weights
        if len(zw) != 3 or any(v < 0 for v in zw) or not zw[0] >= zw[1] >= zw[2]:
            raise ValueError("zone_weights must be 3 nonnegative non-increasing values")

    def zone_weight(self, zone: int) -> float:
        return self.zone_weights[zone - 1]


@dataclass(frozen=True)
class TrustRecord:
    """Defense state for one client in one round."""

    client_id: int
    anomaly_score: float
    validation_loss: float
    gradient_magnitude: float
    trust_score: float
    zone: int

    def to_dict(self) -> dict:
        return {
            "client_id": self.client_id,
            "anomaly_score": self.anomaly_score,
            "validation_loss": self.validation_loss,
            "gradient_magnitude": self.gradient_magnitude,
            "trust_score": self.trust_score,
            "zone": self.zone,
        }


def temp_model(global_params: ModelParams, update: ClientUpdate) -> ModelParams:
    """Global model with one client's delta applied; the global is untouched."""
    if update.delta.shape != global_params.flat.shape:
        raise ValueError("update delta shape does not match the global model")
    return ModelParams(global_params.arch, global_params.flat + update.delta)


def validation_loss(temp: ModelParams, d_s: Dataset) -> float:
    """Mean cross-entropy of a temporary model on the validation set."""
    return mean_loss(temp, d_s.features, d_s.labels)


def _clamp01(v: float) -> float:
    return min(max(v, 0.0), 1.0)


def trust_score(anomaly: float, loss: float, magnitude: float, tau_star: float,
                max_loss: float, max_magnitude: float, cfg: TrustConfig) -> float:
    """Convex combination of the three clamped trust terms.

    Anomaly term 1 - A/tau*, loss term 1 - L/max_L, gradient term G/max_G;
    each clamped to [0, 1]. A zero max magnitude zeroes the gradient term; a
    zero max loss makes the loss term 1 for everyone.
    """
    if tau_star <= 0.0:
        raise ValueError("tau_star must be positive")
    anomaly_term = _clamp01(1.0 - anomaly / tau_star)
    loss_term = 1.0 if max_loss == 0.0 else _clamp01(1.0 - loss / max_loss)
    gradient_term = 0.0 if max_magnitude == 0.0 else _clamp01(magnitude / max_magnitude)
    return (cfg.anomaly_weight * anomaly_term
            + cfg.loss_weight * loss_term
            + cfg.gradient_weight * gradient_term)


def assign_zone(score: float, cfg: TrustConfig) -> int:
    """Zone 1 at score >= tau_high, Zone 2 down to tau_low, Zone 3 below."""
    if score >= cfg.tau_high:
        return ZONE_HIGH
    if score >= cfg.tau_low:
        return ZONE_UNCERTAIN
    return ZONE_LOW


def phase2(global_params: ModelParams, updates: list[ClientUpdate],
           anomaly: AnomalyReport, d_s: Dataset, cfg: TrustConfig,
           losses: np.ndarray | None = None) -> list[TrustRecord]:
    """Score every client and assign learning zones; one record per client.

    Validation losses may be passed in when already computed during
    threshold estimation; otherwise each client's temporary model is
    evaluated here. Records come back ordered by client id.
    """
    ordered = sorted(updates, key=lambda u: u.client_id)
    if tuple(u.client_id for u in ordered) != anomaly.client_ids:
        raise ValueError("anomaly report does not cover these updates")
    if losses is None:
        losses = np.array([validation_loss(temp_model(global_params, u), d_s) for u in ordered])
    else:
        losses = np.asarray(losses, dtype=np.float64)
        if losses.shape != (len(ordered),):
            raise ValueError("losses must align with the updates")

    magnitudes = np.array([l2_norm(u.delta) for u in ordered])
    max_loss = float(losses.max())
    max_magnitude = float(magnitudes.max())

    records = []
    for i, upd in enumerate(ordered):
        score = trust_score(float(anomaly.scores[i]), float(losses[i]), float(magnitudes[i]),
                            anomaly.tau_star, max_loss, max_magnitude, cfg)
        records.append(TrustRecord(
            client_id=upd.client_id,
            anomaly_score=float(anomaly.scores[i]),
            validation_loss=float(losses[i]),
            gradient_magnitude=float(magnitudes[i]),
            trust_score=score,
            zone=assign_zone(score, cfg),
        ))
    return records


def binary_filter_records(updates: list[ClientUpdate], anomaly: AnomalyReport,
                          losses: np.ndarray) -> list[TrustRecord]:
    """Trust-score-free variant: exclude a client iff its anomaly score
    exceeds the threshold, keep everyone else at full weight.

    Used by the binary-filter ablation; kept clients get trust score 1 /
    Zone 1, excluded ones 0 / Zone 3, so downstream weighting and detection
    metrics work unchanged.
    """
    ordered = sorted(updates, key=lambda u: u.client_id)
    if tuple(u.client_id for u in ordered) != anomaly.client_ids:
        raise ValueError("anomaly report does not cover these updates")
    records = []
    for i, upd in enumerate(ordered):
        excluded = float(anomaly.scores[i]) > anomaly.tau_star
        records.append(TrustRecord(
            client_id=upd.client_id,
            anomaly_score=float(anomaly.scores[i]),
            validation_loss=float(losses[i]),
            gradient_magnitude=l2_norm(upd.delta),
            trust_score=0.0 if excluded else 1.0,
            zone=ZONE_LOW if excluded else ZONE_HIGH,
        ))
    return records
