"""Server-side model composition: zone-weighted aggregation and FedAvg.

Weighted sums accumulate in 64-bit in client-id order so repeated runs are
bit-identical. An all-excluded round produces a flagged skip, not an error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .client import ClientUpdate
from .model import ModelParams
from .trust import TrustConfig, TrustRecord


@dataclass(frozen=True)
class AggregateResult:
    """The combined update for one round; skipped means zero total weight."""

    delta: np.ndarray
    total_weight: float
    skipped: bool

    def to_dict(self) -> dict:
        return {"total_weight": self.total_weight, "skipped": self.skipped}


def _weighted_mean(updates: list[ClientUpdate], weights: dict[int, float]) -> AggregateResult:
    ordered = sorted(updates, key=lambda u: u.client_id)
    total = 0.0
    acc = np.zeros_like(ordered[0].delta)
    for u in ordered:
        w = weights[u.client_id]
        if w != 0.0:
            acc += w * u.delta
            total += w
    if total == 0.0:
        return AggregateResult(delta=np.zeros_like(acc), total_weight=0.0, skipped=True)
    return AggregateResult(delta=acc / total, total_weight=total, skipped=False)


def zone_weighted_aggregate(updates: list[ClientUpdate], records: list[TrustRecord],
                            cfg: TrustConfig) -> AggregateResult:
    """Weighted mean of client deltas with weights zone_weight(c) * n_c.

    If every weight is zero (all clients in an excluded zone) the result is
    a zero delta flagged as skipped.
    """
    by_id = {r.client_id: r for r in records}
    if len(by_id) != len(records) or {u.client_id for u in updates} != set(by_id):
        raise ValueError("updates and trust records must cover the same clients")
    weights = {u.client_id: cfg.zone_weight(by_id[u.client_id].zone) * u.n_c for u in updates}
    return _weighted_mean(updates, weights)


def fedavg_aggregate(updates: list[ClientUpdate]) -> AggregateResult:
    """Sample-count-weighted mean of client deltas (the vanilla baseline)."""
    if not updates:
        raise ValueError("fedavg requires at least one update")
    weights = {u.client_id: float(u.n_c) for u in updates}
    return _weighted_mean(updates, weights)


def apply_global_update(global_params: ModelParams, result: AggregateResult) -> ModelParams:
    """Additive global step; a skipped result returns the model unchanged."""
    if result.delta.shape != global_params.flat.shape:
        raise ValueError("aggregate delta shape does not match the global model")
    if result.skipped:
        return global_params.copy()
    return ModelParams(global_params.arch, global_params.flat + result.delta)
