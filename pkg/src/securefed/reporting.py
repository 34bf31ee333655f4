"""Classification metrics, defense-quality metrics, and report emission.

All serialization is deterministic: dict insertion order is fixed, floats go
through Python's shortest round-trip repr, and files end with a single
newline, so identical runs produce byte-identical outputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ZONE_NAMES = ("zone1", "zone2", "zone3")


@dataclass(frozen=True)
class Metrics:
    """Confusion-matrix metrics for one model on one dataset."""

    loss: float
    accuracy: float
    per_class_precision: tuple[float, ...]
    per_class_recall: tuple[float, ...]
    per_class_f1: tuple[float, ...]
    macro_precision: float
    macro_recall: float
    macro_f1: float

    def to_dict(self) -> dict:
        return {
            "loss": self.loss,
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "per_class_precision": list(self.per_class_precision),
            "per_class_recall": list(self.per_class_recall),
            "per_class_f1": list(self.per_class_f1),
        }


@dataclass(frozen=True)
class DetectionMetrics:
    """How well the defense isolated the truly malicious clients.

    detection_rate is None when the run had no malicious clients (the ratio
    is undefined); rates are measured from the final round's zones.
    """

    detection_rate: float | None
    false_positive_rate: float
    zone_histogram: tuple[dict, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "detection_rate": self.detection_rate,
            "false_positive_rate": self.false_positive_rate,
            "zone_histogram": list(self.zone_histogram),
        }


def classification_metrics(predictions, labels, num_classes: int, loss: float = 0.0) -> Metrics:
    """Per-class and macro-averaged precision/recall/F1 from predictions.

    Classes with no predictions (or no true samples) get precision (recall)
    0 rather than NaN; F1 is 0 whenever precision + recall is 0.
    """
    pred = np.asarray(predictions, dtype=np.int64)
    true = np.asarray(labels, dtype=np.int64)
    if pred.shape != true.shape or pred.ndim != 1 or pred.size == 0:
        raise ValueError("predictions and labels must be equal-length non-empty vectors")
    if num_classes < 1:
        raise ValueError("num_classes must be >= 1")

    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(confusion, (true, pred), 1)

    tp = np.diag(confusion).astype(np.float64)
    predicted = confusion.sum(axis=0).astype(np.float64)
    actual = confusion.sum(axis=1).astype(np.float64)
    precision = np.divide(tp, predicted, out=np.zeros(num_classes), where=predicted > 0)
    recall = np.divide(tp, actual, out=np.zeros(num_classes), where=actual > 0)
    pr = precision + recall
    f1 = np.divide(2.0 * precision * recall, pr, out=np.zeros(num_classes), where=pr > 0)

    return Metrics(
        loss=float(loss),
        accuracy=float(tp.sum() / pred.size),
        per_class_precision=tuple(precision.tolist()),
        per_class_recall=tuple(recall.tolist()),
        per_class_f1=tuple(f1.tolist()),
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
    )


def detection_rate(final_records, malicious_ids, num_clients: int,
                   zone_histogram=()) -> DetectionMetrics:
    """Fraction of malicious clients in the low-trust zone at the final round.

    false_positive_rate is the analogous fraction over benign clients.
    Records must cover every client exactly once.
    """
    record_ids = {r.client_id for r in final_records}
    if len(final_records) != num_clients or record_ids != set(range(num_clients)):
        raise ValueError("records must cover every client exactly once")
    malicious = set(malicious_ids)
    benign = set(range(num_clients)) - malicious
    in_zone3 = {r.client_id for r in final_records if r.zone == 3}

    rate = len(in_zone3 & malicious) / len(malicious) if malicious else None
    fpr = len(in_zone3 & benign) / len(benign) if benign else 0.0
    return DetectionMetrics(detection_rate=rate, false_positive_rate=fpr,
                            zone_histogram=tuple(zone_histogram))


def _csv_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    """Minimal deterministic CSV writer (no quoting needed for our fields)."""
    lines = [",".join(header)]
    lines.extend(",".join(_csv_cell(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def emit_reports(report, out_dir) -> dict[str, Path]:
    """Write report.json, metrics.csv and trust_scores.csv for an experiment.

    `report` is an orchestrator.ExperimentReport. Returns the written paths.
    Identical reports serialize to byte-identical files.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "report": out / "report.json",
            "metrics": out / "metrics.csv",
            "trust_scores": out / "trust_scores.csv",
        }
        paths["report"].write_text(json.dumps(report.to_dict(), indent=2, allow_nan=False) + "\n")

        metric_rows = []
        trust_rows = []
        for rnd in report.rounds:
            zones = rnd.zone_counts()
            metric_rows.append([
                rnd.round_index,
                rnd.metrics.accuracy,
                rnd.metrics.macro_precision,
                rnd.metrics.macro_recall,
                rnd.metrics.macro_f1,
                zones[0], zones[1], zones[2],
                rnd.tau_star if rnd.tau_star is not None else "",
            ])
            for rec in rnd.trust_records:
                trust_rows.append([
                    rnd.round_index, rec.client_id, rec.anomaly_score,
                    rec.validation_loss, rec.gradient_magnitude,
                    rec.trust_score, rec.zone,
                ])
        write_csv(paths["metrics"],
                  ["round", "accuracy", "macro_precision", "macro_recall",
                   "macro_f1", "zone1", "zone2", "zone3", "tau_star"],
                  metric_rows)
        write_csv(paths["trust_scores"],
                  ["round", "client_id", "anomaly_score", "validation_loss",
                   "gradient_magnitude", "trust_score", "zone"],
                  trust_rows)
        return paths
    except OSError as e:
        raise OSError(f"failed writing reports under {out}: {e}") from e
