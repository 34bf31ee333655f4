"""Experiment orchestration: the federated round loop and scenario drivers.

One round = broadcast, local training on every client, defense (anomaly
phase then trust phase) or plain FedAvg, weighted aggregation, global
update, test-set evaluation. Everything is driven by an ExperimentConfig
whose four seeds (data, model, clients, defense) make runs bit-reproducible.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aggregation import AggregateResult, apply_global_update, fedavg_aggregate, zone_weighted_aggregate
from .client import ClientProfile, make_cohort, run_client_round
from .dataset import AttackSpec, Dataset, generate_synthetic, holdout_split, load_mnist_idx, partition_iid
from .detection import (AnomalyReport, anomaly_scores, estimate_threshold,
                        reduce_updates, stack_deltas, threshold_over_all)
from .model import Hyper, ModelParams, evaluate, init_model
from .numerics import RngStream, derive_seed
from .reporting import DetectionMetrics, Metrics, detection_rate
from .trust import TrustConfig, TrustRecord, binary_filter_records, phase2, temp_model, validation_loss

DEFENSES = ("securefed", "fedavg")
ABLATIONS = ("none", "no_pca", "no_synth", "binary_filter")

ABLATION_LABELS = (
    ("SecureFed (Full)", "none"),
    ("w/o PCA", "no_pca"),
    ("w/o Synthetic Validation", "no_synth"),
    ("w/o Trust Score (Binary Filter)", "binary_filter"),
)

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid experiment configuration; carries every violation found."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid config:\n" + "\n".join(f"  - {v}" for v in self.violations))


@dataclass(frozen=True)
class Seeds:
    data: int = 11
    model: int = 22
    clients: int = 33
    defense: int = 44

    def to_dict(self) -> dict:
        return {"data": self.data, "model": self.model,
                "clients": self.clients, "defense": self.defense}


@dataclass(frozen=True)
class MnistSource:
    train_images: str
    train_labels: str
    test_images: str
    test_labels: str

    def to_dict(self) -> dict:
        return {"source": "mnist", "train_images": self.train_images,
                "train_labels": self.train_labels, "test_images": self.test_images,
                "test_labels": self.test_labels}


@dataclass(frozen=True)
class SyntheticSource:
    num_classes: int = 3
    per_class: int = 60
    test_per_class: int = 40
    dim: int = 16
    separation: float = 2.0

    def to_dict(self) -> dict:
        return {"source": "synthetic", "num_classes": self.num_classes,
                "per_class": self.per_class, "test_per_class": self.test_per_class,
                "dim": self.dim, "separation": self.separation}


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: MnistSource | SyntheticSource
    name: str = "experiment"
    num_clients: int = 20
    malicious_count: int = 0
    attack: AttackSpec = field(default_factory=lambda: AttackSpec(1, 7))
    rounds: int = 3
    hyper: Hyper = field(default_factory=Hyper)
    trust: TrustConfig = field(default_factory=TrustConfig)
    pca_k: int = 5
    hidden_dim: int = 64
    defense: str = "securefed"
    ablation: str = "none"
    seeds: Seeds = field(default_factory=Seeds)
    d_s_size: int = 1000

    def __post_init__(self):
        violations = []
        if self.rounds < 1:
            violations.append(f"rounds must be >= 1, got {self.rounds}")
        if self.num_clients < 1:
            violations.append(f"num_clients must be >= 1, got {self.num_clients}")
        if not 0 <= self.malicious_count <= self.num_clients:
            violations.append(
                f"malicious_count must be in [0, num_clients={self.num_clients}], got {self.malicious_count}")
        if self.pca_k < 1:
            violations.append(f"pca_k must be >= 1, got {self.pca_k}")
        if self.hidden_dim < 1:
            violations.append(f"hidden_dim must be >= 1, got {self.hidden_dim}")
        if self.defense not in DEFENSES:
            violations.append(f"defense must be one of {DEFENSES}, got {self.defense!r}")
        if self.ablation not in ABLATIONS:
            violations.append(f"ablation must be one of {ABLATIONS}, got {self.ablation!r}")
        if self.defense == "fedavg" and self.ablation != "none":
            violations.append("ablation modes apply only to the securefed defense")
        if self.d_s_size < 1:
            violations.append(f"d_s_size must be >= 1, got {self.d_s_size}")
        if violations:
            raise ConfigError(violations)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "dataset": self.dataset.to_dict(),
            "num_clients": self.num_clients,
            "malicious_count": self.malicious_count,
            "attack": {"kind": self.attack.kind, "source_class": self.attack.source_class,
                       "target_class": self.attack.target_class},
            "rounds": self.rounds,
            "hyper": {"learning_rate": self.hyper.learning_rate,
                      "local_epochs": self.hyper.local_epochs,
                      "batch_size": self.hyper.batch_size},
            "trust": {"anomaly_weight": self.trust.anomaly_weight,
                      "loss_weight": self.trust.loss_weight,
                      "gradient_weight": self.trust.gradient_weight,
                      "tau_high": self.trust.tau_high, "tau_low": self.trust.tau_low,
                      "zone_weights": list(self.trust.zone_weights)},
            "pca_k": self.pca_k,
            "hidden_dim": self.hidden_dim,
            "defense": self.defense,
            "ablation": self.ablation,
            "seeds": self.seeds.to_dict(),
            "d_s_size": self.d_s_size,
        }


def _take(d: dict, allowed: dict[str, object], where: str, violations: list[str]) -> dict:
    """Shallow-validate keys of a config section and fill defaults."""
    unknown = set(d) - set(allowed)
    for key in sorted(unknown):
        violations.append(f"{where}: unknown key {key!r}")
    return {k: d.get(k, default) for k, default in allowed.items()}


def config_from_dict(raw: dict, base_dir=None) -> ExperimentConfig:
    """Build and validate an ExperimentConfig from parsed JSON.

    Relative dataset paths resolve against base_dir (normally the config
    file's directory) and are stored absolute, so the resolved-config echo
    reproduces the run from any working directory. Raises ConfigError
    listing every violation found.
    """
    violations: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["config root must be a JSON object"])
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        violations.append(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")

    top = _take(raw, {
        "schema_version": SCHEMA_VERSION, "name": "experiment", "dataset": None,
        "num_clients": 20, "malicious_count": 0, "attack": {}, "rounds": 3,
        "hyper": {}, "trust": {}, "pca_k": 5, "hidden_dim": 64,
        "defense": "securefed", "ablation": "none", "seeds": {}, "d_s_size": 1000,
    }, "config", violations)

    base = Path(base_dir) if base_dir is not None else Path.cwd()

    def resolve(p) -> str:
        return str((base / str(p)).resolve()) if not Path(str(p)).is_absolute() else str(p)

    dataset_cfg: MnistSource | SyntheticSource | None = None
    ds_raw = top["dataset"]
    if not isinstance(ds_raw, dict) or "source" not in ds_raw:
        violations.append("dataset: must be an object with a 'source' key")
    elif ds_raw["source"] == "mnist":
        fields = _take(ds_raw, {"source": "mnist", "train_images": None, "train_labels": None,
                                "test_images": None, "test_labels": None}, "dataset", violations)
        missing = [k for k in ("train_images", "train_labels", "test_images", "test_labels")
                   if not fields[k]]
        if missing:
            violations.append(f"dataset: missing path(s) {missing}")
        else:
            dataset_cfg = MnistSource(*(resolve(fields[k]) for k in
                                        ("train_images", "train_labels", "test_images", "test_labels")))
    elif ds_raw["source"] == "synthetic":
        fields = _take(ds_raw, {"source": "synthetic", "num_classes": 3, "per_class": 60,
                                "test_per_class": 40, "dim": 16, "separation": 2.0},
                       "dataset", violations)
        try:
            dataset_cfg = SyntheticSource(int(fields["num_classes"]), int(fields["per_class"]),
                                          int(fields["test_per_class"]), int(fields["dim"]),
                                          float(fields["separation"]))
        except (TypeError, ValueError) as e:
            violations.append(f"dataset: {e}")
    else:
        violations.append(f"dataset.source must be 'mnist' or 'synthetic', got {ds_raw['source']!r}")

    def build(section: str, ctor, spec: dict):
        data = top[section] if isinstance(top[section], dict) else {}
        if not isinstance(top[section], dict):
            violations.append(f"{section}: must be an object")
        fields = _take(data, spec, section, violations)
        try:
            return ctor(**fields)
        except (TypeError, ValueError) as e:
            violations.append(f"{section}: {e}")
            return None

    attack = build("attack", AttackSpec,
                   {"kind": "label_flip", "source_class": 1, "target_class": 7})
    hyper = build("hyper", Hyper,
                  {"learning_rate": 0.05, "local_epochs": 2, "batch_size": 64})
    trust_raw = top["trust"] if isinstance(top["trust"], dict) else {}
    trust_fields = _take(trust_raw, {
        "anomaly_weight": 0.4, "loss_weight": 0.4, "gradient_weight": 0.2,
        "tau_high": 0.6, "tau_low": 0.4, "zone_weights": [1.0, 0.5, 0.0]}, "trust", violations)
    trust_cfg = None
    try:
        zw = trust_fields.pop("zone_weights")
        trust_cfg = TrustConfig(**trust_fields, zone_weights=tuple(float(v) for v in zw))
    except (TypeError, ValueError) as e:
        violations.append(f"trust: {e}")
    seeds = build("seeds", Seeds, {"data": 11, "model": 22, "clients": 33, "defense": 44})

    if violations or dataset_cfg is None or None in (attack, hyper, trust_cfg, seeds):
        raise ConfigError(violations or ["dataset: missing"])

    try:
        return ExperimentConfig(
            dataset=dataset_cfg, name=str(top["name"]), num_clients=int(top["num_clients"]),
            malicious_count=int(top["malicious_count"]), attack=attack, rounds=int(top["rounds"]),
            hyper=hyper, trust=trust_cfg, pca_k=int(top["pca_k"]), hidden_dim=int(top["hidden_dim"]),
            defense=str(top["defense"]), ablation=str(top["ablation"]), seeds=seeds,
            d_s_size=int(top["d_s_size"]),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError([str(e)])


# --------------------------------------------------------------------------
# Round loop
# --------------------------------------------------------------------------

@dataclass
class FederationState:
    """Mutable per-experiment state threaded through the round loop."""

    config: ExperimentConfig
    train_dataset: Dataset
    eval_dataset: Dataset
    d_s: Dataset
    profiles: list[ClientProfile]
    global_params: ModelParams
    round_index: int = 0


@dataclass(frozen=True)
class RoundReport:
    round_index: int
    anomaly: AnomalyReport | None
    trust_records: list[TrustRecord]
    aggregate: AggregateResult
    metrics: Metrics

    @property
    def tau_star(self) -> float | None:
        return self.anomaly.tau_star if self.anomaly is not None else None

    def zone_counts(self) -> tuple[int, int, int]:
        counts = [0, 0, 0]
        for r in self.trust_records:
            counts[r.zone - 1] += 1
        return tuple(counts)

    def to_dict(self) -> dict:
        return {
            "round": self.round_index,
            "anomaly": self.anomaly.to_dict() if self.anomaly is not None else None,
            "trust_records": [r.to_dict() for r in self.trust_records],
            "aggregate": self.aggregate.to_dict(),
            "metrics": self.metrics.to_dict(),
        }


@dataclass(frozen=True)
class ExperimentReport:
    config: dict
    rounds: list[RoundReport]
    final_metrics: Metrics
    detection_metrics: DetectionMetrics | None

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "rounds": [r.to_dict() for r in self.rounds],
            "final_metrics": self.final_metrics.to_dict(),
            "detection_metrics": self.detection_metrics.to_dict()
            if self.detection_metrics is not None else None,
        }


def _load_datasets(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    """(train, test) pair from the configured source."""
    src = cfg.dataset
    if isinstance(src, MnistSource):
        train = load_mnist_idx(src.train_images, src.train_labels)
        test = load_mnist_idx(src.test_images, src.test_labels)
        return train, test
    rng = RngStream(cfg.seeds.data)
    train = generate_synthetic(src.num_classes, src.per_class, src.dim, src.separation,
                               rng.derive("synthetic-train"))
    test = generate_synthetic(src.num_classes, src.test_per_class, src.dim, src.separation,
                              rng.derive("synthetic-test"))
    return train, test


def init_state(cfg: ExperimentConfig) -> FederationState:
    """Load data, cut the server validation holdout, shard, and init the model."""
    train_ds, test_ds = _load_datasets(cfg)
    if cfg.d_s_size >= test_ds.size:
        raise ConfigError([f"d_s_size={cfg.d_s_size} must be < test set size {test_ds.size}"])
    if cfg.attack.source_class >= train_ds.num_classes or cfg.attack.target_class >= train_ds.num_classes:
        raise ConfigError(["attack classes must be < the dataset's class count"])
    data_rng = RngStream(cfg.seeds.data)
    eval_ds, d_s = holdout_split(test_ds, cfg.d_s_size, data_rng.derive("holdout"))
    shards = partition_iid(train_ds, cfg.num_clients, data_rng.derive("partition"))
    profiles = make_cohort(cfg.num_clients, cfg.malicious_count, shards, cfg.attack,
                           base_seed=cfg.seeds.clients)
    arch = (train_ds.dim, cfg.hidden_dim, train_ds.num_classes)
    global_params = init_model(arch, RngStream(cfg.seeds.model))
    return FederationState(config=cfg, train_dataset=train_ds, eval_dataset=eval_ds,
                           d_s=d_s, profiles=profiles, global_params=global_params)


def run_round(state: FederationState, cfg: ExperimentConfig) -> RoundReport:
    """Execute one full round and advance the state."""
    r = state.round_index + 1
    updates = [run_client_round(p, state.global_params, cfg.hyper, state.train_dataset, r)
               for p in state.profiles]

    if cfg.defense == "fedavg":
        anomaly = None
        records: list[TrustRecord] = []
        aggregate = fedavg_aggregate(updates)
    else:
        ordered_ids = tuple(sorted(u.client_id for u in updates))
        if cfg.ablation == "no_pca":
            raw = stack_deltas(updates)
            score_input = raw
            reduced_for_report = None
            degenerate = not bool(np.any(raw != raw[0]))
        else:
            pca_model, reduced = reduce_updates(updates, cfg.pca_k)
            score_input = reduced
            reduced_for_report = reduced
            degenerate = pca_model.degenerate
        scores = anomaly_scores(score_input,
                                RngStream(derive_seed(cfg.seeds.defense, "clustering", r)))
        ordered_updates = sorted(updates, key=lambda u: u.client_id)
        losses = np.array([validation_loss(temp_model(state.global_params, u), state.d_s)
                           for u in ordered_updates])
        if cfg.ablation == "no_synth":
            tau = threshold_over_all(scores)
        else:
            tau = estimate_threshold(scores, losses)
        anomaly = AnomalyReport(round_index=r, client_ids=ordered_ids, scores=scores,
                                tau_star=tau, reduced=reduced_for_report, degenerate=degenerate)
        if cfg.ablation == "binary_filter":
            records = binary_filter_records(updates, anomaly, losses)
        elif cfg.ablation == "no_synth":
            no_loss_cfg = dataclasses.replace(cfg.trust, loss_weight=0.0)
            records = phase2(state.global_params, updates, anomaly, state.d_s,
                             no_loss_cfg, losses=losses)
        else:
            records = phase2(state.global_params, updates, anomaly, state.d_s,
                             cfg.trust, losses=losses)
        aggregate = zone_weighted_aggregate(updates, records, cfg.trust)

    state.global_params = apply_global_update(state.global_params, aggregate)
    state.round_index = r
    metrics = evaluate(state.global_params, state.eval_dataset)
    return RoundReport(round_index=r, anomaly=anomaly, trust_records=records,
                       aggregate=aggregate, metrics=metrics)


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run all rounds; deterministic given the config's seeds."""
    state = init_state(cfg)
    rounds = [run_round(state, cfg) for _ in range(cfg.rounds)]

    detection = None
    if cfg.defense == "securefed":
        histogram = [{"round": rep.round_index,
                      "zone1": rep.zone_counts()[0],
                      "zone2": rep.zone_counts()[1],
                      "zone3": rep.zone_counts()[2]} for rep in rounds]
        malicious_ids = [p.client_id for p in state.profiles if p.malicious]
        detection = detection_rate(rounds[-1].trust_records, malicious_ids,
                                   cfg.num_clients, zone_histogram=histogram)
    return ExperimentReport(config=cfg.to_dict(), rounds=rounds,
                            final_metrics=rounds[-1].metrics, detection_metrics=detection)


@dataclass(frozen=True)
class AblationRow:
    label: str
    mode: str
    accuracy: float
    detection_rate: float | None

    def to_dict(self) -> dict:
        return {"configuration": self.label, "ablation": self.mode,
                "accuracy": self.accuracy, "detection_rate": self.detection_rate}


def run_ablation(cfg: ExperimentConfig) -> tuple[list[AblationRow], dict[str, ExperimentReport]]:
    """Four securefed runs sharing all seeds: full, then each component removed.

    Returns the summary rows (fixed order: full, no_pca, no_synth,
    binary_filter) and the full per-mode reports.
    """
    rows = []
    reports: dict[str, ExperimentReport] = {}
    for label, mode in ABLATION_LABELS:
        variant = dataclasses.replace(cfg, defense="securefed", ablation=mode,
                                      name=f"{cfg.name}-{mode}" if mode != "none" else cfg.name)
        report = run_experiment(variant)
        rate = report.detection_metrics.detection_rate if report.detection_metrics else None
        rows.append(AblationRow(label=label, mode=mode,
                                accuracy=report.final_metrics.accuracy, detection_rate=rate))
        reports[mode] = report
    return rows, reports
