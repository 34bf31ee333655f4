"""Command-line entry point.

Subcommands: run (one experiment), ablate (component ablation table),
sweep (malicious-count sweep under both defenses), validate-config.
Exit codes: 0 success, 2 usage or config validation failure, 1 runtime
failure. The fully resolved config is echoed to stdout and is itself a
valid config file that reproduces the run.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from .dataset import AttackSpec
from .numerics import derive_seed
from .orchestrator import (ConfigError, ExperimentConfig, MnistSource, Seeds, SyntheticSource,
                           config_from_dict, run_ablation, run_experiment)
from .reporting import emit_reports, write_csv

USAGE_EXIT = 2
RUNTIME_EXIT = 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="securefed",
                                     description="Deterministic federated-learning simulator "
                                                 "with a two-phase malicious-client defense.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment config (JSON)")
    common.add_argument("--out", default=None,
                        help="output directory (default: $SECUREFED_OUT or ./out)")
    common.add_argument("--seed", type=int, default=None,
                        help="override all four seeds, derived from this value")
    common.add_argument("--clients", type=int, default=None, help="override num_clients")
    common.add_argument("--malicious-count", type=int, default=None)
    common.add_argument("--rounds", type=int, default=None)
    common.add_argument("--defense", choices=["securefed", "fedavg"], default=None)
    common.add_argument("--ablation", choices=["none", "no_pca", "no_synth", "binary_filter"],
                        default=None)
    common.add_argument("--mnist-images", default=None, help="override training image file")
    common.add_argument("--mnist-labels", default=None, help="override training label file")
    common.add_argument("--mnist-test-images", default=None, help="override test image file")
    common.add_argument("--mnist-test-labels", default=None, help="override test label file")
    common.add_argument("--synthetic", action="store_true",
                        help="replace the dataset source with the synthetic generator defaults")

    sub.add_parser("run", parents=[common], help="run one experiment")
    sub.add_parser("validate-config", parents=[common],
                   help="validate and echo the resolved config without running")
    sub.add_parser("ablate", parents=[common], help="run the four-row component ablation")
    sweep = sub.add_parser("sweep", parents=[common],
                           help="run a malicious-count sweep under both defenses")
    sweep.add_argument("--malicious-counts", required=True,
                       help="comma-separated counts, e.g. 0,6,10")
    return parser


def _apply_overrides(cfg: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    changes: dict = {}
    if args.seed is not None:
        changes["seeds"] = Seeds(data=derive_seed(args.seed, "data"),
                                 model=derive_seed(args.seed, "model"),
                                 clients=derive_seed(args.seed, "clients"),
                                 defense=derive_seed(args.seed, "defense"))
    if args.clients is not None:
        changes["num_clients"] = args.clients
    if args.malicious_count is not None:
        changes["malicious_count"] = args.malicious_count
    if args.rounds is not None:
        changes["rounds"] = args.rounds
    if args.defense is not None:
        changes["defense"] = args.defense
    if args.ablation is not None:
        changes["ablation"] = args.ablation
    if args.synthetic:
        changes["dataset"] = SyntheticSource()
    mnist_flags = (args.mnist_images, args.mnist_labels, args.mnist_test_images,
                   args.mnist_test_labels)
    if any(p is not None for p in mnist_flags):
        current = cfg.dataset if isinstance(cfg.dataset, MnistSource) else None
        paths = []
        for flag, attr in zip(mnist_flags, ("train_images", "train_labels",
                                            "test_images", "test_labels")):
            if flag is not None:
                paths.append(str(Path(flag).resolve()))
            elif current is not None:
                paths.append(getattr(current, attr))
            else:
                raise ConfigError([f"--mnist-* overrides need a mnist dataset or all four flags "
                                   f"(missing {attr})"])
        changes["dataset"] = MnistSource(*paths)
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    path = Path(args.config)
    if not path.is_file():
        raise ConfigError([f"config file not found: {path}"])
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError([f"config is not valid JSON: {e}"])
    cfg = config_from_dict(raw, base_dir=path.parent)
    if cfg.name == "experiment" and "name" not in raw:
        cfg = dataclasses.replace(cfg, name=path.stem)
    return _apply_overrides(cfg, args)


def _out_dir(args: argparse.Namespace, cfg: ExperimentConfig) -> Path:
    root = args.out or os.environ.get("SECUREFED_OUT") or "out"
    return Path(root) / cfg.name


def _echo(cfg: ExperimentConfig) -> None:
    print(json.dumps(cfg.to_dict(), indent=2))


def _write_resolved(cfg: ExperimentConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved_config.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    _echo(cfg)
    out = _out_dir(args, cfg)
    _write_resolved(cfg, out)
    report = run_experiment(cfg)
    emit_reports(report, out)
    final = report.final_metrics
    print(f"[{cfg.name}] defense={cfg.defense} ablation={cfg.ablation} "
          f"rounds={cfg.rounds} accuracy={final.accuracy:.4f} macro_f1={final.macro_f1:.4f}")
    if report.detection_metrics is not None:
        dm = report.detection_metrics
        rate = "n/a" if dm.detection_rate is None else f"{dm.detection_rate:.2f}"
        print(f"[{cfg.name}] detection_rate={rate} false_positive_rate={dm.false_positive_rate:.2f}")
    print(f"[{cfg.name}] reports written to {out}")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    _echo(cfg)
    return 0


def _cmd_ablate(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    _echo(cfg)
    out = _out_dir(args, cfg)
    _write_resolved(cfg, out)
    rows, reports = run_ablation(cfg)
    for mode, report in reports.items():
        emit_reports(report, out / mode)
    write_csv(out / "ablation.csv",
              ["configuration", "ablation", "accuracy", "detection_rate"],
              [[r.label, r.mode, r.accuracy,
                r.detection_rate if r.detection_rate is not None else ""] for r in rows])
    for r in rows:
        rate = "n/a" if r.detection_rate is None else f"{r.detection_rate:.4f}"
        print(f"[{cfg.name}] {r.label}: accuracy={r.accuracy:.4f} detection_rate={rate}")
    print(f"[{cfg.name}] reports written to {out}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    counts_raw = [c for c in args.malicious_counts.split(",") if c.strip() != ""]
    if not counts_raw:
        raise ConfigError(["--malicious-counts must list at least one count"])
    try:
        counts = [int(c) for c in counts_raw]
    except ValueError:
        raise ConfigError([f"--malicious-counts must be integers, got {args.malicious_counts!r}"])

    cfg = _load_config(args)
    _echo(cfg)
    out = _out_dir(args, cfg)
    _write_resolved(cfg, out)
    header = ["defense", "malicious_count", "accuracy",
              "macro_precision", "macro_recall", "macro_f1"]
    rows: list[list] = []
    try:
        for defense in ("fedavg", "securefed"):
            for count in counts:
                scenario = dataclasses.replace(cfg, defense=defense, malicious_count=count,
                                               ablation="none",
                                               name=f"{cfg.name}-{defense}-m{count}")
                report = run_experiment(scenario)
                emit_reports(report, out / f"{defense}-m{count}")
                m = report.final_metrics
                rows.append([defense, count, m.accuracy, m.macro_precision,
                             m.macro_recall, m.macro_f1])
                print(f"[{cfg.name}] {defense} malicious={count} accuracy={m.accuracy:.4f}")
    except Exception as e:
        write_csv(out / "summary.csv", header, rows)
        (out / "PARTIAL").write_text(f"sweep aborted: {e}\n")
        raise
    write_csv(out / "summary.csv", header, rows)
    print(f"[{cfg.name}] sweep summary written to {out / 'summary.csv'}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "validate-config": _cmd_validate,
    "ablate": _cmd_ablate,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as e:
        print(str(e), file=sys.stderr)
        return USAGE_EXIT
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
