"""Command-line driver: capture conversion, dataset assembly, federated
training runs and report summaries.

Subcommands: ``extract`` | ``assemble`` | ``train`` | ``report``.
Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric
failure.  ``FEDIDS_THREADS`` caps how many experiment repetitions run
in parallel (default 1); results are identical at any parallelism
because every repetition derives its own random streams.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

from . import dataset as ds
from . import pcap
from .attack import AttackSpec
from .config import ExperimentConfig, parse_config_file
from .errors import FedidsError, InputError, NumericError
from .federation import FederationConfig, run_experiment
from .metrics import IterationMetrics, MetricsReport
from .nn import AdamHyper, LocalTrainConfig
from .preprocess import fit_scaler, split
from .rng import RngStream, derive_seed

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


# ---------------------------------------------------------------- extract


def cmd_extract(args) -> int:
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    pcap_files: list[Path] = []
    skipped_other = 0
    for raw in args.inputs:
        path = Path(raw)
        if path.is_dir():
            for child in sorted(path.iterdir()):
                if child.suffix == ".pcap" and child.is_file():
                    pcap_files.append(child)
                elif child.is_file():
                    skipped_other += 1
        elif path.suffix == ".pcap" and path.is_file():
            pcap_files.append(path)
        elif path.is_file():
            skipped_other += 1
        else:
            print(f"error: no such input {path}", file=sys.stderr)
            return EXIT_DATA

    if skipped_other:
        _warn(f"skipped {skipped_other} non-pcap file(s)")
    if not pcap_files:
        _warn("0 files converted")
        return EXIT_OK

    failures = []
    for path in pcap_files:
        try:
            rows, skips = pcap.convert(path)
        except (FedidsError, OSError) as exc:
            failures.append(f"{path}: {exc}")
            continue
        target = out_dir / (path.stem + ".csv")
        pcap.emit_csv(rows, target)
        note = f" ({skips.total()} packet(s) skipped)" if skips.total() else ""
        print(f"{path} -> {target}: {len(rows)} rows{note}")

    if failures:
        print(f"{len(failures)} file(s) failed:", file=sys.stderr)
        for line in failures:
            print(f"  {line}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


# ---------------------------------------------------------------- assemble


def cmd_assemble(args) -> int:
    csv_dir = Path(args.csv_dir)
    if not csv_dir.is_dir():
        print(f"error: {csv_dir} is not a directory", file=sys.stderr)
        return EXIT_DATA
    files = sorted(csv_dir.glob("*.csv"))
    if not files:
        print(f"error: no csv files in {csv_dir}", file=sys.stderr)
        return EXIT_DATA

    groups: dict[str, list] = {}
    for path in files:
        labels = ds.derive_labels(path.name)
        key = f"{'mal' if labels[0] else 'leg'}_{labels[3]}"
        groups.setdefault(key, []).extend(ds.load_csv(path, labels))

    ordered = sorted(groups.items())
    records = ds.assemble(ordered, args.rows_per_group, RngStream(args.seed))
    ds.write_assembled_csv(records, args.output)
    print(
        f"assembled {len(records)} rows from {len(ordered)} groups "
        f"({args.rows_per_group} rows each) -> {args.output}"
    )
    return EXIT_OK


# ---------------------------------------------------------------- train


_OVERRIDABLE = (
    "dataset",
    "output_dir",
    "rows_per_group",
    "test_fraction",
    "seed",
    "n_clients",
    "batch_size",
    "epochs",
    "iterations",
    "learning_rate",
    "repetitions",
    "attack_enabled",
    "attack_client",
    "attack_port",
    "attack_mode",
    "checkpoint",
    "pretrain_fraction",
    "overlap_pretrain",
)


def effective_config(args) -> ExperimentConfig:
    cfg = parse_config_file(args.config) if args.config else ExperimentConfig()
    overrides = {
        name: getattr(args, name)
        for name in _OVERRIDABLE
        if getattr(args, name, None) is not None
    }
    return dataclasses.replace(cfg, **overrides)


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _summary_rows(reports: list[MetricsReport]) -> list[list]:
    rows = []
    for rep in reports:
        last = rep.final_training_scores()
        rows.append(
            [
                str(rep.experiment_id),
                last.accuracy,
                last.precision,
                last.recall,
                last.f1,
                rep.test_accuracy,
                rep.test_loss,
            ]
        )
    averages = ["average"] + [
        float(sum(row[i] for row in rows) / len(rows)) for i in range(1, 7)
    ]
    rows.append(averages)
    return rows


def write_reports(reports: list[MetricsReport], out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now(timezone.utc).isoformat()
    for rep in reports:
        payload = rep.to_dict()
        payload["timestamp"] = stamp
        _write_json(out_dir / f"exp_{rep.experiment_id:02d}.json", payload)

    with open(out_dir / "iterations.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("experiment,iteration,accuracy,precision,recall,f1\n")
        for rep in reports:
            for it in rep.iterations:
                fh.write(
                    f"{rep.experiment_id},{it.iteration},{it.accuracy!r},"
                    f"{it.precision!r},{it.recall!r},{it.f1!r}\n"
                )

    with open(out_dir / "summary.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(
            "experiment,train_accuracy,train_precision,train_recall,train_f1,"
            "test_accuracy,test_loss\n"
        )
        for row in _summary_rows(reports):
            fh.write(",".join(row[0:1] + [repr(v) for v in row[1:]]) + "\n")


def print_summary(reports: list[MetricsReport]) -> None:
    print("experiment  train_acc  train_prec  train_rec  train_f1  test_acc  test_loss")
    for row in _summary_rows(reports):
        cells = [f"{row[0]:>10}"] + [f"{v:9.4f}" for v in row[1:]]
        print("  ".join(cells))


def cmd_train(args) -> int:
    try:
        cfg = effective_config(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    problems = cfg.validate()
    if cfg.dataset is None:
        problems.insert(0, "no dataset given (use --dataset or the config file)")
    if problems:
        print("configuration errors:", file=sys.stderr)
        for line in problems:
            print(f"  {line}", file=sys.stderr)
        return EXIT_USAGE

    records = ds.load_assembled_csv(cfg.dataset)
    data = ds.drop_nulls(records)
    if len(data) < 2:
        print("error: dataset has fewer than 2 usable rows", file=sys.stderr)
        return EXIT_DATA
    print(f"loaded {len(records)} rows, {len(data)} after null drop")

    scaler = fit_scaler(data.features)
    parts = split(data, cfg.test_fraction, cfg.seed)
    print(f"split: {len(parts.train)} training rows, {len(parts.test)} test rows")

    attack = None
    if cfg.attack_enabled:
        attack = AttackSpec(
            target_client=cfg.attack_client,
            match_port=cfg.attack_port,
            mode=cfg.attack_mode,
        )

    echo = cfg.to_dict()
    out_dir = Path(cfg.output_dir)
    checkpoint_dir = str(out_dir / "checkpoints") if cfg.checkpoint else None

    def run_one(rep_index: int) -> MetricsReport:
        fed = FederationConfig(
            n_clients=cfg.n_clients,
            iterations=cfg.iterations,
            local=LocalTrainConfig(
                epochs=cfg.epochs,
                batch_size=cfg.batch_size,
                adam=AdamHyper(learning_rate=cfg.learning_rate),
            ),
            pretrain_fraction=cfg.pretrain_fraction,
            overlap_pretrain=cfg.overlap_pretrain,
            seed=derive_seed(cfg.seed, rep_index),
        )
        return run_experiment(
            parts,
            scaler,
            fed,
            attack=attack,
            experiment_id=rep_index,
            config_echo=echo,
            checkpoint_dir=checkpoint_dir,
        )

    try:
        workers = max(1, int(os.environ.get("FEDIDS_THREADS", "1") or "1"))
    except ValueError:
        _warn("FEDIDS_THREADS is not an integer; running repetitions serially")
        workers = 1
    rep_ids = range(1, cfg.repetitions + 1)
    if workers == 1:
        reports = [run_one(rep) for rep in rep_ids]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run_one, rep_ids))

    write_reports(reports, out_dir)
    print_summary(reports)
    print(f"reports written to {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------- report


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    files = sorted(run_dir.glob("exp_*.json"))
    if not files:
        print(f"error: no experiment reports in {run_dir}", file=sys.stderr)
        return EXIT_DATA
    reports = []
    for path in files:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        reports.append(
            MetricsReport(
                experiment_id=doc["experiment_id"],
                seed=doc["seed"],
                config=doc["config"],
                config_hash=doc["config_hash"],
                iterations=[
                    IterationMetrics(
                        iteration=it["iteration"],
                        accuracy=it["accuracy"],
                        precision=it["precision"],
                        recall=it["recall"],
                        f1=it["f1"],
                        undefined=it["undefined_scores"],
                        client_losses=it["client_losses"],
                        checkpoint=it.get("checkpoint"),
                    )
                    for it in doc["iterations"]
                ],
                test_accuracy=doc["final"]["test_accuracy"],
                test_loss=doc["final"]["test_loss"],
            )
        )
    print_summary(reports)
    return EXIT_OK


# ---------------------------------------------------------------- wiring


def build_parser() -> _Parser:
    parser = _Parser(prog="fedids", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_extract = sub.add_parser("extract", help="convert pcap captures to field CSVs")
    p_extract.add_argument("inputs", nargs="+", help="pcap files or directories")
    p_extract.add_argument("-o", "--output", required=True, help="output directory")
    p_extract.set_defaults(func=cmd_extract)

    p_assemble = sub.add_parser("assemble", help="sample per-group rows into one dataset")
    p_assemble.add_argument("csv_dir", help="directory of per-capture CSVs")
    p_assemble.add_argument("-o", "--output", required=True, help="assembled CSV path")
    p_assemble.add_argument("--rows-per-group", type=int, default=2000)
    p_assemble.add_argument("--seed", type=int, default=123)
    p_assemble.set_defaults(func=cmd_assemble)

    p_train = sub.add_parser("train", help="run repeated federated experiments")
    p_train.add_argument("--config", help="flat key = value config file")
    p_train.add_argument("--dataset", help="assembled dataset CSV")
    p_train.add_argument("--output-dir", dest="output_dir")
    p_train.add_argument("--test-fraction", dest="test_fraction", type=float)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--clients", dest="n_clients", type=int)
    p_train.add_argument("--batch-size", dest="batch_size", type=int)
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--iterations", type=int)
    p_train.add_argument("--learning-rate", dest="learning_rate", type=float)
    p_train.add_argument("--repetitions", type=int)
    p_train.add_argument(
        "--attack.enabled", dest="attack_enabled", action="store_const", const=True
    )
    p_train.add_argument("--attack.client", dest="attack_client", type=int)
    p_train.add_argument("--attack.port", dest="attack_port", type=int)
    p_train.add_argument("--attack.mode", dest="attack_mode")
    p_train.add_argument("--checkpoint", action="store_const", const=True)
    p_train.add_argument("--pretrain-fraction", dest="pretrain_fraction", type=float)
    p_train.add_argument(
        "--overlap-pretrain", dest="overlap_pretrain", action="store_const", const=True
    )
    p_train.set_defaults(func=cmd_train, rows_per_group=None)

    p_report = sub.add_parser("report", help="summarise experiment reports")
    p_report.add_argument("run_dir", help="directory holding exp_*.json")
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FedidsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
