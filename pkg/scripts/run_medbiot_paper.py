#!/usr/bin/env python3
"""Reference experiment on the MedBIoT fine-grained captures.

Drives the full pipeline with the primary configuration (4 clients,
batch 64, 200 epochs, 50 iterations, learning rate 0.001, 10
repetitions): pcap conversion, per-group sampling of 2,000 rows,
null handling, the repeated federated runs, and optionally the same
with the port-23 label flip on client 0.

    python3 scripts/run_medbiot_paper.py --pcap-dir .../fine-grained/raw_dataset \
        --work-dir medbiot_run [--attack] [--skip-extract]

Budget hours, not minutes: the ten 50-iteration repetitions dominate.
Epoch-count and learning-rate comparisons are plain overrides, e.g.
`--epochs 400` or `--learning-rate 0.01`.
"""

import argparse
import sys
from pathlib import Path

from fedids.cli import main as fedids_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pcap-dir", help="directory of fine-grained .pcap files")
    parser.add_argument("--work-dir", default="medbiot_run", help="where outputs land")
    parser.add_argument("--attack", action="store_true", help="poison client 0 via port 23")
    parser.add_argument("--skip-extract", action="store_true", help="reuse converted CSVs")
    parser.add_argument("--epochs", type=int, default=200)
    parser.add_argument("--learning-rate", type=float, default=0.001)
    parser.add_argument("--iterations", type=int, default=50)
    parser.add_argument("--repetitions", type=int, default=10)
    args = parser.parse_args()

    work = Path(args.work_dir)
    csv_dir = work / "csv"
    assembled = work / "assembled.csv"
    run_dir = work / ("poisoned" if args.attack else "clean")

    if not args.skip_extract:
        if not args.pcap_dir:
            parser.error("--pcap-dir is required unless --skip-extract")
        code = fedids_main(["extract", args.pcap_dir, "-o", str(csv_dir)])
        if code != 0:
            return code

    if not assembled.exists():
        code = fedids_main(
            ["assemble", str(csv_dir), "-o", str(assembled), "--rows-per-group", "2000", "--seed", "123"]
        )
        if code != 0:
            return code

    train_args = [
        "train",
        "--dataset",
        str(assembled),
        "--output-dir",
        str(run_dir),
        "--epochs",
        str(args.epochs),
        "--learning-rate",
        str(args.learning_rate),
        "--iterations",
        str(args.iterations),
        "--repetitions",
        str(args.repetitions),
    ]
    if args.attack:
        train_args += ["--attack.enabled", "--attack.port", "23", "--attack.client", "0"]
    return fedids_main(train_args)


if __name__ == "__main__":
    sys.exit(main())
