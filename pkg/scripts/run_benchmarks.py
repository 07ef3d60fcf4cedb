#!/usr/bin/env python3
"""Rerun the benchmark table: monks1/2/3 always, eeg/phishing when their data
files exist. Writes per-task run directories under --out and prints a summary."""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from rffnet.cli import RunConfig, run_training

PROTOCOLS = {
    "monks1": dict(trials=10),
    "monks2": dict(trials=10, epochs="800", batch_size="16", lr=3e-3),
    "monks3": dict(trials=10),
    "eeg": dict(trials=3, layers="11"),
    "phishing": dict(trials=3, layers="11"),
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/benchmarks")
    parser.add_argument("--data", default="data", help="directory holding registry.txt")
    parser.add_argument("--tasks", default=None, help="comma list (default: all available)")
    args = parser.parse_args()
    registry = os.path.join(args.data, "registry.txt")
    wanted = args.tasks.split(",") if args.tasks else list(PROTOCOLS)
    rows = []
    for task in wanted:
        if task in ("eeg", "phishing") and not os.path.exists(os.path.join(args.data, f"{task}.csv")):
            print(f"{task}: data file missing, skipping (see scripts/fetch_data.py)")
            continue
        cfg = RunConfig(task=task, registry=registry,
                        out=os.path.join(args.out, task), **PROTOCOLS[task])
        results = run_training(cfg)
        accs = [r.test_acc for r in results]
        mean = sum(accs) / len(accs)
        std = (sum((a - mean) ** 2 for a in accs) / max(len(accs) - 1, 1)) ** 0.5
        rows.append((task, len(accs), mean, std))
    print()
    print(f"{'task':10s} {'trials':>6s} {'mean_acc':>9s} {'std_acc':>8s}")
    for task, trials, mean, std in rows:
        print(f"{task:10s} {trials:6d} {mean:9.4f} {std:8.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
