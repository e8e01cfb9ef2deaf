#!/usr/bin/env python3
"""Run the full desk-scale experiment battery into an output directory.

Each named experiment runs with its default configuration (n = 1 where a
dimension is not forced by the experiment); every run writes its CSV tables,
plot data and summary.json under OUTDIR/<experiment>/.

Usage: python scripts/run_all_experiments.py [OUTDIR] [--seed K]
"""

import argparse
import sys
from pathlib import Path

from calderon.config import EXPERIMENT_NAMES, validate_config
from calderon.experiments import run_config

BASE = {
    "oracle-crosscheck": {"s": 0.5, "nodes": 64, "levels": 64,
                          "params": {"s_values": [0.25, 0.5, 0.75]}},
    "duality": {"s": 0.5, "nodes": 64, "levels": 64},
    "bridge-residual": {"s": 0.5, "nodes": 64, "levels": 64},
    "decay-slopes": {"s": 0.5},
    "density": {"dim": 2, "s": 0.5, "nodes": 24, "levels": 24, "seed": 11},
    "tikhonov-sweep": {"s": 0.5, "nodes": 48, "levels": 48},
    "distinguishability": {"s": 0.5, "nodes": 48, "levels": 48},
}


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("outdir", nargs="?", default="out")
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args()

    all_passed = True
    for name in EXPERIMENT_NAMES:
        raw = {"experiment": name, **BASE[name]}
        cfg = validate_config(raw)
        summary = run_config(cfg, Path(args.outdir) / name, seed=args.seed)
        status = "PASS" if summary.passed else "FAIL"
        print(f"[{status}] {name:22s} ({summary.wall_clock_s:.1f}s)")
        all_passed = all_passed and summary.passed
    return 0 if all_passed else 1


if __name__ == "__main__":
    sys.exit(main())
