#!/usr/bin/env python3
"""End-to-end desk experiment: suite -> train -> run -> compare.

Drives the installed CLI so the pipeline exercised here is exactly the one
a user would type.  The default configuration finishes on one core in a few
minutes; see --help for the knobs.
"""

import argparse
import sys
import time
from pathlib import Path

from ldectl.cli import main as cli


def sh(argv):
    print(f"$ ldectl {' '.join(argv)}", flush=True)
    code = cli(argv)
    if code != 0:
        sys.exit(code)


def run(opts):
    out = Path(opts.out)
    suite_dir = out / "suite"
    trained = out / "trained"
    runs = out / "runs"
    cmp_dir = out / "comparison"
    t0 = time.perf_counter()

    sh(["suite", "--seed", str(opts.seed), "--dim", str(opts.dim),
        "--train", str(opts.train_functions), "--test", str(opts.test_functions),
        "--out", str(suite_dir)])
    sh(["train", "--seed", str(opts.seed), "--suite", str(suite_dir),
        "--epochs", str(opts.epochs), "--hidden", str(opts.hidden),
        "--jobs", str(opts.jobs), "--out", str(trained)])
    sh(["run", "--seed", str(opts.seed), "--weights", str(trained / "weights.bin"),
        "--instances", str(suite_dir), "--role", "test",
        "--runs", str(opts.runs), "--budget", str(opts.budget or opts.dim * 10_000),
        "--jobs", str(opts.jobs), "--out", str(runs)])
    sh(["compare", "--results", str(runs / "results.csv"), "--ref", "lde",
        "--out", str(cmp_dir)])

    print(f"\nfinished in {time.perf_counter() - t0:.0f}s; "
          f"report at {cmp_dir / 'report.txt'}")


def parse_args(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--dim", type=int, default=10)
    ap.add_argument("--train-functions", type=int, default=6)
    ap.add_argument("--test-functions", type=int, default=8)
    ap.add_argument("--epochs", type=int, default=60)
    ap.add_argument("--hidden", type=int, default=32)
    ap.add_argument("--runs", type=int, default=11)
    ap.add_argument("--budget", type=int, default=None,
                    help="evaluations per run (default dim * 10^4)")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="desk_out")
    return ap.parse_args(argv)


if __name__ == "__main__":
    run(parse_args())
