#!/usr/bin/env python3
"""Run every committed experiment config and report a pass/fail table.

First run (or --record-baseline) writes the baseline files; later runs
compare against them.  Exit code is nonzero if any experiment fails its
invariants or drifts from its baseline.
"""

import argparse
import sys
from pathlib import Path

from strongmeans import cli

ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default=str(ROOT / "out"))
    ap.add_argument("--baselines", default=str(ROOT / "baselines"))
    ap.add_argument("--record-baseline", action="store_true")
    args = ap.parse_args()

    results = {}
    for cfg in sorted((ROOT / "configs").glob("*.json")):
        argv = ["run", str(cfg), "--out", args.out,
                "--baselines", args.baselines, "--jobs", str(args.jobs)]
        if args.record_baseline:
            argv.append("--record-baseline")
        results[cfg.stem] = cli.main(argv)

    width = max(len(k) for k in results)
    print("-" * (width + 8))
    worst = 0
    for name, rc in results.items():
        print(f"{name:<{width}}  {'ok' if rc == 0 else f'FAIL({rc})'}")
        worst = max(worst, rc)
    return worst


if __name__ == "__main__":
    sys.exit(main())
