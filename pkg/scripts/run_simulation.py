#!/usr/bin/env python3
"""Run a cohort scenario and write its metrics (JSON + CSV).

Regenerates the regression pin used by the test suite when pointed at the
demo scenario:

    python scripts/run_simulation.py fixtures/scenario_demo.yaml \
        --out tests/data/pinned_cohort_metrics.json
"""

import argparse
import sys
from pathlib import Path

from microadapt.simulator import load_scenario, run_cohort


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("scenario")
    parser.add_argument("--out", help="metrics JSON path (default: stdout)")
    parser.add_argument("--csv", help="also write per-iteration CSV here")
    args = parser.parse_args(argv)

    metrics = run_cohort(load_scenario(args.scenario))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(metrics.to_json(), encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(metrics.to_json(), end="")
    if args.csv:
        Path(args.csv).write_text(metrics.iterations_csv(), encoding="utf-8")
        print(f"wrote {args.csv}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
