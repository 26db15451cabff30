#!/usr/bin/env python3
"""Run the full reproduction bundle: every shipped scenario through `reproduce`.

Artifacts land in <out>/<scenario>/ with one JSON report plus the CSV data
files per scenario. Exit code is the worst exit code seen.
"""

import argparse
import sys

from qds.cli import SHIPPED, parse_scenario, run, shipped_scenario_text


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="reproduction", help="output root directory")
    args = parser.parse_args()

    worst = 0
    for name in SHIPPED:
        scenario = parse_scenario(shipped_scenario_text(name))
        code = run("reproduce", scenario, f"{args.out}/{name}")
        print(f"{name}: exit {code}")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
