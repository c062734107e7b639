#!/usr/bin/env python3
"""Run every shipped study config and collect CSV/SVG/manifest under results/.

Usage: python scripts/run_all_studies.py [--out results] [--only NAME ...]
"""

import argparse
import sys
from pathlib import Path

from eigshape.cli import main as cli_main

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="results")
    parser.add_argument("--only", nargs="*", help="config stems, e.g. square_dirichlet")
    args = parser.parse_args()

    configs = sorted(CONFIG_DIR.glob("*.cfg"))
    if args.only:
        configs = [c for c in configs if c.stem in set(args.only)]
    if not configs:
        print("no configs selected", file=sys.stderr)
        return 2
    for cfg in configs:
        print(f"== {cfg.stem}")
        code = cli_main(["study", str(cfg), "--out", args.out])
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
