#!/usr/bin/env python3
"""Run one of the bundled experiment configs and summarize the results.

Examples:
    python3 scripts/run_experiments.py chaos_sweep
    python3 scripts/run_experiments.py full_suite --out /tmp/full --seed 1234
    python3 scripts/run_experiments.py /path/to/custom.yaml
"""

import argparse
import sys
from pathlib import Path

from chaoslab.cli import cmd_report, cmd_run

CONFIG_DIR = Path(__file__).resolve().parent / "configs"


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("config",
                        help="bundled config name (chaos_sweep, full_suite) "
                             "or a path to a YAML file")
    parser.add_argument("--out", default=None,
                        help="output directory (default: results/<name>)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config master seed")
    args = parser.parse_args()

    config = Path(args.config)
    if not config.exists():
        config = CONFIG_DIR / f"{args.config}.yaml"
    if not config.exists():
        parser.error(f"no such config: {args.config} "
                     f"(bundled: {[p.stem for p in CONFIG_DIR.glob('*.yaml')]})")

    out = Path(args.out) if args.out else Path("results") / config.stem
    code = cmd_run(str(config), str(out), args.seed)
    print(f"\nresults in {out}/ (exit {code})\n")
    cmd_report(str(out / "results.csv"))
    return code


if __name__ == "__main__":
    sys.exit(main())
