#!/usr/bin/env python3
"""Train a spectrally-seeded compressed network under full observation and
verify its logged singular values against the independent scalar recursion.

Equivalent to `dln oracle`; prints PASS/FAIL and writes oracle.json.
"""

import argparse
import sys

from dln.cli import main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="dln_runs/oracle")
    ap.add_argument("--iters", type=int, default=1000)
    args = ap.parse_args()
    return cli_main(["oracle", "--out", args.out, "--T", str(args.iters)])


if __name__ == "__main__":
    sys.exit(main())
