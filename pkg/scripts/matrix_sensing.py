#!/usr/bin/env python3
"""Gaussian matrix sensing (d=100, r=5, m=2000): wide vs compressed.

The nominal step size is divided by the measurement count internally since
the training loss is the raw squared residual over all m measurements.
"""

import argparse

from dln.experiments import default_config, run


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="dln_runs/sensing")
    ap.add_argument("--seeds", default="0,1,2")
    ap.add_argument("--m", type=int, default=2000)
    ap.add_argument("--iters", type=int, default=1400)
    args = ap.parse_args()

    cfg = default_config(
        "sense",
        seeds=tuple(int(s) for s in args.seeds.split(",")),
        m=args.m,
        T=args.iters,
        out_dir=args.out,
    )
    result = run(cfg, echo=print)
    print(f"artifacts in {result.out_dir}")


if __name__ == "__main__":
    main()
