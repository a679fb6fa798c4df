#!/usr/bin/env python3
"""Ablation sweeps on synthetic matrix completion.

Axes: the outer-layer rate multiplier alpha (0.5..10 in steps of 0.25),
wide-model initialization (orthogonal vs uniform), depth (2 vs 3), and the
bottleneck width r_hat. summary.csv per sweep collects final recovery error,
iterations to the recovery threshold, and training/SVD wall-clock.
"""

import argparse

import numpy as np

from dln.experiments import ablate, default_config


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="dln_runs/ablations")
    ap.add_argument("--axis", default="alpha", choices=["alpha", "init", "depth", "rhat"])
    ap.add_argument("--seeds", default="0,1")
    ap.add_argument("--p", type=float, default=0.3)
    args = ap.parse_args()

    values = {
        "alpha": [round(v, 2) for v in np.arange(0.5, 10.0 + 1e-9, 0.25)],
        "init": ["orthogonal", "uniform"],
        "depth": [2, 3],
        "rhat": [12, 20, 40, 75],
    }[args.axis]

    cfg = default_config(
        "complete",
        p=args.p,
        seeds=tuple(int(s) for s in args.seeds.split(",")),
        out_dir=f"{args.out}/{args.axis}",
    )
    out = ablate(cfg, args.axis, values)
    print(f"summary at {out / 'summary.csv'}")


if __name__ == "__main__":
    main()
