#!/usr/bin/env python3
"""Deep matrix factorization: wide vs compressed recovery-error curves.

Five seeded runs at the reference settings (d=100, r=10, r_hat=20, L=3,
eps=1e-3, eta=10, alpha=5). The compressed network should sit at or below
the wide one at every logged iterate while costing far less per step.
"""

import argparse

from dln.experiments import default_config, run


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="dln_runs/factorization")
    ap.add_argument("--seeds", default="0,1,2,3,4")
    ap.add_argument("--iters", type=int, default=3000)
    args = ap.parse_args()

    cfg = default_config(
        "factorize",
        seeds=tuple(int(s) for s in args.seeds.split(",")),
        T=args.iters,
        out_dir=args.out,
    )
    result = run(cfg, echo=print)
    print(f"artifacts in {result.out_dir}")


if __name__ == "__main__":
    main()
