"""Instability runs over several dilations; delta should grow and T shrink with lam.

    python scripts/lambda_sweep.py --lams 1.001 1.01 1.05 --workers 2
"""

import argparse
import sys

from nlslab.config import load_config
from nlslab.experiment import ExperimentConfig, run_lambda_sweep


def main() -> int:
    cfg = load_config()
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="JSON config file")
    ap.add_argument("--lams", type=float, nargs="+", default=cfg["sweep"]["lambdas"])
    ap.add_argument("--workers", type=int, default=cfg["sweep"]["workers"])
    ap.add_argument("--out", default="runs/sweep", help="output directory (sweep.json)")
    args = ap.parse_args()

    ec = ExperimentConfig.instability(load_config(args.config))
    ec.output_dir = args.out
    res = run_lambda_sweep(ec, args.lams, args.workers)
    print(f"{'lam':>8} {'delta':>12} {'T':>10}  status")
    for lam, d, t, s in zip(res.lambdas, res.deltas, res.T_estimates, res.statuses):
        print(f"{lam:8.4g} {d:12.4e} {t if t is None else f'{t:10.6f}'}  {s}")
    print(f"delta increasing: {res.delta_increasing}   T decreasing: {res.T_decreasing}")
    return 0 if res.delta_increasing and res.T_decreasing else 2


if __name__ == "__main__":
    sys.exit(main())
