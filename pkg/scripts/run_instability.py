"""Blow-up experiment from phi^lam with a short console summary.

    python scripts/run_instability.py --lam 1.05 --out runs/inst
"""

import argparse
import json
import sys

from nlslab.config import load_config
from nlslab.experiment import ExperimentConfig, run_instability


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="JSON config file")
    ap.add_argument("--lam", type=float, default=None, help="dilation of the ground state (> 1)")
    ap.add_argument("--points", type=int, default=None, help="run-grid size (power of two)")
    ap.add_argument("--no-variational", action="store_true", help="skip the level estimates")
    ap.add_argument("--out", default="runs/instability", help="output directory")
    args = ap.parse_args()

    overrides = []
    if args.lam is not None:
        overrides.append(f"instability.lam={args.lam}")
    if args.points is not None:
        overrides.append(f"instability.grid.points={args.points}")
    if args.no_variational:
        overrides.append("instability.variational=false")
    ec = ExperimentConfig.instability(load_config(args.config, overrides))
    ec.output_dir = args.out
    rep = run_instability(ec)

    v = rep.verdict
    print(f"outcome        {rep.outcome}")
    print(f"verdict        {v.status} ({rep.trajectory['termination']}, {rep.trajectory['steps']} steps)")
    print(f"delta          {rep.delta:.6e}")
    print(f"eps (H1)       {rep.epsilon_h1:.6e}")
    print(f"T estimate     {v.T_estimate}")
    print(f"gradient x     {v.gradient_ratio:.1f}")
    print(f"checks         invariance {rep.invariance_ok}, Q bound {rep.q_bound_ok}, "
          f"parabola {rep.parabola_ok}, chord {rep.chord['passed']}/{rep.chord['checked']}")
    if rep.variational:
        print("levels         " + json.dumps({k: rep.variational[k] for k in
                                              ("m_ref", "d_omega_est", "d_M_est", "c_est")}))
    return rep.exit_code


if __name__ == "__main__":
    sys.exit(main())
