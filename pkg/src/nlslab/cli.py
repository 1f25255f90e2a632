"""Command-line entry point.

    nlslab <subcommand> [--config FILE] [--override key.path=value ...] [--output-dir DIR]

Exit codes: 0 success / PASS, 1 numeric failure, 2 FAIL, 3 inconclusive,
64 bad configuration.  The output directory is taken from --output-dir,
then $NLSLAB_OUTPUT_DIR, then the config's ``output_dir``.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import field as fld
from .config import OUTPUT_ENV, ConfigError, load_config
from .dynamics import IntegratorControls, conservation_check, evolve
from .experiment import ExperimentConfig, run_instability, run_stability_contrast
from .groundstate import ground_state
from .io import write_csv, write_json
from .nonlinearity import NonlinearityModel, check_admissibility
from .scaling import scan
from .variational import build_family, run_variational

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 64

SUBCOMMANDS = ("groundstate", "scan-lambda", "variational", "evolve", "instability",
               "stability-contrast", "admissibility")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nlslab", description="Ground states, scaling structure and "
                                "blow-up experiments for focusing NLS.")
    p.add_argument("--version", action="version", version=f"nlslab {__version__}")
    sub = p.add_subparsers(dest="command", metavar="SUBCOMMAND")
    helps = {
        "groundstate": "compute and certify the ground state",
        "scan-lambda": "scan S, Q, I along the dilation family",
        "variational": "estimate d(omega), d_M and the mountain-pass level",
        "evolve": "integrate the flow from configured initial data",
        "instability": "run the blow-up experiment from phi^lam",
        "stability-contrast": "run the subcritical contrast",
        "admissibility": "sampled checks on the nonlinearity",
    }
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("--config", help="JSON config file (defaults apply to missing keys)")
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted-path override, e.g. lambda_range.count=400")
        sp.add_argument("--output-dir", help=f"output directory (else ${OUTPUT_ENV}, else config)")
    return p


def _model(cfg) -> NonlinearityModel:
    try:
        return NonlinearityModel.from_spec(cfg["nonlinearity"], int(cfg["dim"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad nonlinearity: {exc}") from exc


def _grid(cfg) -> fld.GridSpec:
    try:
        g = cfg["grid"]
        return fld.GridSpec(int(cfg["dim"]), float(g["half_length"]), int(g["points"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad grid: {exc}") from exc


def _omega(cfg) -> float:
    om = cfg["omega"]
    if not isinstance(om, (int, float)) or not om > 0:
        raise ConfigError(f"config key 'omega' must be positive, got {om!r}")
    return float(om)


def _gs(cfg):
    return ground_state(_model(cfg), _omega(cfg), _grid(cfg), cfg["groundstate"]["method"])


# -- subcommands ---------------------------------------------------------------------

def cmd_groundstate(cfg, out: Path) -> int:
    gs = _gs(cfg)
    write_json(out / "groundstate.json", gs.metadata())
    fld.write_field_csv(gs.field, out / "phi.csv", gs.metadata())
    print(f"m = {gs.level_m:.15g}  residual = {gs.residual_rel:.3e}  method = {gs.method}")
    return EXIT_OK


def cmd_scan(cfg, out: Path) -> int:
    lr = cfg["lambda_range"]
    try:
        rng = (float(lr["min"]), float(lr["max"]), int(lr["count"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad lambda_range: {exc}") from exc
    if not 0 < rng[0] < rng[1] or rng[2] < 5:
        raise ConfigError("lambda_range needs 0 < min < max and count >= 5")
    gs = _gs(cfg)
    seed = fld.rescale(gs.field, float(cfg["scan"]["seed_scale"]))
    res = scan(seed, _model(cfg), _omega(cfg), rng)
    write_csv(out / "scan.csv", ["lambda", "S", "Q", "I"], res.rows())
    write_json(out / "scan.json", res.summary())
    print(f"lambda0 = {res.lambda0}  lambda1 = {res.lambda1}  rows = {res.lambdas.size}")
    return EXIT_OK


def cmd_variational(cfg, out: Path) -> int:
    gs = _gs(cfg)
    family = build_family(cfg["family"], gs.field.grid, gs.field)
    rep = run_variational(family, _model(cfg), _omega(cfg), gs.level_m)
    rep.write(out / "variational.json", out / "variational_members.csv")
    print(f"m = {rep.m_ref:.12g}  d(omega) = {rep.d_omega_est:.12g}  d_M = {rep.d_M_est:.12g}  "
          f"c = {rep.c_est:.12g}")
    return EXIT_OK


def _initial(cfg, gs) -> fld.ComplexField:
    ini = cfg["evolve"]["initial"]
    kind = ini.get("kind")
    grid = gs.field.grid
    if kind == "ground_state":
        return fld.rescale(gs.field, float(ini["lam"]))
    if kind == "gaussian":
        a, w = float(ini["amplitude"]), float(ini["width"])
        return fld.sample_radial(grid, lambda r: a * np.exp(-(r / w) ** 2))
    raise ConfigError(f"unknown evolve.initial.kind {kind!r} (ground_state | gaussian)")


def cmd_evolve(cfg, out: Path) -> int:
    gs = _gs(cfg)
    try:
        controls = IntegratorControls(**cfg["evolve"]["controls"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad evolve.controls: {exc}") from exc
    u0 = _initial(cfg, gs)
    rec, verdict = evolve(u0, _model(cfg), _omega(cfg), controls, level=gs.level_m)
    rec.write_csv(out / "trajectory.csv")
    verdict.write_json(out / "verdict.json")
    md, sd = conservation_check(rec)
    print(f"{verdict.status}: termination {rec.termination} at t = {rec.final_time:.6g}; "
          f"mass drift {md:.2e}, S drift {sd:.2e}")
    return EXIT_OK


def cmd_instability(cfg, out: Path) -> int:
    ec = ExperimentConfig.instability(cfg)
    ec.output_dir = str(out)
    rep = run_instability(ec)
    print(f"{rep.outcome}: {rep.verdict.status}, delta = {rep.delta:.6e}, T ~ {rep.verdict.T_estimate}")
    return rep.exit_code


def cmd_contrast(cfg, out: Path) -> int:
    ec = ExperimentConfig.stability_contrast(cfg)
    ec.output_dir = str(out)
    rep = run_stability_contrast(ec)
    print(f"{rep.outcome}: {rep.verdict.status}, gradient ratio "
          f"{rep.trajectory['max_gradient_ratio']:.4f}")
    return rep.exit_code


def cmd_admissibility(cfg, out: Path) -> int:
    a = cfg["admissibility"]
    try:
        rng = (float(a["s_min"]), float(a["s_max"]), int(a["count"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad admissibility range: {exc}") from exc
    try:
        rep = check_admissibility(_model(cfg), rng, omega=_omega(cfg))
    except ValueError as exc:
        raise ConfigError(f"bad admissibility range: {exc}") from exc
    write_json(out / "admissibility.json", rep.to_dict())
    print(f"a1_ok = {rep.a1_ok}  supercritical = {rep.supercritical}  s0 = {rep.s0}")
    return EXIT_OK


HANDLERS = {
    "groundstate": cmd_groundstate, "scan-lambda": cmd_scan, "variational": cmd_variational,
    "evolve": cmd_evolve, "instability": cmd_instability, "stability-contrast": cmd_contrast,
    "admissibility": cmd_admissibility,
}


def parse_and_dispatch(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, args.override)
        out = Path(args.output_dir or os.environ.get(OUTPUT_ENV) or cfg["output_dir"])
        return HANDLERS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"nlslab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, ValueError) as exc:
        print(f"nlslab: numeric failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(parse_and_dispatch())
