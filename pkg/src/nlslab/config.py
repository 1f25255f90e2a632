"""Run configuration: the defaults table, JSON loading and dotted overrides.

A config file is a JSON object whose keys are a subset of ``DEFAULTS``;
missing keys take the default, unknown keys are an error.  Every
acceptance run is reproducible from an empty file plus a nonlinearity.

Defaults table
--------------
=================================  ==========================  ============================================
key                                default                     meaning
=================================  ==========================  ============================================
nonlinearity                       pure_power, p = 7           model spec (kind + parameters)
dim / omega                        1 / 1.0                     space dimension N, frequency
grid                               L = 20, M = 4096            desk grid (ground state, scans, levels)
groundstate.method                 auto                        closed_form | petviashvili | shooting
lambda_range                       0.5 .. 2.0, 400 points      log-spaced dilation scan
scan.seed_scale                    1.2                         scan seed is phi^seed_scale
admissibility                      1e-6 .. 1e3, 256 points     sampling of g for the checks
family                             20 widths x 10 amplitudes   Gaussians (+ phi) for the level estimates
evolve.initial                     ground state, lam = 1       initial data of the ``evolve`` command
evolve.controls                    t_max 1, dt_max 1e-2        integrator controls
instability.lam                    1.05                        u0 = phi^lam
instability.grid                   L = 20, M = 2^18            run grid (resolves the collapse to 1e3)
instability.certify_grid           L = 24, M = 4096            grid where phi is certified and m is read
instability.controls               cap 0.01, t_max 4           phase cap, sample every 0.01
stability_contrast.lam             1.05                        same construction, subcritical model
stability_contrast.controls        t_max 50, leak_tol 1e-3     radiation reaches the box edge
sweep.lambdas                      1.001, 1.01, 1.05, 1.1      lambda sweep
=================================  ==========================  ============================================
"""

from __future__ import annotations

import copy
import dataclasses
import json
from pathlib import Path

from .dynamics import IntegratorControls

OUTPUT_ENV = "NLSLAB_OUTPUT_DIR"


# values replaced wholesale rather than merged key by key
_ATOMIC = ("nonlinearity", "family")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def _controls(**changes) -> dict:
    """Every IntegratorControls field, so each one is addressable by an override."""
    out = {f.name: f.default for f in dataclasses.fields(IntegratorControls)}
    out.update(changes)
    return out

DEFAULTS: dict = {
    "nonlinearity": {"kind": "pure_power", "p": 7.0},
    "dim": 1,
    "omega": 1.0,
    "grid": {"half_length": 20.0, "points": 4096},
    "groundstate": {"method": "auto"},
    "lambda_range": {"min": 0.5, "max": 2.0, "count": 400},
    "scan": {"seed_scale": 1.2},
    "admissibility": {"s_min": 1e-6, "s_max": 1e3, "count": 256},
    "family": {
        "gaussian": {
            "widths": [0.25, 0.35, 0.5, 0.6, 0.7, 0.85, 1.0, 1.2, 1.4, 1.7,
                       2.0, 2.4, 2.8, 3.4, 4.0, 4.8, 5.6, 6.8, 8.0, 9.5],
            "amplitudes": [0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0],
        },
        "include_phi": True,
    },
    "evolve": {
        "initial": {"kind": "ground_state", "lam": 1.0, "amplitude": 1.0, "width": 1.0},
        "controls": _controls(),
    },
    "instability": {
        "lam": 1.05,
        "grid": {"half_length": 20.0, "points": 262144},
        "certify_grid": {"half_length": 24.0, "points": 4096},
        "controls": _controls(t_max=4.0, sample_interval=0.01, phase_rotation_cap=0.01),
        "chord_checks": True,
        "chord_tol": 1e-3,
        "variational": True,
        "entry_margin_floor": 1e-10,
    },
    "stability_contrast": {
        "nonlinearity": {"kind": "pure_power", "p": 3.0},
        "lam": 1.05,
        "grid": {"half_length": 20.0, "points": 4096},
        "controls": _controls(t_max=50.0, sample_interval=0.025, leak_tol=1e-3),
        "max_gradient_ratio": 2.0,
    },
    "sweep": {"lambdas": [1.001, 1.01, 1.05, 1.1], "workers": 1},
    "output_dir": "nlslab_out",
}


def _merge(base: dict, extra: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in extra.items():
        path = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key '{path}'")
        if isinstance(base[key], dict) and key not in _ATOMIC:
            if not isinstance(val, dict):
                raise ConfigError(f"config key '{path}' must be an object")
            out[key] = _merge(base[key], val, path + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path=None, overrides: list[str] | None = None) -> dict:
    """Defaults merged with the JSON file at ``path`` and then ``KEY=VALUE`` overrides."""
    user = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file '{path}' does not exist")
        try:
            user = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file '{path}' is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config file must hold a JSON object")
    cfg = _merge(DEFAULTS, user)
    for item in overrides or []:
        apply_override(cfg, item)
    return cfg


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(cfg: dict, item: str) -> None:
    """Set ``a.b.c=value`` in place; the path must already exist."""
    if "=" not in item:
        raise ConfigError(f"override '{item}' is not of the form key=value")
    key, text = item.split("=", 1)
    parts = key.strip().split(".")
    node = cfg
    for i, part in enumerate(parts):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"unknown config key '{'.'.join(parts[: i + 1])}'")
        if i == len(parts) - 1:
            node[part] = _parse_value(text)
        else:
            node = node[part]


def section(cfg: dict, name: str) -> dict:
    try:
        return cfg[name]
    except KeyError as exc:
        raise ConfigError(f"missing config key '{name}'") from exc
