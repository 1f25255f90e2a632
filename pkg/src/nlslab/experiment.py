"""The instability pipeline (u0 = phi^lam, lam > 1) and its subcritical contrast.

``run_instability`` certifies the ground state, places u0 strictly inside
{S < m, Q < 0, I < 0}, integrates, and checks along the flow:

* no sample leaves the set,
* Q(u(t)) <= -delta with one delta = m - S(u0) for all t,
* f(t) = ||x u||^2 stays under f(0) + f'(0) t - delta t^2,
* the concavity chord bound S(u) - S(u^b0) >= Q(u) at the Q-root b0.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import field as fld
from .config import ConfigError, DEFAULTS, section
from .dynamics import BlowupVerdict, IntegratorControls, TrajectoryRecord, evolve
from .field import ComplexField, GridSpec
from .functionals import ScaledFunctionals, evaluate
from .groundstate import (GroundStateResult, closed_form_profile, ground_state, shoot_radial)
from .io import write_json
from .nonlinearity import NonlinearityModel, check_admissibility
from .scaling import RootNotBracketedError, find_lambda0
from .variational import build_family, run_variational

EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 2, 3


class EntryConditionError(ConfigError):
    """u0 is not strictly inside the invariant set; carries the measured margins."""

    def __init__(self, message: str, margins: dict):
        super().__init__(message)
        self.margins = margins


class OrderingError(ValueError):
    pass


def delta_of(S_u0: float, m: float) -> float:
    """delta = m - S(u0); defined only below the ground level."""
    if not S_u0 < m:
        raise OrderingError(f"S(u0) = {S_u0!r} is not below m = {m!r}")
    return m - S_u0


def _grid(spec: dict, dim: int, key: str) -> GridSpec:
    try:
        return GridSpec(dim, float(spec["half_length"]), int(spec["points"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad grid under '{key}': {exc}") from exc


def _controls(spec: dict, key: str) -> IntegratorControls:
    try:
        return IntegratorControls(**spec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad integrator controls under '{key}': {exc}") from exc


def _model(spec: dict, dim: int, key: str = "nonlinearity") -> NonlinearityModel:
    try:
        return NonlinearityModel.from_spec(spec, dim)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad nonlinearity under '{key}': {exc}") from exc


@dataclass
class ExperimentConfig:
    model: NonlinearityModel
    omega: float
    grid: GridSpec
    certify_grid: GridSpec
    lam: float
    controls: IntegratorControls
    family: dict | None = None
    method: str = "auto"
    chord_checks: bool = True
    chord_tol: float = 1e-3
    entry_margin_floor: float = 1e-10
    max_gradient_ratio: float = 2.0
    output_dir: str | None = None

    @property
    def dim(self) -> int:
        return self.model.dim

    @classmethod
    def instability(cls, cfg: dict = DEFAULTS) -> "ExperimentConfig":
        dim = int(cfg["dim"])
        sec = section(cfg, "instability")
        return cls(
            model=_model(section(cfg, "nonlinearity"), dim),
            omega=_positive(cfg["omega"], "omega"),
            grid=_grid(sec["grid"], dim, "instability.grid"),
            certify_grid=_grid(sec["certify_grid"], dim, "instability.certify_grid"),
            lam=_positive(sec["lam"], "instability.lam"),
            controls=_controls(sec["controls"], "instability.controls"),
            family=cfg["family"] if sec["variational"] else None,
            method=cfg["groundstate"]["method"],
            chord_checks=bool(sec["chord_checks"]),
            chord_tol=float(sec["chord_tol"]),
            entry_margin_floor=float(sec["entry_margin_floor"]),
            output_dir=cfg.get("output_dir"),
        )

    @classmethod
    def stability_contrast(cls, cfg: dict = DEFAULTS) -> "ExperimentConfig":
        dim = int(cfg["dim"])
        sec = section(cfg, "stability_contrast")
        grid = _grid(sec["grid"], dim, "stability_contrast.grid")
        return cls(
            model=_model(sec["nonlinearity"], dim, "stability_contrast.nonlinearity"),
            omega=_positive(cfg["omega"], "omega"),
            grid=grid,
            certify_grid=grid,
            lam=_positive(sec["lam"], "stability_contrast.lam"),
            controls=_controls(sec["controls"], "stability_contrast.controls"),
            method=cfg["groundstate"]["method"],
            chord_checks=False,
            max_gradient_ratio=float(sec["max_gradient_ratio"]),
            output_dir=cfg.get("output_dir"),
        )


def _positive(val, key) -> float:
    try:
        x = float(val)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key '{key}' must be a number") from exc
    if not (math.isfinite(x) and x > 0):
        raise ConfigError(f"config key '{key}' must be positive, got {val!r}")
    return x


@dataclass
class ChordTally:
    checked: int = 0
    passed: int = 0
    worst_margin: float = math.inf
    failures: list[float] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.checked >= 10 and self.passed == self.checked


@dataclass
class ExperimentReport:
    kind: str
    lam: float
    ground_state: dict
    admissibility: dict
    entry_conditions: dict
    delta: float | None
    epsilon_h1: float
    invariance_ok: bool
    q_bound_ok: bool
    parabola_ok: bool
    verdict: BlowupVerdict
    chord: dict
    variational: dict | None
    trajectory: dict
    outcome: str
    notes: list[str] = field(default_factory=list)
    record: TrajectoryRecord | None = field(default=None, repr=False)

    @property
    def exit_code(self) -> int:
        return {"PASS": EXIT_PASS, "FAIL": EXIT_FAIL}.get(self.outcome, EXIT_INCONCLUSIVE)

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("record")
        out["verdict"] = self.verdict.to_dict()
        out["exit_code"] = self.exit_code
        return out


# -- building blocks ----------------------------------------------------------------

def certified_ground_state(cfg: ExperimentConfig) -> GroundStateResult:
    return ground_state(cfg.model, cfg.omega, cfg.certify_grid, cfg.method, strict=True)


def phi_on_grid(cfg: ExperimentConfig, gs: GroundStateResult) -> ComplexField:
    """The certified profile carried over to the run grid."""
    if cfg.grid == cfg.certify_grid:
        return gs.field
    if gs.method == "closed_form":
        return fld.sample_profile(cfg.grid, closed_form_profile(cfg.model.degree, cfg.omega))
    if gs.method == "shooting":
        profile, _ = shoot_radial(cfg.model, cfg.dim, cfg.omega)
        return fld.sample_radial(cfg.grid, profile)
    return ground_state(cfg.model, cfg.omega, cfg.grid, "petviashvili", strict=False).field


def entry_conditions(u0: ComplexField, model: NonlinearityModel, omega: float, m: float,
                     floor: float) -> dict:
    rep = evaluate(u0, model, omega)
    scale = floor * rep.kinetic
    margins = {"S_margin": m - rep.S, "Q_margin": -rep.Q, "I_margin": -rep.I}
    flags = {"S_below_m": margins["S_margin"] > scale, "Q_negative": margins["Q_margin"] > scale,
             "I_negative": margins["I_margin"] > scale}
    return {**flags, **margins, "all": all(flags.values()), "S": rep.S, "Q": rep.Q, "I": rep.I,
            "kinetic": rep.kinetic, "noise_floor": scale}


def _chord_hook(model, omega, tol, tally: ChordTally):
    def hook(t, v, rep):
        if not rep.Q < 0:
            return
        sf = ScaledFunctionals(v, model, omega)
        try:
            b0 = find_lambda0(v, model, omega, scaled=sf)
        except (RootNotBracketedError, ValueError):
            tally.checked += 1
            tally.failures.append(t)
            return
        gap = rep.S - sf.dilation(b0).S
        margin = gap - rep.Q
        tally.checked += 1
        tally.worst_margin = min(tally.worst_margin, margin / abs(rep.Q))
        if margin >= -tol * abs(rep.Q):
            tally.passed += 1
        else:
            tally.failures.append(t)
    return hook


def _trajectory_summary(rec: TrajectoryRecord) -> dict:
    return {
        "termination": rec.termination, "steps": rec.steps, "rejected": rec.rejected,
        "final_time": rec.final_time, "samples": int(rec.times.size),
        "valid_samples": int(np.sum(rec.valid)), "gradient_ratio": rec.final_ratio,
        "max_leak": float(rec.boundary_leak.max()), "final_spectral_tail": float(rec.spectral_tail[-1]),
        "samples_in_set": int(sum(1 for m in rec.membership if m is not None and m.in_invariant_set)),
    }


def _write_outputs(report: ExperimentReport, out: Path, gs: GroundStateResult, name: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / f"{name}_report.json", report.to_dict())
    if report.record is not None:
        report.record.write_csv(out / f"{name}_trajectory.csv")
    report.verdict.write_json(out / f"{name}_verdict.json")
    fld.write_field_csv(gs.field, out / f"{name}_phi.csv", gs.metadata())


# -- pipelines ------------------------------------------------------------------------

def run_instability(cfg: ExperimentConfig, write: bool = True) -> ExperimentReport:
    notes = []
    adm = check_admissibility(cfg.model, omega=cfg.omega)
    if not adm.supercritical:
        raise ConfigError("instability runs need a supercritical model "
                          f"({'borderline' if adm.borderline else 'subcritical'} exponent given)")
    if not cfg.lam > 1:
        raise EntryConditionError(f"lam = {cfg.lam!r} does not exceed 1; u0 would not lie strictly inside the set",
                                  {"lam": cfg.lam})
    gs = certified_ground_state(cfg)
    m = gs.level_m
    phi = phi_on_grid(cfg, gs)
    u0 = fld.rescale(phi, cfg.lam, cfg.controls.leak_tol)
    entry = entry_conditions(u0, cfg.model, cfg.omega, m, cfg.entry_margin_floor)
    if not entry["all"]:
        raise EntryConditionError(
            "u0 = phi^lam is not strictly inside {S < m, Q < 0, I < 0}: "
            + ", ".join(f"{k} = {entry[k]:.3e}" for k in ("S_margin", "Q_margin", "I_margin")), entry)
    delta = delta_of(entry["S"], m)
    eps = fld.h1_norm(u0 - phi)

    tally = ChordTally()
    hook = _chord_hook(cfg.model, cfg.omega, cfg.chord_tol, tally) if cfg.chord_checks else None
    rec, verdict = evolve(u0, cfg.model, cfg.omega, cfg.controls, level=m, on_sample=hook)

    var = None
    if cfg.family is not None:
        family = build_family(cfg.family, cfg.certify_grid, gs.field)
        var = run_variational(family, cfg.model, cfg.omega, m).summary()

    invariance = verdict.sign_flips == 0
    checks = [invariance, verdict.q_bound_ok, verdict.parabola_ok]
    if cfg.chord_checks:
        checks.append(tally.ok)
    if verdict.status == "inconclusive":
        outcome = "INCONCLUSIVE"
    elif verdict.status == "blew_up" and all(checks):
        outcome = "PASS"
    else:
        outcome = "FAIL"
    if verdict.status == "blew_up" and verdict.T_estimate is not None:
        notes.append(f"singular time ~ {verdict.T_estimate:.10g}; parabola crossing bound "
                     f"{verdict.parabola_crossing:.6g}")
    report = ExperimentReport(
        "instability", cfg.lam, gs.metadata(), adm.to_dict(), entry, delta, eps, invariance,
        verdict.q_bound_ok, verdict.parabola_ok, verdict,
        {"enabled": cfg.chord_checks, "checked": tally.checked, "passed": tally.passed,
         "worst_relative_margin": tally.worst_margin if tally.checked else None, "ok": tally.ok},
        var, _trajectory_summary(rec), outcome, notes, rec)
    if write and cfg.output_dir:
        _write_outputs(report, Path(cfg.output_dir), gs, f"instability_lam{cfg.lam:g}")
    return report


def run_stability_contrast(cfg: ExperimentConfig, write: bool = True) -> ExperimentReport:
    """Same construction for a subcritical model; a stable window is the expected outcome."""
    notes = []
    adm = check_admissibility(cfg.model, omega=cfg.omega)
    gs = certified_ground_state(cfg)
    m = gs.level_m
    phi = phi_on_grid(cfg, gs)
    u0 = fld.rescale(phi, cfg.lam, cfg.controls.leak_tol) if cfg.lam != 1 else phi
    entry = entry_conditions(u0, cfg.model, cfg.omega, m, 0.0)
    eps = fld.h1_norm(u0 - phi)
    rec, verdict = evolve(u0, cfg.model, cfg.omega, cfg.controls, level=m)
    entered = any(mm.in_invariant_set for mm in rec.membership if mm is not None)
    ratio = float(rec.grad_norm.max() / rec.grad_norm[0])

    if adm.borderline:
        outcome = "BORDERLINE"
        notes.append("critical exponent: no pass/fail asserted")
    elif adm.supercritical:
        outcome = "INCONCLUSIVE"
        notes.append("model is supercritical; the contrast expects a subcritical one")
    elif verdict.status == "stable_window" and ratio <= cfg.max_gradient_ratio and not entered:
        outcome = "PASS"
    elif verdict.status == "inconclusive":
        outcome = "INCONCLUSIVE"
    else:
        outcome = "FAIL"
    delta = m - entry["S"] if entry["S"] < m else None
    report = ExperimentReport(
        "stability_contrast", cfg.lam, gs.metadata(), adm.to_dict(), entry, delta, eps, not entered,
        verdict.q_bound_ok, verdict.parabola_ok, verdict, {"enabled": False},
        None, {**_trajectory_summary(rec), "max_gradient_ratio": ratio}, outcome, notes, rec)
    if write and cfg.output_dir:
        _write_outputs(report, Path(cfg.output_dir), gs, f"contrast_lam{cfg.lam:g}")
    return report


@dataclass
class SweepResult:
    lambdas: list[float]
    deltas: list[float | None]
    T_estimates: list[float | None]
    statuses: list[str]
    delta_increasing: bool
    T_decreasing: bool
    reports: list[ExperimentReport] = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        out = asdict(self)
        out.pop("reports")
        return out


def _sweep_one(args):
    cfg, lam = args
    run = ExperimentConfig(**{**cfg.__dict__, "lam": lam, "family": None, "chord_checks": False})
    rep = run_instability(run, write=False)
    rep.record = None
    return rep


def run_lambda_sweep(cfg: ExperimentConfig, lambdas, workers: int = 1) -> SweepResult:
    """Independent instability runs over ``lambdas`` (sorted ascending)."""
    lambdas = sorted(float(x) for x in lambdas)
    jobs = [(cfg, lam) for lam in lambdas]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            reports = list(pool.map(_sweep_one, jobs))
    else:
        reports = [_sweep_one(j) for j in jobs]
    deltas = [r.delta for r in reports]
    Ts = [r.verdict.T_estimate for r in reports]
    d_inc = all(a is not None and b is not None and b > a for a, b in zip(deltas, deltas[1:]))
    t_dec = all(a is not None and b is not None and b < a for a, b in zip(Ts, Ts[1:]))
    res = SweepResult(lambdas, deltas, Ts, [r.verdict.status for r in reports], d_inc, t_dec, reports)
    if cfg.output_dir:
        write_json(Path(cfg.output_dir) / "sweep.json", res.summary())
    return res
