"""Level estimates: Nehari level d(omega), the level d_M on {Q = 0, I <= 0} and
the mountain-pass level c along rays.

Infima are replaced by minima over explicit profile families.  Equality
with the ground-state action m comes from the ground state being a
member; for families without it only the one-sided bounds (every
estimate >= m) are meaningful.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import field as fld
from .field import ComplexField, GridSpec
from .functionals import ScaledFunctionals
from .io import write_csv, write_json
from .nonlinearity import NonlinearityModel
from .scaling import RootNotBracketedError, find_q_root

MAX_DOUBLINGS = 60
LEVEL_TOL = 1e-6
SHOOTING_LEVEL_TOL = 1e-3


class ProjectionError(ArithmeticError):
    pass


class FamilyError(ValueError):
    pass


class RayError(ArithmeticError):
    pass


Member = tuple[str, ComplexField]


# -- families -----------------------------------------------------------------

def gaussian_family(grid: GridSpec, widths: Sequence[float], amplitudes: Sequence[float]) -> list[Member]:
    out = []
    for w in widths:
        for a in amplitudes:
            out.append((f"gauss_w{w:.4g}_a{a:.4g}",
                        fld.sample_radial(grid, lambda r, a=a, w=w: a * np.exp(-(r / w) ** 2))))
    return out


def sech_family(grid: GridSpec, widths: Sequence[float], powers: Sequence[float],
                amplitude: float = 1.0) -> list[Member]:
    out = []
    for w in widths:
        for q in powers:
            out.append((f"sech_w{w:.4g}_q{q:.4g}",
                        fld.sample_radial(grid, lambda r, w=w, q=q: amplitude / np.cosh(r / w) ** q)))
    return out


def build_family(spec: dict, grid: GridSpec, phi: ComplexField | None = None) -> list[Member]:
    """Family from its config form.

    Keys: ``gaussian: {widths, amplitudes}``, ``sech: {widths, powers}``,
    ``include_phi: bool`` and ``phi_scales: [lam, ...]`` (dilations of phi).
    """
    members: list[Member] = []
    if "gaussian" in spec:
        g = spec["gaussian"]
        members += gaussian_family(grid, g["widths"], g["amplitudes"])
    if "sech" in spec:
        s = spec["sech"]
        members += sech_family(grid, s["widths"], s["powers"], s.get("amplitude", 1.0))
    if spec.get("include_phi") or spec.get("phi_scales"):
        if phi is None:
            raise FamilyError("family asks for the ground state but none was supplied")
        if spec.get("include_phi"):
            members.append(("phi", phi))
        for lam in spec.get("phi_scales", []):
            members.append((f"phi_lam{lam:.4g}", fld.rescale(phi, float(lam))))
    if not members:
        raise FamilyError("empty profile family")
    return members


# -- Nehari projection -----------------------------------------------------------

@dataclass
class Projection:
    t_star: float
    field: ComplexField
    S: float
    I: float
    kinetic: float
    ray_max_ok: bool


def _ray_bracket(sf: ScaledFunctionals, max_doublings: int):
    lo, hi = 1.0, 1.0
    for _ in range(max_doublings):
        if sf.ray(hi).I < 0:
            break
        hi *= 2.0
    else:
        raise ProjectionError("I(t v) stays positive along the ray")
    for _ in range(max_doublings):
        if sf.ray(lo).I > 0:
            break
        lo *= 0.5
    else:
        raise ProjectionError("I(t v) stays negative near t = 0")
    return lo, hi


def nehari_project(v: ComplexField, model: NonlinearityModel, omega: float,
                   max_doublings: int = MAX_DOUBLINGS, ray_samples: int = 100) -> Projection:
    """Unique t* > 0 with I(t* v) = 0, and the check that S(t v) peaks there."""
    sf = ScaledFunctionals(v, model, omega)
    if sf.kinetic + sf.mass == 0:
        raise ProjectionError("zero profile has no Nehari point")
    lo, hi = _ray_bracket(sf, max_doublings)
    if hi > lo:
        # I(tv)/t^2 is monotone in t under the growth conditions on g(s)/s
        t_star = brentq(lambda t: sf.ray(t).I / (t * t), lo, hi, xtol=1e-15,
                        rtol=4 * np.finfo(float).eps, maxiter=500)
    else:
        t_star = 1.0
    rep = sf.ray(t_star)
    ts = np.linspace(0.0, 2.0 * t_star, ray_samples + 1)[1:]
    ray_S = np.array([sf.ray(t).S for t in ts])
    ray_max_ok = bool(ray_S.max() <= rep.S + 1e-12 * (abs(rep.S) + sf.kinetic * t_star**2))
    return Projection(t_star, v * t_star, rep.S, rep.I, rep.kinetic, ray_max_ok)


# -- level estimates ------------------------------------------------------------------

@dataclass
class MemberRow:
    member_id: str
    S_projected: float | None
    t_star: float | None
    lambda0: float | None
    admitted: bool
    constraint_violation: float = 0.0
    note: str = ""


def estimate_d_omega(family: Iterable[Member], model: NonlinearityModel, omega: float):
    """min over the family of S at the Nehari point; returns (value, rows)."""
    rows = []
    for mid, v in family:
        try:
            pr = nehari_project(v, model, omega)
        except ProjectionError as exc:
            rows.append(MemberRow(mid, None, None, None, False, note=str(exc)))
            continue
        rows.append(MemberRow(mid, pr.S, pr.t_star, None, True, abs(pr.I) / pr.kinetic))
    vals = [r.S_projected for r in rows if r.admitted]
    if not vals:
        raise FamilyError("no family member could be projected onto the Nehari manifold")
    return min(vals), rows


def estimate_d_M(family: Iterable[Member], model: NonlinearityModel, omega: float,
                 admit_tol: float = 1e-10):
    """min of S over members moved onto {Q = 0} by dilation and satisfying I <= 0.

    The dilated functionals come from the change-of-variables formulas, so
    no resampling error enters.  ``admit_tol`` (relative to K) absorbs the
    rounding of I at members that sit exactly on the Nehari manifold.
    """
    rows = []
    for mid, v in family:
        sf = ScaledFunctionals(v, model, omega)
        try:
            lam = find_q_root(v, model, omega)
        except (RootNotBracketedError, ValueError) as exc:
            rows.append(MemberRow(mid, None, None, None, False, note=str(exc)))
            continue
        rep = sf.dilation(lam)
        admitted = rep.I <= admit_tol * rep.kinetic
        rows.append(MemberRow(mid, rep.S, None, lam, bool(admitted), abs(rep.Q) / rep.kinetic,
                              "" if admitted else f"I = {rep.I:.3e} > 0 on Q = 0"))
    vals = [r.S_projected for r in rows if r.admitted]
    if not vals:
        raise FamilyError("no family member lies in {Q = 0, I <= 0} after dilation")
    return min(vals), rows


def _negative_amplitude(sf: ScaledFunctionals, start: float, max_doublings: int) -> float:
    a = start
    for _ in range(max_doublings):
        if sf.ray(a).S < 0:
            return a
        a *= 2.0
    raise RayError("S(t v) never becomes negative along the ray")


def ray_level(v: ComplexField, model: NonlinearityModel, omega: float, amplitude: float | None = None,
              samples: int = 400):
    """max over s in [0, 1] of S(s A v); returns (level, s_max, A)."""
    sf = ScaledFunctionals(v, model, omega)
    if amplitude is None:
        amplitude = _negative_amplitude(sf, 1.0, MAX_DOUBLINGS)
    elif not sf.ray(amplitude).S < 0:
        raise RayError(f"S(A v) = {sf.ray(amplitude).S:.6g} is not negative at A = {amplitude:g}")
    s = np.linspace(0.0, 1.0, samples + 1)
    vals = np.array([sf.ray(x * amplitude).S for x in s])
    i = int(np.argmax(vals))
    lo, hi = s[max(i - 1, 0)], s[min(i + 1, samples)]
    res = minimize_scalar(lambda x: -sf.ray(x * amplitude).S, bracket=(lo, s[i], hi), method="golden",
                          tol=1e-12)
    best = max(-float(res.fun), float(vals[i]))
    s_best = float(res.x) if -float(res.fun) >= vals[i] else float(s[i])
    return best, s_best, amplitude


def ray_max_count(v: ComplexField, model: NonlinearityModel, omega: float, t_max: float,
                  samples: int = 400) -> int:
    """Number of interior maxima of t -> S(t v) on (0, t_max] (sign changes of the slope)."""
    sf = ScaledFunctionals(v, model, omega)
    ts = np.linspace(0.0, t_max, samples + 1)
    d = np.diff([sf.ray(t).S for t in ts])
    return int(np.sum((d[:-1] > 0) & (d[1:] <= 0)))


def mountain_pass_level(seeds: Iterable[Member], model: NonlinearityModel, omega: float,
                        amplitude: float | None = None):
    """min over seeds of the ray level; returns (value, {member_id: level})."""
    levels = {}
    for mid, v in seeds:
        levels[mid] = ray_level(v, model, omega, amplitude)[0]
    if not levels:
        raise FamilyError("no ray seeds")
    return min(levels.values()), levels


# -- report -----------------------------------------------------------------------

@dataclass
class VariationalReport:
    m_ref: float
    d_omega_est: float
    d_M_est: float
    c_est: float
    family_size: int
    worst_constraint_violation: float
    tolerance: float = LEVEL_TOL
    members: list[MemberRow] = field(default_factory=list, repr=False)

    @property
    def one_sided_ok(self) -> bool:
        lo = self.m_ref - self.tolerance
        return self.d_omega_est >= lo and self.d_M_est >= lo and self.c_est >= lo

    @property
    def chain_ok(self) -> bool:
        """Equality chain m = d(omega) = d_M = c within tolerance."""
        return all(abs(x - self.m_ref) <= self.tolerance for x in (self.d_omega_est, self.d_M_est, self.c_est))

    def summary(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "members"}
        out.update(one_sided_ok=self.one_sided_ok, chain_ok=self.chain_ok)
        return out

    def write(self, json_path, csv_path) -> None:
        write_json(json_path, self.summary())
        write_csv(csv_path, ["member_id", "S_projected", "t_star", "lambda0", "admitted"],
                  ([r.member_id, _num(r.S_projected), _num(r.t_star), _num(r.lambda0), int(r.admitted)]
                   for r in self.members))


def _num(x):
    return "" if x is None else float(x)


def run_variational(family: Sequence[Member], model: NonlinearityModel, omega: float, m_ref: float,
                    tolerance: float = LEVEL_TOL) -> VariationalReport:
    d_om, rows_n = estimate_d_omega(family, model, omega)
    d_m, rows_m = estimate_d_M(family, model, omega)
    c_est, levels = mountain_pass_level(family, model, omega)
    merged = []
    for rn, rm in zip(rows_n, rows_m):
        merged.append(MemberRow(rn.member_id, rn.S_projected, rn.t_star, rm.lambda0, rm.admitted,
                                max(rn.constraint_violation, rm.constraint_violation if rm.admitted else 0.0)))
    worst = max((r.constraint_violation for r in merged), default=0.0)
    return VariationalReport(m_ref, d_om, d_m, c_est, len(family), worst, tolerance, merged)


def level_tolerance(method: str) -> float:
    return SHOOTING_LEVEL_TOL if method == "shooting" else LEVEL_TOL

