"""Ground states of -Lap phi + omega phi = g(phi).

Three independent routes: the closed-form 1-D solitary wave for pure
powers, the Petviashvili fixed point on the spectral grid, and radial
shooting on phi(0).  Every result is certified on the grid (residual,
Nehari and virial functionals).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from . import field as fld
from .field import ComplexField, GridSpec
from .functionals import FunctionalReport, evaluate, residual_rel
from .nonlinearity import NonlinearityModel, find_s0

RESIDUAL_TOL = 1e-6
IDENTITY_TOL = 1e-6


class ConvergenceError(ArithmeticError):
    pass


class DegenerateSeedError(ValueError):
    pass


class BracketError(ValueError):
    pass


class CertificationError(ArithmeticError):
    pass


@dataclass
class GroundStateResult:
    field: ComplexField
    omega: float
    level_m: float
    residual_rel: float
    method: str
    iterations: int
    report: FunctionalReport
    phi0: float | None = None

    @property
    def certified(self) -> bool:
        k = self.report.kinetic
        return (self.residual_rel <= RESIDUAL_TOL and abs(self.report.I) <= IDENTITY_TOL * k
                and abs(self.report.Q) <= IDENTITY_TOL * k and self.level_m > 0)

    def metadata(self) -> dict:
        return {
            "method": self.method,
            "omega": self.omega,
            "level_m": self.level_m,
            "residual_rel": self.residual_rel,
            "iterations": self.iterations,
            "I": self.report.I,
            "Q": self.report.Q,
            "kinetic": self.report.kinetic,
            "mass": self.report.mass,
            "phi0": self.phi0,
            "certified": self.certified,
        }


def certify(v: ComplexField, model: NonlinearityModel, omega: float, method: str,
            iterations: int = 0, phi0: float | None = None, strict: bool = True) -> GroundStateResult:
    rep = evaluate(v, model, omega)
    res = GroundStateResult(v, omega, rep.S, residual_rel(v, model, omega), method, iterations, rep, phi0)
    if strict and not res.certified:
        raise CertificationError(
            f"{method}: residual {res.residual_rel:.3e}, I/K {rep.I / rep.kinetic:.3e}, "
            f"Q/K {rep.Q / rep.kinetic:.3e}, m {rep.S:.6g}")
    return res


def closed_form_profile(p: float, omega: float):
    """phi(x) = [(p+1) omega/2]^(1/(p-1)) sech^(2/(p-1))((p-1) sqrt(omega) x / 2)."""
    amp = ((p + 1.0) * omega / 2.0) ** (1.0 / (p - 1.0))
    rate = 0.5 * (p - 1.0) * math.sqrt(omega)
    expo = 2.0 / (p - 1.0)

    def phi(x):
        return amp / np.cosh(rate * np.asarray(x)) ** expo

    return phi


def closed_form_1d(p: float, omega: float, grid: GridSpec, strict: bool = True) -> GroundStateResult:
    if grid.dim != 1:
        raise ValueError("closed form exists for N = 1 only")
    if not p > 1 or not omega > 0:
        raise ValueError("need p > 1 and omega > 0")
    model = NonlinearityModel.pure_power(p, 1)
    phi = closed_form_profile(p, omega)
    v = fld.sample_profile(grid, phi)
    return certify(v, model, omega, "closed_form", 0, float(phi(0.0)), strict)


def petviashvili_exponent(model: NonlinearityModel) -> float:
    if not model.is_power:
        raise ValueError("Petviashvili exponent needs a power-like model")
    p = model.degree
    return p / (p - 1.0)


def petviashvili(model: NonlinearityModel, omega: float, grid: GridSpec, seed: ComplexField,
                 gamma: float | None = None, tol: float = 1e-13, max_iter: int = 1000,
                 strict: bool = True) -> GroundStateResult:
    """w <- M[w]^gamma (omega - Lap)^-1 g(w),  M[w] = <(omega - Lap) w, w> / <g(w), w>."""
    if gamma is None:
        gamma = petviashvili_exponent(model)
    if seed.grid != grid:
        raise ValueError("seed lives on a different grid")
    w = np.real(seed.values).astype(float)
    if not np.any(w != 0):
        raise DegenerateSeedError("seed is identically zero")
    lin = omega + grid.k2
    mask = grid.dealias_mask
    what = np.where(mask, fld.fft(w), 0.0)
    for it in range(1, max_iter + 1):
        pw = fld.ifft(what).real
        nl_hat = np.where(mask, fld.fft(model.g(pw)), 0.0)
        num = float(np.sum(lin * np.abs(what) ** 2))
        den = float(np.real(np.vdot(what, nl_hat)))
        if not den > 0 or not math.isfinite(num / den):
            raise DegenerateSeedError("nonlinear term vanished (seed collapsed to zero)")
        factor = (num / den) ** gamma
        new = factor * nl_hat / lin
        norm = math.sqrt(float(np.sum(np.abs(new) ** 2)))
        if norm == 0 or not math.isfinite(norm):
            raise ConvergenceError("iteration diverged")
        if norm < 1e-12 * math.sqrt(float(np.sum(np.abs(what) ** 2))):
            raise DegenerateSeedError("iterate collapsed to zero")
        change = math.sqrt(float(np.sum(np.abs(new - what) ** 2))) / norm
        what = new
        if change <= tol and abs(factor - 1.0) <= 10 * tol:
            break
    else:
        raise ConvergenceError(f"no convergence in {max_iter} iterations (last change {change:.2e})")
    v = ComplexField(grid, fld.ifft(what).real)
    if np.min(v.values.real) < -1e-8 * np.max(v.values.real):
        raise ConvergenceError(
            f"converged profile dips to {np.min(v.values.real) / np.max(v.values.real):.2e} of its peak: "
            "an excited state, or spectral ringing on an under-resolved grid")
    return certify(v, model, omega, "petviashvili", it, float(np.max(v.values.real)), strict)


# -- radial shooting ------------------------------------------------------

@dataclass
class RadialProfile:
    """Shooting solution up to ``r_match``, the decaying linear tail beyond.

    Inside ``r_blend`` the profile is the mean of the two bracketing
    trajectories (dense output); between ``r_blend`` and ``r_match`` it is
    blended smoothly into amp * r^-(N-1)/2 * exp(-sqrt(omega) r).
    """
    phi0: float
    r_match: float
    r_blend: float
    amp: float
    dim: int
    omega: float
    sol_lo: object
    sol_hi: object

    def _ode(self, r):
        rc = np.clip(r, 1e-6, self.r_match)
        return 0.5 * (self.sol_lo(rc)[0] + self.sol_hi(rc)[0])

    def _tail(self, r):
        rr = np.maximum(r, 1e-6)
        return self.amp * rr ** (-(self.dim - 1) / 2.0) * np.exp(-math.sqrt(self.omega) * rr)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        shape = r.shape
        r = r.ravel()
        out = np.empty_like(r)
        inner = r < self.r_blend
        outer = r >= self.r_match
        mid = ~(inner | outer)
        if inner.any():
            out[inner] = self._ode(r[inner])
        if outer.any():
            out[outer] = self._tail(r[outer])
        if mid.any():
            x = (r[mid] - self.r_blend) / (self.r_match - self.r_blend)
            w = x * x * x * (10 - 15 * x + 6 * x * x)
            out[mid] = (1 - w) * self._ode(r[mid]) + w * self._tail(r[mid])
        return out.reshape(shape)


def _shoot(model, dim, omega, phi0, r_max, dense=False):
    """Integrate phi'' + (N-1)/r phi' = omega phi - g(phi) from r = 0.

    Returns (+1 overshoot: phi crossed zero, -1 undershoot: phi' turned
    positive, 0 neither within r_max) and the solution object.
    """
    curv = (omega * phi0 - float(model.g(phi0))) / dim
    r0 = 1e-6
    y0 = [phi0 + 0.5 * curv * r0 * r0, curv * r0]

    def rhs(r, y):
        return [y[1], omega * y[0] - float(model.g(y[0])) - (dim - 1) / r * y[1]]

    def cross(r, y):
        return y[0]
    cross.terminal = True
    cross.direction = -1

    def turn(r, y):
        return y[1]
    turn.terminal = True
    turn.direction = 1

    sol = solve_ivp(rhs, (r0, r_max), y0, method="DOP853", rtol=1e-13, atol=1e-15,
                    events=(cross, turn), dense_output=dense)
    if sol.t_events[0].size:
        return 1, sol
    if sol.t_events[1].size:
        return -1, sol
    return 0, sol


def shoot_radial(model: NonlinearityModel, dim: int, omega: float, bracket=None,
                 grid: GridSpec | None = None, rel_tol: float = 4e-16, r_max: float | None = None,
                 strict: bool = True):
    """Bisect on phi(0) between undershoot and overshoot.

    Returns ``(RadialProfile, GroundStateResult | None)``; the result is built
    when a grid is given.
    """
    if dim not in (1, 2, 3):
        raise ValueError("dimension must be 1, 2 or 3")
    if model.dim != dim:
        raise ValueError("model dimension mismatch")
    r_max = r_max or 60.0 / math.sqrt(omega)
    if bracket is None:
        s0 = find_s0(NonlinearityModel(model.kind, 1, model.terms, model.table_s, model.table_g), omega)
        if s0 is None:
            raise BracketError("no natural lower bracket: G never overtakes omega s^2/2")
        lo, hi = 0.9 * s0, 1.5 * s0
        for _ in range(60):
            if _shoot(model, dim, omega, hi, r_max)[0] == 1:
                break
            lo, hi = hi, 1.5 * hi
    else:
        lo, hi = map(float, bracket)
    out_lo, _ = _shoot(model, dim, omega, lo, r_max)
    out_hi, _ = _shoot(model, dim, omega, hi, r_max)
    if not (out_lo == -1 and out_hi == 1):
        raise BracketError(f"bracket ({lo:g}, {hi:g}) does not separate undershoot from overshoot")
    while (hi - lo) > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        out, _ = _shoot(model, dim, omega, mid, r_max)
        if out == 1:
            hi = mid
        elif out == -1:
            lo = mid
        else:
            lo = hi = mid
    profile = _assemble_profile(model, dim, omega, lo, hi, r_max)
    if grid is None:
        return profile, None
    v = fld.sample_radial(grid, profile)
    res = certify(v, model, omega, "shooting", 0, profile.phi0, strict)
    return profile, res


def _assemble_profile(model, dim, omega, lo, hi, r_max) -> RadialProfile:
    """Keep the shooting solution while the bracketing trajectories agree."""
    _, s_lo = _shoot(model, dim, omega, lo, r_max, dense=True)
    _, s_hi = _shoot(model, dim, omega, hi, r_max, dense=True)
    r_end = min(s_lo.t[-1], s_hi.t[-1])
    r = np.linspace(1e-6, r_end, int(r_end * 200) + 2)
    a = s_lo.sol(r)[0]
    b = s_hi.sol(r)[0]
    mid = 0.5 * (a + b)
    bad = np.nonzero((np.abs(a - b) > 1e-6 * np.abs(mid)) | (mid <= 0))[0]
    j = max(bad[0] - 1 if bad.size else r.size - 1, 10)
    r_match = float(r[j])
    r_blend = max(r_match - 2.0, 0.5 * r_match)
    tail_unit = r_match ** (-(dim - 1) / 2.0) * math.exp(-math.sqrt(omega) * r_match)
    return RadialProfile(0.5 * (lo + hi), r_match, r_blend, float(mid[j] / tail_unit), dim, omega,
                         s_lo.sol, s_hi.sol)


def radial_residual(profile: RadialProfile, model: NonlinearityModel, r_max: float | None = None,
                    h: float = 1e-3) -> float:
    """Relative weighted-L2 residual of phi'' + (N-1)/r phi' - omega phi + g(phi).

    Derivatives come from 6th-order central differences of the assembled
    profile, independent of the integrator that produced it.
    """
    n, om = profile.dim, profile.omega
    r_max = r_max or profile.r_match + 10.0 / math.sqrt(om)
    r = np.arange(0.05, r_max, h)
    c1 = np.array([-1, 9, -45, 0, 45, -9, 1]) / (60 * h)
    c2 = np.array([2, -27, 270, -490, 270, -27, 2]) / (180 * h * h)
    sh = [profile(r + k * h) for k in range(-3, 4)]
    d1 = sum(c * f for c, f in zip(c1, sh))
    d2 = sum(c * f for c, f in zip(c2, sh))
    phi = sh[3]
    res = d2 + (n - 1) / r * d1 - om * phi + model.g(phi)
    wgt = r ** (n - 1)
    return float(np.sqrt(np.sum(wgt * res**2) / np.sum(wgt * phi**2)))


def ground_state(model: NonlinearityModel, omega: float, grid: GridSpec, method: str = "auto",
                 strict: bool = True) -> GroundStateResult:
    """Dispatch to a solver; ``auto`` prefers the closed form, then Petviashvili."""
    if method == "auto":
        method = "closed_form" if (grid.dim == 1 and model.kind == "pure_power") else "petviashvili"
    if method == "closed_form":
        return closed_form_1d(model.degree, omega, grid, strict)
    if method == "petviashvili":
        seed = fld.sample_radial(grid, lambda r: np.exp(-r * r))
        if grid.dim == 1 and model.kind == "pure_power":
            seed = fld.sample_profile(grid, closed_form_profile(model.degree, omega))
        return petviashvili(model, omega, grid, seed, strict=strict)
    if method == "shooting":
        return shoot_radial(model, grid.dim, omega, grid=grid, strict=strict)[1]
    raise ValueError(f"unknown ground-state method {method!r}")
