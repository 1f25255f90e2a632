"""Nonlinearity models g, their antiderivatives G and admissibility checks.

A model is an odd real function g extended to complex arguments by
g(z) = g(|z|) z/|z|.  Power kinds have closed-form G; the tabulated kind
uses a monotone cubic interpolant whose antiderivative is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

KINDS = ("pure_power", "sum_of_powers", "tabulated")


class DomainError(ValueError):
    """Argument outside the domain of a model function."""


@dataclass(frozen=True, eq=False)
class NonlinearityModel:
    kind: str
    dim: int = 1
    terms: tuple[tuple[float, float], ...] = ()
    table_s: np.ndarray | None = field(default=None, repr=False)
    table_g: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.dim}")
        if self.kind == "tabulated":
            s = np.asarray(self.table_s, dtype=float)
            g = np.asarray(self.table_g, dtype=float)
            if s.ndim != 1 or s.shape != g.shape or s.size < 4:
                raise ValueError("tabulated model needs matching 1-D sample arrays (>= 4 points)")
            if s[0] != 0.0 or g[0] != 0.0:
                raise ValueError("tabulated model must start at s=0 with g(0)=0")
            if np.any(np.diff(s) <= 0):
                raise ValueError("tabulated sample points must be strictly increasing")
            interp = PchipInterpolator(s, g, extrapolate=False)
            object.__setattr__(self, "table_s", s)
            object.__setattr__(self, "table_g", g)
            object.__setattr__(self, "_interp", interp)
            object.__setattr__(self, "_antider", interp.antiderivative())
        else:
            if not self.terms:
                raise ValueError("power model needs at least one (coefficient, exponent) term")
            for c, p in self.terms:
                if not (math.isfinite(c) and math.isfinite(p)) or p <= 1.0:
                    raise ValueError(f"power term ({c}, {p}) needs finite coefficient and exponent > 1")
            if self.kind == "pure_power" and len(self.terms) != 1:
                raise ValueError("pure_power takes exactly one term")

    # -- constructors -----------------------------------------------------
    @classmethod
    def pure_power(cls, p: float, dim: int = 1) -> "NonlinearityModel":
        return cls("pure_power", dim, ((1.0, float(p)),))

    @classmethod
    def sum_of_powers(cls, terms: Sequence[tuple[float, float]], dim: int = 1) -> "NonlinearityModel":
        return cls("sum_of_powers", dim, tuple((float(c), float(p)) for c, p in terms))

    @classmethod
    def tabulated(cls, s: Sequence[float], g: Sequence[float], dim: int = 1) -> "NonlinearityModel":
        return cls("tabulated", dim, (), np.asarray(s, float), np.asarray(g, float))

    @classmethod
    def from_spec(cls, spec: dict, dim: int = 1) -> "NonlinearityModel":
        """Build a model from its config-file form, e.g. ``{"kind": "pure_power", "p": 7.0}``."""
        kind = spec.get("kind")
        if kind == "pure_power":
            return cls.pure_power(spec["p"], dim)
        if kind == "sum_of_powers":
            return cls.sum_of_powers([tuple(t) for t in spec["terms"]], dim)
        if kind == "tabulated":
            return cls.tabulated(spec["s"], spec["g"], dim)
        raise ValueError(f"unknown nonlinearity kind {kind!r}")

    def to_spec(self) -> dict:
        if self.kind == "pure_power":
            return {"kind": "pure_power", "p": self.terms[0][1]}
        if self.kind == "sum_of_powers":
            return {"kind": "sum_of_powers", "terms": [list(t) for t in self.terms]}
        return {"kind": "tabulated", "s": self.table_s.tolist(), "g": self.table_g.tolist()}

    # -- metadata ---------------------------------------------------------
    @property
    def is_power(self) -> bool:
        return self.kind != "tabulated"

    @property
    def degree(self) -> float | None:
        """Largest exponent for power kinds."""
        return max(p for _, p in self.terms) if self.is_power else None

    @property
    def lipschitz_exponent(self) -> float | None:
        """Growth exponent alpha of the local Lipschitz bound (recorded, never enforced)."""
        return self.degree - 1.0 if self.is_power else None

    @property
    def critical_exponent(self) -> float:
        return 1.0 + 4.0 / self.dim

    @property
    def s_max(self) -> float:
        return float(self.table_s[-1]) if self.kind == "tabulated" else math.inf

    # -- evaluation (vectorized, real argument) ---------------------------
    def _check(self, s):
        s = np.asarray(s, dtype=float)
        if not np.all(np.isfinite(s)):
            raise DomainError("non-finite argument")
        if self.kind == "tabulated" and np.any(np.abs(s) > self.table_s[-1]):
            raise DomainError(f"|s| exceeds tabulated range {self.table_s[-1]}")
        return s

    def g(self, s):
        s = self._check(s)
        a = np.abs(s)
        if self.is_power:
            out = np.zeros_like(a)
            for c, p in self.terms:
                out = out + c * a**p
        else:
            out = self._interp(a)
        return np.sign(s) * out

    def G(self, s):
        a = np.abs(self._check(s))
        if self.is_power:
            out = np.zeros_like(a)
            for c, p in self.terms:
                out = out + c * a ** (p + 1) / (p + 1)
            return out
        return self._antider(a)

    def g_over_s(self, a):
        """g(a)/a for a >= 0, with the removable singularity at 0 set to its limit 0."""
        a = self._check(a)
        if self.is_power:
            out = np.zeros_like(a)
            for c, p in self.terms:
                out = out + c * a ** (p - 1)
            return out
        out = np.zeros_like(a)
        nz = a > 0
        out[nz] = self._interp(a[nz]) / a[nz]
        return out

    def g_complex(self, z):
        z = np.asarray(z, dtype=complex)
        if not np.all(np.isfinite(z)):
            raise DomainError("non-finite argument")
        return self.g_over_s(np.abs(z)) * z

    def h(self, s):
        s = self._check(s)
        if np.any(s <= 0):
            raise DomainError("h is defined for s > 0 only")
        return (s * self.g(s) - 2.0 * self.G(s)) * s ** (-(2.0 + 4.0 / self.dim))


def g_eval(model: NonlinearityModel, s: float) -> float:
    return float(model.g(s))


def g_complex(model: NonlinearityModel, z: complex) -> complex:
    return complex(model.g_complex(z))


def G_eval(model: NonlinearityModel, s: float) -> float:
    return float(model.G(s))


def G_quad(model: NonlinearityModel, s: float, rtol: float = 1e-10) -> float:
    """Antiderivative by adaptive quadrature of g; independent of ``model.G``."""
    a = abs(float(s))
    if a == 0.0:
        return 0.0
    pts = None
    if model.kind == "tabulated":
        # knots of the interpolant are the kinks quad must not straddle
        pts = model.table_s[(model.table_s > 0) & (model.table_s < a)]
    limit = 400 + (0 if pts is None else 4 * pts.size)
    val, err = quad(lambda t: float(model.g(t)), 0.0, a, epsrel=rtol, epsabs=0.0,
                    limit=limit, points=pts if pts is not None and pts.size else None)
    if err > max(rtol * abs(val), 1e-300) * 10:
        raise ArithmeticError(f"quadrature did not converge (err={err:g})")
    return val


def h_eval(model: NonlinearityModel, s: float) -> float:
    if not s > 0:
        raise DomainError("h is defined for s > 0 only")
    return float(model.h(s))


@dataclass
class AdmissibilityReport:
    """Sampled hypothesis checks.

    a0b_ok: g(s)/s -> 0 at the origin.  a1_ok: h increases strictly from 0.
    cond3_ok / cond4_ok: g(s)/s increasing / unbounded.  a0c_ok: growth
    bound at infinity for N >= 2.  s0: the point where G overtakes omega s^2/2.
    """

    a0b_ok: bool
    a1_ok: bool
    cond3_ok: bool
    cond4_ok: bool
    s0: float | None
    supercritical: bool
    a0c_ok: bool = True
    borderline: bool = False
    notes: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def find_s0(model: NonlinearityModel, omega: float, s_lo: float = 1e-6, s_hi: float = 1e3) -> float | None:
    """First point s0 where the potential G overtakes the quadratic omega s^2/2.

    N = 1: root of omega s^2/2 = G(s), with omega s^2/2 > G(s) before it.
    N >= 2: a point where G(s) exceeds omega s^2/2 (twice the crossing).
    """
    hi = min(s_hi, model.s_max)

    def gap(s):
        return 0.5 * omega * s * s - float(model.G(s))

    if gap(s_lo) <= 0:
        return None
    grid = np.geomspace(s_lo, hi, 400)
    vals = 0.5 * omega * grid**2 - model.G(grid)
    neg = np.nonzero(vals < 0)[0]
    if neg.size == 0:
        return None
    j = neg[0]
    root = brentq(gap, grid[j - 1], grid[j], xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if model.dim == 1:
        return root
    s0 = 2.0 * root if 2.0 * root <= model.s_max else grid[j]
    return s0 if gap(s0) < 0 else None


def check_admissibility(model: NonlinearityModel, sample_range=(1e-6, 1e3, 256),
                        omega: float | None = None, zero_tol: float = 1e-3,
                        growth_bound: float = 1e2) -> AdmissibilityReport:
    """Sampled checks of the hypotheses on g; see ``AdmissibilityReport`` for the flags."""
    s_min, s_max, count = sample_range
    if not (0 < s_min < s_max) or count < 10:
        raise ValueError("need 0 < s_min < s_max and count >= 10")
    s_max = min(s_max, model.s_max)
    s = np.geomspace(s_min, s_max, int(count))
    notes = []

    h = model.h(s)
    a1_ok = bool(np.all(np.diff(h) > 0) and abs(h[0]) <= zero_tol)
    ratio = model.g_over_s(s)
    a0b_ok = bool(abs(ratio[0]) <= zero_tol)
    cond3_ok = bool(np.all(np.diff(ratio) > 0))
    cond4_ok = bool(cond3_ok and ratio[-1] > growth_bound)

    n = model.dim
    a0c_ok = True
    if n >= 3:
        crit = (n + 2.0) / (n - 2.0)
        if model.is_power:
            a0c_ok = model.degree < crit
        else:
            w = np.abs(model.g(s)) * s ** (-crit)
            a0c_ok = bool(w[-1] < w[len(w) // 2])
    elif n == 2:
        # sampled form of |g(s)| <= C_a exp(a s^2): log|g|/s^2 must decay
        big = s[s > 1.0]
        if big.size > 2:
            w = np.log(np.maximum(np.abs(model.g(big)), 1e-300)) / big**2
            a0c_ok = bool(w[-1] <= w[0] or w[-1] < 1e-2)

    borderline = False
    if model.is_power:
        pmin = min(p for _, p in model.terms)
        supercritical = pmin > model.critical_exponent
        borderline = math.isclose(pmin, model.critical_exponent, rel_tol=1e-12)
        if borderline:
            notes.append("exponent equals the critical value 1+4/N")
        if model.kind == "sum_of_powers" and any(c <= 0 for c, _ in model.terms):
            notes.append("non-positive coefficient present")
    else:
        supercritical = a1_ok
        notes.append("tabulated kind: supercritical taken from the sampled monotonicity of h")
    if not a1_ok:
        notes.append("h not strictly increasing to 0 on the sample")

    s0 = find_s0(model, omega, s_min, s_max) if omega is not None else None
    if omega is not None and s0 is None:
        notes.append("G never overtakes omega s^2/2 on the sample (no s0)")
    if s0 is not None and n == 1 and not omega * s0 < float(model.g(s0)):
        notes.append("s0 fails omega*s0 < g(s0)")
        s0 = None
    return AdmissibilityReport(a0b_ok, a1_ok, cond3_ok, cond4_ok, s0, bool(supercritical),
                               bool(a0c_ok), borderline, "; ".join(notes))
