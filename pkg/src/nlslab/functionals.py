"""Action S, Nehari functional I, virial functional Q and the action gradient.

Nonlinear integrals are taken on the 2/3-dealiased field P v.  The
discrete action is S(v) = K/2 + omega*M/2 - int G(P v), whose exact
gradient is -Lap v + omega v - P g(P v); I(v) = <S'(v), v> then holds to
rounding.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .field import ComplexField, dealias, fft, ifft, kinetic_from_hat
from .nonlinearity import NonlinearityModel


@dataclass(frozen=True)
class FunctionalReport:
    S: float
    I: float
    Q: float
    mass: float
    kinetic: float
    potential: float
    omega: float
    pair: float = 0.0  # int g(|v|)|v|
    dim: int = 1

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Membership:
    below_level: bool
    q_negative: bool
    i_negative: bool

    @property
    def in_invariant_set(self) -> bool:
        return self.below_level and self.q_negative and self.i_negative


def assemble(kin: float, mass: float, potential: float, pair: float, omega: float,
             dim: int) -> FunctionalReport:
    S = 0.5 * kin + 0.5 * omega * mass - potential
    I = kin + omega * mass - pair
    Q = kin - 0.5 * dim * (pair - 2.0 * potential)
    return FunctionalReport(S, I, Q, mass, kin, potential, omega, pair, dim)


def nonlinear_integrals(v: ComplexField, model: NonlinearityModel) -> tuple[float, float]:
    """(int G(Pv), int g(|Pv|)|Pv|)."""
    a = np.abs(dealias(v).values)
    cell = v.grid.cell
    pot = cell * float(np.sum(model.G(a)))
    pair = cell * float(np.sum(model.g(a) * a))
    return pot, pair


def evaluate(v: ComplexField, model: NonlinearityModel, omega: float) -> FunctionalReport:
    if not omega > 0:
        raise ValueError("omega must be positive")
    if model.dim != v.grid.dim:
        raise ValueError(f"model dimension {model.dim} does not match grid dimension {v.grid.dim}")
    vhat = fft(v.values)
    kin = kinetic_from_hat(v.grid, vhat)
    m = v.grid.cell * float(np.sum(np.abs(v.values) ** 2))
    pot, pair = nonlinear_integrals(v, model)
    rep = assemble(kin, m, pot, pair, omega, v.grid.dim)
    if not all(math.isfinite(x) for x in (rep.S, rep.I, rep.Q)):
        raise ArithmeticError("non-finite functional value")
    return rep


def action_gradient(v: ComplexField, model: NonlinearityModel, omega: float) -> ComplexField:
    """-Lap v + omega v - P g(P v)."""
    g = v.grid
    vhat = fft(v.values)
    pv = ifft(np.where(g.dealias_mask, vhat, 0.0))
    nl_hat = np.where(g.dealias_mask, fft(model.g_complex(pv)), 0.0)
    return v.with_values(ifft((g.k2 + omega) * vhat - nl_hat))


def residual_rel(v: ComplexField, model: NonlinearityModel, omega: float) -> float:
    """||S'(v)||_2 / ||v||_2."""
    r = action_gradient(v, model, omega).values
    return float(np.sqrt(np.sum(np.abs(r) ** 2) / np.sum(np.abs(v.values) ** 2)))


def set_membership(report: FunctionalReport, m: float) -> Membership:
    if not math.isfinite(m):
        raise ValueError("level m must be finite")
    return Membership(report.S < m, report.Q < 0, report.I < 0)


# -- scaled evaluations without resampling -------------------------------

class ScaledFunctionals:
    """S, I, Q of the amplitude ray t*v and of the dilation v^lam.

    Both families are evaluated from the samples of P v alone:
      S(t v)   = t^2 (K + omega M)/2 - int G(t |Pv|)
      Q(v^lam) = lam^2 K - (N/2) lam^-N int (g(s)s - 2G(s)), s = lam^(N/2)|Pv|
    by a change of variables.
    """

    def __init__(self, v: ComplexField, model: NonlinearityModel, omega: float):
        self.field = v
        self.model = model
        self.omega = omega
        self.dim = v.grid.dim
        self.cell = v.grid.cell
        self.kinetic = kinetic_from_hat(v.grid, fft(v.values))
        self.mass = self.cell * float(np.sum(np.abs(v.values) ** 2))
        self.amp = np.abs(dealias(v).values).ravel()
        # power kinds are homogeneous term by term: keep int |Pv|^(p+1) per term
        self._moments = None
        if model.is_power:
            self._moments = [(c, p, self.cell * float(np.sum(self.amp ** (p + 1)))) for c, p in model.terms]

    def _integrals(self, scale: float):
        """(int G(s |Pv|), int g(s |Pv|) s |Pv|)."""
        if self._moments is not None:
            pot = sum(c * scale ** (p + 1) * mom / (p + 1) for c, p, mom in self._moments)
            pair = sum(c * scale ** (p + 1) * mom for c, p, mom in self._moments)
            return pot, pair
        amp = scale * self.amp
        pot = self.cell * float(np.sum(self.model.G(amp)))
        pair = self.cell * float(np.sum(self.model.g(amp) * amp))
        return pot, pair

    def ray(self, t: float) -> FunctionalReport:
        pot, pair = self._integrals(t)
        return assemble(t * t * self.kinetic, t * t * self.mass, pot, pair, self.omega, self.dim)

    def dilation(self, lam: float) -> FunctionalReport:
        n = self.dim
        pot, pair = self._integrals(lam ** (n / 2.0))
        scale = lam ** (-n)
        return assemble(lam * lam * self.kinetic, self.mass, scale * pot, scale * pair, self.omega, n)
