"""The mass-preserving dilation family v^lam = lam^(N/2) v(lam x).

``scan`` resamples the field at every lam (``field.rescale``) and evaluates
the functionals; the root finders use the change-of-variables formulas of
``ScaledFunctionals`` instead, so the two routes check each other.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .field import ComplexField, TruncationError, rescale
from .functionals import ScaledFunctionals, evaluate
from .nonlinearity import NonlinearityModel

LAMBDA_FLOOR = 1e-3
ROOT_TOL = 1e-10


class RootNotBracketedError(ArithmeticError):
    pass


def _brent(f, a, b):
    return brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def find_lambda0(v: ComplexField, model: NonlinearityModel, omega: float,
                 tol: float = ROOT_TOL, lam_floor: float = LAMBDA_FLOOR,
                 scaled: ScaledFunctionals | None = None) -> float:
    """Scale lam0 <= 1 with Q(v^lam0) = 0, for v with Q(v) <= 0."""
    sf = scaled or ScaledFunctionals(v, model, omega)
    if sf.kinetic == 0:
        raise ValueError("zero field has no scaling root")
    q1 = sf.dilation(1.0).Q
    if abs(q1) <= tol * sf.kinetic:
        return 1.0
    if q1 > 0:
        raise ValueError(f"find_lambda0 needs Q(v) <= 0, got Q = {q1:.6g}")

    def q_over(lam):
        return sf.dilation(lam).Q / (lam * lam)

    if not q_over(lam_floor) > 0:
        raise RootNotBracketedError(f"Q(v^lam) has no sign change above lam = {lam_floor:g}")
    return _brent(q_over, lam_floor, 1.0)


def find_q_root(v: ComplexField, model: NonlinearityModel, omega: float,
                tol: float = ROOT_TOL, lam_floor: float = LAMBDA_FLOOR,
                max_doublings: int = 60) -> float:
    """Scale with Q(v^lam) = 0 for either sign of Q(v); lam > 1 when Q(v) > 0."""
    sf = ScaledFunctionals(v, model, omega)
    q1 = sf.dilation(1.0).Q
    if q1 <= tol * sf.kinetic:
        return find_lambda0(v, model, omega, tol, lam_floor, scaled=sf)
    hi = 1.0
    for _ in range(max_doublings):
        hi *= 2.0
        if sf.dilation(hi).Q < 0:
            return _brent(lambda lam: sf.dilation(lam).Q / (lam * lam), hi / 2.0, hi)
    raise RootNotBracketedError("Q(v^lam) stays positive")


def find_lambda1(v: ComplexField, model: NonlinearityModel, omega: float,
                 tol: float = ROOT_TOL, lam_floor: float = LAMBDA_FLOOR,
                 scaled: ScaledFunctionals | None = None) -> float:
    """Scale lam1 < 1 with I(v^lam1) = 0, for v with I(v) < 0."""
    sf = scaled or ScaledFunctionals(v, model, omega)
    if sf.kinetic == 0:
        raise ValueError("zero field has no scaling root")
    i1 = sf.dilation(1.0).I
    if abs(i1) <= tol * sf.kinetic:
        return 1.0
    if i1 > 0:
        raise ValueError(f"find_lambda1 needs I(v) < 0, got I = {i1:.6g}")
    if not sf.dilation(lam_floor).I > 0:
        raise RootNotBracketedError(f"I(v^lam) has no sign change above lam = {lam_floor:g}")
    return _brent(lambda lam: sf.dilation(lam).I, lam_floor, 1.0)


@dataclass
class ScalingScan:
    lambdas: np.ndarray
    S_curve: np.ndarray
    Q_curve: np.ndarray
    I_curve: np.ndarray
    lambda0: float | None
    lambda1: float | None
    concave_past_lambda0: bool
    derivative_identity_max_error: float
    sign_pattern_ok: bool | None = None
    max_concavity_violation: float = 0.0
    notes: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "lambda0": self.lambda0,
            "lambda1": self.lambda1,
            "concave_past_lambda0": self.concave_past_lambda0,
            "sign_pattern_ok": self.sign_pattern_ok,
            "derivative_identity_max_error": self.derivative_identity_max_error,
            "max_concavity_violation": self.max_concavity_violation,
            "count": int(self.lambdas.size),
            "notes": self.notes,
        }

    def rows(self):
        return zip(self.lambdas, self.S_curve, self.Q_curve, self.I_curve)


def _refine_root(values, lambdas, func):
    """Root of ``func`` inside the first +/- sign change of ``values``."""
    s = np.sign(values)
    idx = np.nonzero((s[:-1] > 0) & (s[1:] <= 0))[0]
    if idx.size == 0:
        return None
    i = idx[0]
    if values[i + 1] == 0:
        return float(lambdas[i + 1])
    return float(_brent(func, lambdas[i], lambdas[i + 1]))


def chord_gaps(lambdas: np.ndarray, values: np.ndarray) -> np.ndarray:
    """values[i] minus the chord through its neighbours; >= 0 where the curve is concave."""
    l0, l1, l2 = lambdas[:-2], lambdas[1:-1], lambdas[2:]
    w = (l1 - l0) / (l2 - l0)
    return values[1:-1] - ((1 - w) * values[:-2] + w * values[2:])


def scan(v: ComplexField, model: NonlinearityModel, omega: float,
         lambda_range=(0.5, 2.0, 400), floor_rel: float = 1e-2,
         concavity_tol: float = 1e-10, leak_tol: float = 1e-8) -> ScalingScan:
    """Evaluate S, Q, I along v^lam for log-spaced lam.

    The scan also checks the shape of the S-curve around lambda0 and the
    identity dS/dlam = Q/lam.

    ``floor_rel`` sets the floor of the derivative-identity error as a fraction
    of max |Q/lam| over the scan; it keeps the relative error meaningful where
    Q crosses zero.
    """
    lam_min, lam_max, count = lambda_range
    if not 0 < lam_min < lam_max:
        raise ValueError("need 0 < lambda_min < lambda_max")
    lambdas = np.geomspace(lam_min, lam_max, int(count))
    notes = []
    rows = []
    kept = []
    for lam in lambdas:
        try:
            rep = evaluate(rescale(v, float(lam), leak_tol), model, omega)
        except TruncationError as exc:
            notes.append(f"truncated at lambda={lam:.6g}: {exc}")
            if kept:
                break
            continue
        kept.append(lam)
        rows.append((rep.S, rep.Q, rep.I))
    if len(kept) < 5:
        raise TruncationError("fewer than 5 representable scales in the requested range")
    lam = np.asarray(kept)
    S, Q, I = (np.asarray(c) for c in zip(*rows))

    sf = ScaledFunctionals(v, model, omega)
    lambda0 = _refine_root(Q, lam, lambda x: sf.dilation(x).Q / (x * x))
    lambda1 = _refine_root(I, lam, lambda x: sf.dilation(x).I)

    dS = np.gradient(S, lam)
    target = Q / lam
    floor = floor_rel * float(np.max(np.abs(target)))
    err = np.abs(dS[1:-1] - target[1:-1]) / (np.abs(target[1:-1]) + floor + 1e-300)
    deriv_err = float(err.max())

    gaps = chord_gaps(lam, S)
    sign_ok = None
    concave = True
    worst = 0.0
    if lambda0 is not None:
        i0 = int(np.searchsorted(lam, lambda0))
        below = np.arange(lam.size) < i0 - 2
        above = np.arange(lam.size) > i0 + 1
        sign_ok = bool(np.all(dS[below] > 0) and np.all(dS[above] < 0))
        past = lam[:-2] > lambda0
        if np.any(past):
            viol = -gaps[past] / np.maximum(np.abs(S[1:-1][past]), 1e-300)
            worst = float(max(viol.max(), 0.0))
            concave = bool(np.all(gaps[past] >= -concavity_tol * np.abs(S[1:-1][past])))
    else:
        notes.append("no sign change of Q on the scan range")
    return ScalingScan(lam, S, Q, I, lambda0, lambda1, concave, deriv_err, sign_ok, worst, notes)
