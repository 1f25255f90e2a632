"""Periodic spectral grid and complex fields on it.

The box is [-L, L)^N with M points per axis.  All quadratures are the
periodic trapezoid rule; derivatives are spectral.  ``rescale`` evaluates
the trigonometric interpolant at stretched nodes with a Bluestein chirp-z
sum per axis, so it costs O(M log M) per axis for any real stretch factor.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft as sfft

DEALIAS_FRACTION = 2.0 / 3.0
LEAK_TOL = 1e-8
CORE_FRACTION = 0.8


class TruncationError(ValueError):
    """Field not representable on the box (mass would leave it)."""


@dataclass(frozen=True)
class GridSpec:
    dim: int = 1
    half_length: float = 20.0
    points: int = 4096

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.dim}")
        if not self.half_length > 0:
            raise ValueError("half_length must be positive")
        m = self.points
        if m < 4 or m & (m - 1):
            raise ValueError(f"points per axis must be a power of two, got {m}")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_length / self.points

    @property
    def cell(self) -> float:
        return self.dx**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @cached_property
    def x(self) -> np.ndarray:
        return -self.half_length + self.dx * np.arange(self.points)

    @cached_property
    def k(self) -> np.ndarray:
        return (math.pi / self.half_length) * sfft.fftfreq(self.points, 1.0 / self.points)

    @property
    def k_max(self) -> float:
        return math.pi / self.dx

    def _broadcast(self, v1d, axis):
        shp = [1] * self.dim
        shp[axis] = self.points
        return v1d.reshape(shp)

    @cached_property
    def k2(self) -> np.ndarray:
        out = np.zeros(self.shape)
        for a in range(self.dim):
            out = out + self._broadcast(self.k**2, a)
        return out

    @cached_property
    def r2(self) -> np.ndarray:
        out = np.zeros(self.shape)
        for a in range(self.dim):
            out = out + self._broadcast(self.x**2, a)
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        keep = np.abs(self.k) <= DEALIAS_FRACTION * self.k_max
        out = np.ones(self.shape, dtype=bool)
        for a in range(self.dim):
            out = out & self._broadcast(keep, a)
        return out

    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.x] * self.dim), indexing="ij"))

    def to_dict(self) -> dict:
        return {"dim": self.dim, "half_length": self.half_length, "points": self.points}


@dataclass(frozen=True, eq=False)
class ComplexField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.size != self.grid.points**self.grid.dim:
            raise ValueError(f"expected {self.grid.points ** self.grid.dim} values, got {v.size}")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ArithmeticError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    def with_values(self, values) -> "ComplexField":
        return ComplexField(self.grid, values)

    def __mul__(self, c) -> "ComplexField":
        return ComplexField(self.grid, self.values * c)

    __rmul__ = __mul__

    def __add__(self, other: "ComplexField") -> "ComplexField":
        return ComplexField(self.grid, self.values + other.values)

    def __sub__(self, other: "ComplexField") -> "ComplexField":
        return ComplexField(self.grid, self.values - other.values)


def zeros(grid: GridSpec) -> ComplexField:
    return ComplexField(grid, np.zeros(grid.shape, complex))


def sample_profile(grid: GridSpec, profile) -> ComplexField:
    """Evaluate ``profile(*coords)`` at the grid nodes (coords from ``grid.coords()``)."""
    vals = np.broadcast_to(np.asarray(profile(*grid.coords()), dtype=complex), grid.shape)
    if not np.all(np.isfinite(vals)):
        raise ArithmeticError("profile produced non-finite samples")
    return ComplexField(grid, np.array(vals))


def sample_radial(grid: GridSpec, radial) -> ComplexField:
    """Evaluate a radial rule ``radial(r)`` at the nodes."""
    return sample_profile(grid, lambda *xs: radial(np.sqrt(sum(c * c for c in xs))))


# -- transforms and quadrature ---------------------------------------------

def fft(values: np.ndarray) -> np.ndarray:
    return sfft.fftn(values)


def ifft(values: np.ndarray) -> np.ndarray:
    return sfft.ifftn(values)


def inner(a: ComplexField, b: ComplexField) -> float:
    """Real L2 inner product Re <a, b>."""
    return float(a.grid.cell * np.real(np.vdot(b.values, a.values)))


def mass(v: ComplexField) -> float:
    return float(v.grid.cell * np.sum(np.abs(v.values) ** 2))


def spectral_mass(v: ComplexField) -> float:
    """Plancherel-normalized sum of |v_hat|^2 (equals ``mass`` up to rounding)."""
    g = v.grid
    return float(g.cell / g.points**g.dim * np.sum(np.abs(fft(v.values)) ** 2))


def kinetic_from_hat(grid: GridSpec, vhat: np.ndarray) -> float:
    return float(grid.cell / grid.points**grid.dim * np.sum(grid.k2 * (vhat.real**2 + vhat.imag**2)))


def kinetic(v: ComplexField) -> float:
    """||grad v||_2^2."""
    return kinetic_from_hat(v.grid, fft(v.values))


def grad_norm(v: ComplexField) -> float:
    return math.sqrt(kinetic(v))


def h1_norm(v: ComplexField) -> float:
    return math.sqrt(mass(v) + kinetic(v))


def laplacian(v: ComplexField) -> ComplexField:
    return v.with_values(ifft(-v.grid.k2 * fft(v.values)))


def dealias(v: ComplexField) -> ComplexField:
    """2/3-rule spectral truncation."""
    return v.with_values(ifft(np.where(v.grid.dealias_mask, fft(v.values), 0.0)))


def spectral_tail_fraction(v: ComplexField) -> float:
    """Share of spectral mass beyond the 2/3 cutoff; a resolution indicator."""
    p = np.abs(fft(v.values)) ** 2
    tot = p.sum()
    return float(p[~v.grid.dealias_mask].sum() / tot) if tot > 0 else 0.0


def weighted_moment(v: ComplexField) -> float:
    """||x v||_2^2 with centered box coordinates."""
    return float(v.grid.cell * np.sum(v.grid.r2 * np.abs(v.values) ** 2))


def moment_rate(v: ComplexField) -> float:
    """d/dt ||x u||^2 along the flow, i.e. 4 Im int conj(u) x.grad u."""
    g = v.grid
    vhat = fft(v.values)
    acc = 0.0
    for a in range(g.dim):
        du = ifft(1j * g._broadcast(g.k, a) * vhat)
        acc += float(np.sum(g._broadcast(g.x, a) * np.imag(np.conj(v.values) * du)))
    return 4.0 * g.cell * acc


def boundary_mass_fraction(v: ComplexField, core_fraction: float = CORE_FRACTION) -> float:
    if not 0 < core_fraction <= 1:
        raise ValueError("core_fraction must lie in (0, 1]")
    g = v.grid
    dens = np.abs(v.values) ** 2
    total = dens.sum()
    if total == 0:
        return 0.0
    inside = np.abs(g.x) < core_fraction * g.half_length
    mask = np.ones(g.shape, dtype=bool)
    for a in range(g.dim):
        mask = mask & g._broadcast(inside, a)
    return float(dens[~mask].sum() / total)


# -- rescaling -------------------------------------------------------------

def _chirp(lam: float, n: np.ndarray, m: int) -> np.ndarray:
    """exp(i*pi*lam*n^2/m), with the phase reduced mod 2*pi in extended precision."""
    n2 = (n.astype(np.int64) ** 2).astype(np.longdouble)
    turns = np.longdouble(lam) * n2 / np.longdouble(2 * m)
    frac = (turns - np.floor(turns)).astype(float)
    return np.exp(2j * math.pi * frac)


def _power_sum(coef: np.ndarray, lam: float, m: int) -> np.ndarray:
    """sum_n coef[..., n] * W^(n j) for j < m, W = exp(2i*pi*lam/m) (Bluestein)."""
    n_in = coef.shape[-1]
    size = sfft.next_fast_len(n_in + m - 1)
    a = coef * _chirp(lam, np.arange(n_in), m)
    lags = np.arange(-(n_in - 1), m)
    b = np.conj(_chirp(lam, lags, m))
    fa = sfft.fft(a, size, axis=-1)
    fb = sfft.fft(b, size)
    conv = sfft.ifft(fa * fb, axis=-1)[..., n_in - 1: n_in - 1 + m]
    return conv * _chirp(lam, np.arange(m), m)


def _stretch_axis(values: np.ndarray, axis: int, lam: float, half_length: float) -> np.ndarray:
    """Trigonometric interpolant of ``values`` along ``axis`` evaluated at lam * x_j."""
    m = values.shape[axis]
    vh = np.moveaxis(sfft.fft(values, axis=axis), axis, -1)
    modes = np.arange(-m // 2, m // 2 + 1)
    coef = np.empty(vh.shape[:-1] + (m + 1,), complex)
    coef[..., : m // 2] = vh[..., m // 2:]           # m = -M/2 .. -1
    coef[..., m // 2: m] = vh[..., : m // 2]         # m = 0 .. M/2-1
    coef[..., m] = 0.5 * vh[..., m // 2]             # Nyquist split evenly
    coef[..., 0] *= 0.5
    turns = modes.astype(np.longdouble) * (1 - np.longdouble(lam)) / 2
    coef *= np.exp(2j * math.pi * (turns - np.floor(turns)).astype(float))
    out = _power_sum(coef, lam, m)
    j = np.arange(m)
    turns = -np.longdouble(lam) * j.astype(np.longdouble) / 2
    out = out * np.exp(2j * math.pi * (turns - np.floor(turns)).astype(float)) / m
    # nodes stretched beyond the box would read the periodic copy; the field is zero there
    dx = 2.0 * half_length / m
    out[..., np.abs(lam * (-half_length + dx * j)) >= half_length] = 0.0
    return np.moveaxis(out, -1, axis)


def band_fraction(v: ComplexField, k_cut: float) -> float:
    """Share of spectral mass with some |k_axis| above ``k_cut``."""
    g = v.grid
    p = np.abs(fft(v.values)) ** 2
    tot = p.sum()
    if tot == 0:
        return 0.0
    keep = np.abs(g.k) <= k_cut
    mask = np.ones(g.shape, dtype=bool)
    for a in range(g.dim):
        mask = mask & g._broadcast(keep, a)
    return float(p[~mask].sum() / tot)


def representation_loss(v: ComplexField, lam: float) -> float:
    """Mass share the dilation by ``lam`` cannot represent on the grid.

    Widening (lam < 1) drops whatever lies outside the core of half-length
    lam*L; narrowing (lam > 1) drops spectrum above k_max/lam.
    """
    if lam < 1.0:
        return boundary_mass_fraction(v, lam)
    if lam > 1.0:
        return band_fraction(v, v.grid.k_max / lam)
    return 0.0


def rescale(v: ComplexField, lam: float, leak_tol: float = LEAK_TOL) -> ComplexField:
    """Mass-preserving dilation lam^(N/2) v(lam x).

    Raises TruncationError when more than ``leak_tol`` of the mass would be
    pushed off the box or above the grid's band limit.
    """
    if not lam > 0 or not math.isfinite(lam):
        raise ValueError("scale factor must be positive and finite")
    if lam == 1.0:
        return v.with_values(v.values.copy())
    loss = representation_loss(v, lam)
    if loss > leak_tol:
        raise TruncationError(f"scale {lam:g}: unrepresentable mass fraction {loss:.3e} exceeds {leak_tol:g}")
    out = v.values
    for a in range(v.grid.dim):
        out = _stretch_axis(out, a, lam, v.grid.half_length)
    return v.with_values(out * lam ** (v.grid.dim / 2.0))


# -- serialization ---------------------------------------------------------

AXES = ("x", "y", "z")


def write_field_csv(v: ComplexField, path, meta: dict | None = None) -> None:
    """CSV ``x[,y[,z]],re,im`` (row-major, 17 significant digits) plus a JSON sidecar."""
    from .io import atomic_write_text

    g = v.grid
    cols = [c.ravel() for c in g.coords()] + [v.values.real.ravel(), v.values.imag.ravel()]
    data = np.column_stack(cols)
    header = ",".join(AXES[: g.dim] + ("re", "im"))
    lines = [header] + [",".join(f"{val:.17g}" for val in row) for row in data]
    atomic_write_text(path, "\n".join(lines) + "\n")
    side = {"grid": g.to_dict()}
    if meta:
        side.update(meta)
    atomic_write_text(Path(str(path) + ".json"), json.dumps(side, indent=2))


def read_field_csv(path) -> ComplexField:
    side = json.loads(Path(str(path) + ".json").read_text())
    grid = GridSpec(**side["grid"])
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return ComplexField(grid, data[:, -2] + 1j * data[:, -1])
