"""Strang-split spectral integration of i u_t + Lap u + g(u) = 0.

Each step is a half kinetic substep (exact in Fourier space), a full
nonlinear phase rotation (exact pointwise, since |u| is frozen by it) and
another half kinetic substep.  Both substeps are isometries, so mass is
conserved to rounding.

The step size halves when the phase rotation would exceed its cap or the
energy jumps by more than ``energy_drift_tol`` times the current |S| + K,
and doubles after ten clean steps.  Diagnostics are sampled on a uniform
time grid; blow-up is checked after every step from the kinetic energy.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import field as fld
from .field import ComplexField
from .functionals import FunctionalReport, Membership, evaluate, set_membership
from .io import write_csv, write_json
from .nonlinearity import NonlinearityModel

TERMINATIONS = ("reached_t_max", "blowup_detected", "leak_violation", "step_underflow")
STATUSES = ("blew_up", "stable_window", "inconclusive")


@dataclass
class IntegratorControls:
    t_max: float = 1.0
    dt_initial: float = 1e-3
    dt_min: float = 1e-15
    dt_max: float = 1e-2
    sample_interval: float | None = None  # t_max / 2000 when unset
    energy_drift_tol: float = 1e-6
    phase_rotation_cap: float = 0.1
    blowup_gradient_ratio: float = 1e3
    leak_tol: float = fld.LEAK_TOL
    resolution_tol: float = 1e-6
    clean_steps: int = 10
    max_steps: int = 5_000_000

    def __post_init__(self):
        if self.sample_interval is None:
            self.sample_interval = self.t_max / 2000.0
        positive = ("t_max", "dt_initial", "dt_min", "dt_max", "sample_interval", "energy_drift_tol",
                    "phase_rotation_cap", "blowup_gradient_ratio", "leak_tol", "resolution_tol")
        for name in positive:
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
                raise ValueError(f"controls.{name} must be a positive finite number, got {val!r}")
        if not self.dt_min < self.dt_initial <= self.dt_max:
            raise ValueError("controls need dt_min < dt_initial <= dt_max")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    reports: list[FunctionalReport]
    grad_norm: np.ndarray
    f_moment: np.ndarray
    f_rate: np.ndarray
    boundary_leak: np.ndarray
    spectral_tail: np.ndarray
    peak_position: np.ndarray
    scheduled: np.ndarray            # sample on the uniform grid (False for the terminal one)
    sample_dt: np.ndarray            # step size that ended at each sample
    dt_history: np.ndarray           # every accepted step
    dt_events: np.ndarray            # (t, new dt) whenever the controller changed dt
    membership: list[Membership | None]
    termination: str
    controls: IntegratorControls
    steps: int = 0
    rejected: int = 0
    final_time: float = 0.0
    final_ratio: float = 1.0
    half_length: float = 1.0
    final_field: ComplexField | None = field(default=None, repr=False)

    @property
    def mass(self) -> np.ndarray:
        return np.array([r.mass for r in self.reports])

    @property
    def S(self) -> np.ndarray:
        return np.array([r.S for r in self.reports])

    @property
    def Q(self) -> np.ndarray:
        return np.array([r.Q for r in self.reports])

    @property
    def I(self) -> np.ndarray:
        return np.array([r.I for r in self.reports])

    @property
    def valid(self) -> np.ndarray:
        """Samples inside the validity window (box leak and spectral resolution guards)."""
        c = self.controls
        return (self.boundary_leak <= c.leak_tol) & (self.spectral_tail <= c.resolution_tol)

    def rows(self):
        for i, t in enumerate(self.times):
            r = self.reports[i]
            mem = self.membership[i]
            yield (float(t), float(self.sample_dt[i]), r.mass, r.S, r.I, r.Q, float(self.grad_norm[i]),
                   float(self.f_moment[i]), float(self.boundary_leak[i]),
                   "" if mem is None else int(mem.in_invariant_set))

    def write_csv(self, path) -> None:
        write_csv(path, ["t", "dt", "mass", "S", "I", "Q", "grad_norm", "f", "leak", "in_set"], self.rows())


@dataclass
class BlowupVerdict:
    status: str
    T_estimate: float | None = None
    delta: float | None = None
    parabola_ok: bool = False
    q_bound_ok: bool = False
    gradient_ratio: float = 1.0
    parabola_crossing: float | None = None
    sign_flips: int | None = None
    dt_collapse: bool = False
    focused: bool = False
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def write_json(self, path) -> None:
        write_json(path, self.to_dict())


# -- stepping ---------------------------------------------------------------

class _Propagators:
    """Half-step kinetic multipliers exp(-i |k|^2 h / 2), cached by h."""

    def __init__(self, k2: np.ndarray, size: int = 12):
        self.k2 = k2
        self.size = size
        self._cache: OrderedDict[float, np.ndarray] = OrderedDict()

    def __call__(self, h: float) -> np.ndarray:
        hit = self._cache.get(h)
        if hit is not None:
            self._cache.move_to_end(h)
            return hit
        prop = np.exp(-0.5j * h * self.k2)
        self._cache[h] = prop
        if len(self._cache) > self.size:
            self._cache.popitem(last=False)
        return prop


def _strang(u: np.ndarray, h: float, model: NonlinearityModel, half: np.ndarray):
    """One Strang step; returns (u, u_hat) at the end of the step."""
    u = fld.ifft(fld.fft(u) * half)
    u = u * np.exp(1j * h * model.g_over_s(np.abs(u)))
    uh = fld.fft(u) * half
    return fld.ifft(uh), uh


def step_strang(u: ComplexField, dt: float, model: NonlinearityModel) -> ComplexField:
    if not dt > 0:
        raise ValueError("dt must be positive")
    half = np.exp(-0.5j * dt * u.grid.k2)
    out, _ = _strang(u.values, dt, model, half)
    if not np.all(np.isfinite(out)):
        raise ArithmeticError("non-finite values after step")
    return u.with_values(out)


def _energy(grid, u, uh, model, omega):
    """Undealiased action and kinetic energy of the state carried by the stepper."""
    kin = fld.kinetic_from_hat(grid, uh)
    a = np.abs(u)
    S = 0.5 * kin + 0.5 * omega * grid.cell * float(np.sum(a * a)) - grid.cell * float(np.sum(model.G(a)))
    return S, kin, a


def _peak(grid, a) -> float:
    idx = np.unravel_index(int(np.argmax(a)), a.shape)
    return math.sqrt(sum(grid.x[i] ** 2 for i in idx))


# -- evolution ---------------------------------------------------------------

SampleHook = Callable[[float, ComplexField, FunctionalReport], None]


def evolve(u0: ComplexField, model: NonlinearityModel, omega: float, controls: IntegratorControls,
           level: float | None = None, on_sample: SampleHook | None = None):
    """Integrate from ``u0`` and classify the outcome.

    ``level`` is the ground-state action m; when given, samples carry
    invariant-set flags and the verdict carries delta = m - S(u0) with the
    uniform Q bound and the variance parabola checked against it.
    """
    c = controls
    grid = u0.grid
    props = _Propagators(grid.k2)
    samples: dict[str, list] = {k: [] for k in ("t", "rep", "grad", "f", "fr", "leak", "tail", "peak",
                                                "sched", "dt", "mem")}

    def take(t, u, dt_last, scheduled):
        v = u0.with_values(u)
        rep = evaluate(v, model, omega)
        samples["t"].append(t)
        samples["rep"].append(rep)
        samples["grad"].append(math.sqrt(rep.kinetic))
        samples["f"].append(fld.weighted_moment(v))
        samples["fr"].append(fld.moment_rate(v))
        samples["leak"].append(fld.boundary_mass_fraction(v))
        samples["tail"].append(fld.spectral_tail_fraction(v))
        samples["peak"].append(_peak(grid, np.abs(u)))
        samples["sched"].append(scheduled)
        samples["dt"].append(dt_last)
        samples["mem"].append(set_membership(rep, level) if level is not None else None)
        if on_sample is not None:
            on_sample(t, v, rep)
        return samples["leak"][-1]

    u = u0.values.copy()
    uh = fld.fft(u)
    S_cur, K_cur, amp = _energy(grid, u, uh, model, omega)
    K0 = K_cur
    take(0.0, u, 0.0, True)

    t = 0.0
    dt = c.dt_initial
    n_sample = 1
    dts: list[float] = []
    events: list[tuple[float, float]] = [(0.0, dt)]
    clean = 0
    rejected = 0
    ratio = 1.0
    termination = "reached_t_max"
    t_end = c.t_max * (1 - 1e-14)
    last_taken = 0.0

    while t < t_end:
        if len(dts) >= c.max_steps:
            termination = "step_underflow"
            break
        rate = float(model.g_over_s(np.max(amp)))
        while dt * rate > c.phase_rotation_cap and dt >= c.dt_min:
            dt *= 0.5
            clean = 0
            events.append((t, dt))
        if dt < c.dt_min:
            termination = "step_underflow"
            break
        t_next = min(n_sample * c.sample_interval, c.t_max)
        h = dt
        lands = t + h >= t_next * (1 - 1e-14)
        if lands:
            h = t_next - t
        with np.errstate(all="ignore"):
            u1, uh1 = _strang(u, h, model, props(h))
            S1, K1, amp1 = _energy(grid, u1, uh1, model, omega)
        if not (math.isfinite(S1) and math.isfinite(K1)) or \
                abs(S1 - S_cur) > c.energy_drift_tol * (abs(S_cur) + K_cur):
            rejected += 1
            dt *= 0.5
            clean = 0
            events.append((t, dt))
            if dt < c.dt_min:
                termination = "step_underflow"
                break
            continue
        u, uh, S_cur, K_cur, amp = u1, uh1, S1, K1, amp1
        t = t_next if lands else t + h
        dts.append(h)
        clean += 1
        if clean >= c.clean_steps and 2 * dt <= c.dt_max and 2 * dt * rate <= c.phase_rotation_cap:
            dt *= 2.0
            clean = 0
            events.append((t, dt))
        ratio = math.sqrt(K_cur / K0) if K0 > 0 else 1.0
        if lands:
            leak = take(t, u, h, True)
            last_taken = t
            n_sample += 1
            if leak > c.leak_tol:
                termination = "leak_violation"
                break
        if ratio >= c.blowup_gradient_ratio:
            if last_taken != t:
                take(t, u, h, False)
                last_taken = t
            termination = "blowup_detected" if samples["leak"][-1] <= c.leak_tol else "leak_violation"
            break
    else:
        termination = "reached_t_max"

    if termination != "reached_t_max" and last_taken != t:
        take(t, u, dts[-1] if dts else 0.0, False)

    rec = TrajectoryRecord(
        times=np.array(samples["t"]), reports=samples["rep"], grad_norm=np.array(samples["grad"]),
        f_moment=np.array(samples["f"]), f_rate=np.array(samples["fr"]),
        boundary_leak=np.array(samples["leak"]), spectral_tail=np.array(samples["tail"]),
        peak_position=np.array(samples["peak"]), scheduled=np.array(samples["sched"], dtype=bool),
        sample_dt=np.array(samples["dt"]), dt_history=np.array(dts),
        dt_events=np.array(events, dtype=float).reshape(-1, 2), membership=samples["mem"],
        termination=termination, controls=c, steps=len(dts), rejected=rejected, final_time=t,
        final_ratio=ratio, half_length=grid.half_length,
        final_field=u0.with_values(u))
    return rec, classify(rec, level)


# -- diagnostics -------------------------------------------------------------

def dt_collapse(events: np.ndarray, window: int = 8):
    """Monotone step collapse and the extrapolated singular time.

    The controller changes dt by factors of two, so the collapse shows up
    as halvings at times t_j.  When the last ``window`` changes are all
    halvings and the gaps t_{j+1} - t_j shrink geometrically with ratio r
    (log-linear fit), the remaining time is the geometric tail
    gap_last * r / (1 - r).  Returns (collapsing, T_estimate or None).
    """
    if events.shape[0] < window + 2:
        return False, None
    t, dt = events[:, 0], events[:, 1]
    tail_dt = dt[-(window + 1):]
    halving = bool(np.all(tail_dt[1:] < tail_dt[:-1]))
    collapsed = bool(dt[-1] < 1e-3 * dt.max())
    # several halvings can share one time stamp; keep distinct times
    tt = np.unique(t[-(window + 1):])
    gaps = np.diff(tt)
    if not (halving and collapsed) or gaps.size < 3 or np.any(gaps <= 0):
        return False, None
    slope = np.polyfit(np.arange(gaps.size), np.log(gaps), 1)[0]
    if not slope < 0:
        return False, None
    r = math.exp(slope)
    return True, float(tt[-1] + gaps[-1] * r / (1.0 - r))


def parabola_crossing(f0: float, f1: float, delta: float) -> float:
    """Positive root of f0 + f1 t - delta t^2."""
    return (f1 + math.sqrt(f1 * f1 + 4.0 * delta * f0)) / (2.0 * delta)


def sign_flips(record: TrajectoryRecord) -> int:
    """Number of valid samples that left the invariant set after starting inside it."""
    mem = record.membership
    if not mem or mem[0] is None or not mem[0].in_invariant_set:
        return 0
    return sum(1 for ok, m in zip(record.valid, mem) if ok and not m.in_invariant_set)


def q_bound_margins(record: TrajectoryRecord, delta: float, slack_rel: float = 1e-3) -> np.ndarray:
    """-delta + slack - Q(u(t)) on valid samples; all must be >= 0."""
    return (-delta + slack_rel * delta - record.Q)[record.valid]


def parabola_margins(record: TrajectoryRecord, delta: float, slack_rel: float = 1e-3) -> np.ndarray:
    """Bound minus f(t) on valid samples, bound = f(0) + f'(0) t - delta t^2 + slack t^2."""
    t = record.times
    bound = record.f_moment[0] + record.f_rate[0] * t - delta * t * t + slack_rel * delta * t * t
    return (bound - record.f_moment)[record.valid]


def classify(record: TrajectoryRecord, level: float | None = None) -> BlowupVerdict:
    notes = []
    collapsing, T_tail = dt_collapse(record.dt_events)
    ratio = record.final_ratio
    peaks = record.peak_position
    focused = bool(peaks.size >= 2 and abs(peaks[-1] - peaks[-2]) <= 0.05 * record.half_length)
    status = "inconclusive"
    if record.termination == "blowup_detected":
        if collapsing and focused:
            status = "blew_up"
        else:
            notes.append("gradient threshold reached without monotone step collapse or stable focus")
    elif record.termination == "step_underflow":
        if collapsing and focused and ratio >= 10.0:
            status = "blew_up"
        else:
            notes.append("step underflow without a concentrating profile")
    elif record.termination == "reached_t_max":
        if bool(np.all(record.valid)):
            status = "stable_window"
        else:
            notes.append("validity guards failed inside the window")
    else:
        notes.append("boundary leak exceeded tolerance")

    T_est = max(T_tail, record.final_time) if status == "blew_up" else None

    verdict = BlowupVerdict(status, T_est, gradient_ratio=ratio, dt_collapse=collapsing, focused=focused,
                            notes=notes)
    if level is not None:
        S0 = record.reports[0].S
        if S0 < level:
            delta = level - S0
            verdict.delta = delta
            verdict.q_bound_ok = bool(np.all(q_bound_margins(record, delta) >= 0))
            verdict.parabola_ok = bool(np.all(parabola_margins(record, delta) >= 0))
            f0, f1 = record.f_moment[0], record.f_rate[0]
            verdict.parabola_crossing = parabola_crossing(f0, f1, delta)
            verdict.sign_flips = sign_flips(record)
        else:
            notes.append("S(u0) >= m: delta undefined")
    return verdict


def virial_check(record: TrajectoryRecord, floor_rel: float = 1e-3) -> float:
    """Worst |f'' - 8Q| / (|8Q| + floor) over interior scheduled samples.

    f'' is the centered second difference of the sampled variance; the
    floor is ``floor_rel`` times 8 max K over the window.
    """
    keep = record.scheduled & record.valid
    idx = np.nonzero(keep)[0]
    # only the leading run of consecutive valid samples is usable
    if idx.size and idx[0] == 0:
        stop = np.nonzero(np.diff(idx) != 1)[0]
        idx = idx[: stop[0] + 1] if stop.size else idx
    if idx.size < 5:
        raise ValueError("virial check needs at least 5 uniformly spaced valid samples")
    t = record.times[idx]
    h = np.diff(t)
    if np.max(np.abs(h - h[0])) > 1e-9 * h[0]:
        raise ValueError("virial check needs uniform sampling")
    f = record.f_moment[idx]
    d2 = (f[2:] - 2 * f[1:-1] + f[:-2]) / h[0] ** 2
    q8 = 8.0 * record.Q[idx][1:-1]
    kin = np.array([record.reports[i].kinetic for i in idx])
    floor = floor_rel * 8.0 * float(kin.max())
    return float(np.max(np.abs(d2 - q8) / (np.abs(q8) + floor)))


def conservation_check(record: TrajectoryRecord) -> tuple[float, float]:
    """Worst relative drift of mass and of S over the valid samples."""
    if record.times.size < 2:
        raise ValueError("conservation check needs at least 2 samples")
    keep = record.valid
    m = record.mass[keep]
    S = record.S[keep]
    r0 = record.reports[0]
    mass_drift = float(np.max(np.abs(m - r0.mass)) / r0.mass) if r0.mass > 0 else 0.0
    scale = abs(r0.S) + r0.kinetic
    action_drift = float(np.max(np.abs(S - r0.S)) / scale) if scale > 0 else 0.0
    return mass_drift, action_drift
