"""
Flow statistics: global scales, dissipation, intensity, effective viscosity,
Taylor microscale, normalized length/viscosity averages and time averages.

All spatial integrals run over fluid cells only.  Ratios with a vanishing
denominator return ``nan`` (a missing value), never zero.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .closure import ClosureConfig, dissipation_density, length_scale, turbulent_viscosity
from .grid import Grid, VectorField, deformation_tensor_magsq, speed_sq_centers
from .flowsolver import FlowState

NAN = float("nan")


class ScalesUndefined(ValueError):
    pass


@dataclass(frozen=True)
class FlowScales:
    F: float
    L: float
    U: float
    nu: float
    L_domain: float = math.inf
    sup_grad_f: float = 0.0
    rms_grad_f: float = 0.0

    @property
    def Re(self) -> float:
        return self.L * self.U / self.nu if self.nu > 0 else math.inf

    @property
    def Tstar(self) -> float:
        return self.L / self.U if self.U > 0 else math.inf

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(Re=self.Re, Tstar=self.Tstar)
        return d


def _fluid_mean(a: np.ndarray, grid: Grid) -> float:
    fl = grid.fluid
    return float(a[fl].sum() / fl.sum())


def force_scales(force: VectorField, grid: Grid) -> tuple[float, float, float, float]:
    """``(F, L, sup|grad_s f|, rms|grad_s f|)`` of a steady face force (sampled everywhere, not masked)."""
    F = math.sqrt(_fluid_mean(speed_sq_centers(force, grid), grid))
    if F == 0.0:
        raise ScalesUndefined("zero forcing: F, L and U are undefined")
    g2 = deformation_tensor_magsq(force, grid)[grid.fluid]
    sup = float(np.sqrt(g2.max()))
    rms = float(np.sqrt(g2.mean()))
    cands = [grid.domain_length]
    if sup > 0:
        cands.append(F / sup)
    if rms > 0:
        cands.append(F / rms)
    return F, min(cands), sup, rms


def compute_scales(force: VectorField, grid: Grid, nu: float, mean_sq_speed=None, t=None, t0: float = 1.0,
                   U: float | None = None) -> FlowScales:
    """Body-force scale ``F``, length ``L`` and velocity ``U``.

    ``U`` is either passed directly or obtained as the square root of the
    time average (over ``t >= t0``) of the fluid-mean ``|v|^2`` series.
    """
    F, L, sup, rms = force_scales(force, grid)
    if U is None:
        if mean_sq_speed is None:
            U = NAN
        else:
            U = math.sqrt(time_average(t, mean_sq_speed, t0))
    return FlowScales(F=F, L=L, U=U, nu=nu, L_domain=grid.domain_length, sup_grad_f=sup, rms_grad_f=rms)


def scales_consistent(s: FlowScales, slack: float = 1e-2) -> bool:
    """``sup|grad_s f| <= F/L`` and ``rms|grad_s f| <= F/L`` up to quadrature slack."""
    lim = s.F / s.L * (1.0 + slack)
    return s.sup_grad_f <= lim and s.rms_grad_f <= lim


# -- instantaneous statistics ---------------------------------------------------

def mean_sq_speed(state: FlowState, grid: Grid) -> float:
    return _fluid_mean(speed_sq_centers(state.vel, grid), grid)


def energy_density(state: FlowState, grid: Grid) -> float:
    """``(1/|Omega|) int 1/2 |v|^2 + k``."""
    return _fluid_mean(0.5 * speed_sq_centers(state.vel, grid) + state.k, grid)


def dissipation_rate(state: FlowState, closure: ClosureConfig, grid: Grid, l0: np.ndarray | None = None,
                     S2: np.ndarray | None = None) -> float:
    """``eps_model = (1/|Omega|) int 2 nu |grad_s v|^2 + k-sink``."""
    if S2 is None:
        S2 = deformation_tensor_magsq(state.vel, grid)
    sink = dissipation_density(closure, state.k, l0) if state.model_active else 0.0 * S2
    return _fluid_mean(2.0 * closure.nu * S2 + sink, grid)


def intensity(state: FlowState, grid: Grid) -> float:
    """``I_model = (2/|Omega|) int k / ((1/|Omega|) int |v|^2)``."""
    den = mean_sq_speed(state, grid)
    if den <= 0:
        return NAN
    return 2.0 * _fluid_mean(state.k, grid) / den


def _nu_t(state, closure, grid, l0):
    if not state.model_active:
        return grid.zeros_scalar()
    return np.where(grid.solid_mask, 0.0, turbulent_viscosity(closure, state.k, l0))


def effective_viscosity(state: FlowState, closure: ClosureConfig, grid: Grid, l0=None, S2=None) -> float:
    """``int (nu + mu l sqrt(k)) |grad_s v|^2 / int |grad_s v|^2``."""
    if S2 is None:
        S2 = deformation_tensor_magsq(state.vel, grid)
    den = _fluid_mean(S2, grid)
    if den <= 0:
        return NAN
    return _fluid_mean((closure.nu + _nu_t(state, closure, grid, l0)) * S2, grid) / den


def viscosity_ratio(state: FlowState, closure: ClosureConfig, grid: Grid, l0=None, S2=None) -> float:
    """``int mu l sqrt(k) |grad_s v|^2 / int 2 nu |grad_s v|^2``."""
    if S2 is None:
        S2 = deformation_tensor_magsq(state.vel, grid)
    den = _fluid_mean(2.0 * closure.nu * S2, grid)
    if den <= 0:
        return NAN
    return _fluid_mean(_nu_t(state, closure, grid, l0) * S2, grid) / den


def taylor_microscale(state: FlowState, grid: Grid, S2=None) -> float:
    if S2 is None:
        S2 = deformation_tensor_magsq(state.vel, grid)
    a, b = _fluid_mean(S2, grid), mean_sq_speed(state, grid)
    if a <= 0 or b <= 0:
        return NAN
    return (a / b) ** -0.5


def rms_length_scale(state: FlowState, closure: ClosureConfig, grid: Grid, l0=None) -> float:
    """``(mean l^2)^1/2`` over the fluid (0 before the model is active)."""
    if not state.model_active:
        return 0.0
    l = length_scale(closure, state.k, l0)
    return math.sqrt(_fluid_mean(np.where(grid.solid_mask, 0.0, l) ** 2, grid))


def mean_nu_t(state: FlowState, closure: ClosureConfig, grid: Grid, l0=None) -> float:
    return _fluid_mean(_nu_t(state, closure, grid, l0), grid)


def avg_l(state: FlowState, closure: ClosureConfig, grid: Grid, L: float, l0=None) -> float:
    return rms_length_scale(state, closure, grid, l0) / L


def avg_nuT(state: FlowState, closure: ClosureConfig, grid: Grid, L: float, U: float, l0=None) -> float:
    return mean_nu_t(state, closure, grid, l0) / (L * U)


# -- time averages -----------------------------------------------------------------

def time_average(t: Sequence[float], values: Sequence[float], t0: float, T: float | None = None) -> float:
    """Trapezoidal ``1/(T - t0) int_t0^T phi dt`` of a sampled series.

    Window ends that fall between samples are linearly interpolated; ``nan``
    samples are dropped.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(values, dtype=float)
    ok = np.isfinite(y)
    t, y = t[ok], y[ok]
    if T is None:
        T = float(t.max()) if t.size else t0
    if t.size < 2 or not T > t0 or t0 < t[0] - 1e-12 or T > t[-1] + 1e-12:
        raise ValueError(f"empty averaging window [{t0}, {T}]")
    inner = (t > t0) & (t < T)
    tt = np.concatenate([[t0], t[inner], [T]])
    yy = np.concatenate([[np.interp(t0, t, y)], y[inner], [np.interp(T, t, y)]])
    return float(np.trapezoid(yy, tt) / (T - t0))


class TimeAverager:
    """Running trapezoidal averages of several named statistics for ``t > t0``."""

    def __init__(self, t0: float = 1.0):
        self.t0 = t0
        self._last: tuple[float, dict] | None = None
        self._int: dict[str, float] = {}
        self._span = 0.0

    def add(self, t: float, values: dict[str, float]):
        if t < self.t0:
            self._last = (t, values)
            return
        if self._last is not None:
            t_prev, v_prev = self._last
            if t_prev < self.t0:
                # interpolate to the window start
                w = (self.t0 - t_prev) / (t - t_prev)
                v_prev = {k: v_prev[k] + w * (values[k] - v_prev[k]) for k in values}
                t_prev = self.t0
            h = t - t_prev
            for k, v in values.items():
                self._int[k] = self._int.get(k, 0.0) + 0.5 * h * (v_prev[k] + v)
            self._span += h
        self._last = (t, values)

    def averages(self) -> dict[str, float]:
        if self._span <= 0:
            raise ValueError("averages are only defined once t > t0")
        return {k: v / self._span for k, v in self._int.items()}


# -- records and series ---------------------------------------------------------------

STAT_HEADER = ("t", "energy", "eps_model", "intensity", "nu_eff", "vr", "taylor", "avg_l_over_L", "avg_nuT_over_LU")


@dataclass
class StatRecord:
    t: float
    kinetic_energy: float
    eps_model: float
    intensity: float
    nu_effective: float
    viscosity_ratio: float
    taylor_microscale: float
    avg_l_over_L: float
    avg_nuT_over_LU: float

    def row(self) -> list[float]:
        return [getattr(self, f.name) for f in fields(self)]


@dataclass
class RawSample:
    """Unnormalized sample; ``L`` and ``U`` are only known after the run."""

    t: float
    energy: float
    eps_model: float
    intensity: float
    nu_eff: float
    vr: float
    taylor: float
    rms_l: float
    mean_nu_t: float
    mean_sq_speed: float


def sample(state: FlowState, closure: ClosureConfig, grid: Grid, l0=None) -> RawSample:
    S2 = deformation_tensor_magsq(state.vel, grid)
    return RawSample(
        t=state.t,
        energy=energy_density(state, grid),
        eps_model=dissipation_rate(state, closure, grid, l0, S2),
        intensity=intensity(state, grid),
        nu_eff=effective_viscosity(state, closure, grid, l0, S2),
        vr=viscosity_ratio(state, closure, grid, l0, S2),
        taylor=taylor_microscale(state, grid, S2),
        rms_l=rms_length_scale(state, closure, grid, l0),
        mean_nu_t=mean_nu_t(state, closure, grid, l0),
        mean_sq_speed=mean_sq_speed(state, grid),
    )


@dataclass
class StatSeries:
    samples: list[RawSample] = field(default_factory=list)

    def append(self, s: RawSample):
        self.samples.append(s)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.samples], dtype=float)

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    def records(self, L: float, U: float) -> list[StatRecord]:
        return [
            StatRecord(s.t, s.energy, s.eps_model, s.intensity, s.nu_eff, s.vr, s.taylor,
                       s.rms_l / L, s.mean_nu_t / (L * U))
            for s in self.samples
        ]

    def write_csv(self, path: str | Path, L: float, U: float) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(STAT_HEADER)
            for r in self.records(L, U):
                w.writerow([repr(float(x)) for x in r.row()])
        return path


def read_stats_csv(path: str | Path) -> dict[str, np.ndarray]:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if tuple(header) != STAT_HEADER:
        raise ValueError(f"{path}: unexpected header {header}")
    data = np.array([[float(x) for x in r] for r in body], dtype=float).reshape(len(body), len(header))
    return {h: data[:, i] for i, h in enumerate(header)}


def first_crossing(t: Iterable[float], y: Iterable[float], level: float, t0: float = 0.0,
                   strict: bool = False) -> float | None:
    """First sample time ``>= t0`` with ``y <= level`` (``None`` if never).

    With ``strict`` the sample at ``t0`` itself is skipped, which matters
    when ``t0`` is also the model start and that sample precedes it.
    """
    for ti, yi in zip(t, y):
        after = ti > t0 + 1e-12 if strict else ti >= t0 - 1e-12
        if after and np.isfinite(yi) and yi <= level:
            return float(ti)
    return None
