"""
Scenario configuration, the time loop with sampling and outputs, run
comparison and parameter sweeps.

A run is described by one flat JSON document whose field names carry their
units (``tau_s``, ``nu_m2s`` ...).  :func:`run` executes it and returns a
:class:`RunResult`; when an output directory is given the following files
are written there::

    stats.csv          sampled statistics (see ``statistics.STAT_HEADER``)
    diagnostics.csv    per-step solver and k-budget scalars
    manifest.json      config, config hash, scales, file list, solver summary
    final.ckpt         binary checkpoint of the last state
    t<time>.ckpt       requested intermediate checkpoints
    snapshot_t<time>.csv  requested field snapshots
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .closure import ClosureConfig, initial_k_duct, initial_k_from_l0, static_length_scale
from .flowsolver import (
    FlowSolver,
    FlowState,
    RampedForce,
    SolverConfig,
    StepDiagnostics,
    body_force_annulus,
    read_checkpoint,
    rest_state,
    sample_force,
    write_checkpoint,
)
from .grid import NOSLIP, PERIODIC, Circle, Grid, VectorField, make_grid, write_snapshot_csv
from .linsolve import SolverError
from .statistics import (
    STAT_HEADER,
    FlowScales,
    ScalesUndefined,
    StatSeries,
    first_crossing,
    force_scales,
    read_stats_csv,
    sample,
    scales_consistent,
    time_average,
)

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "URANS_OUTPUT_ROOT"
SCENARIOS = ("annulus2d", "periodic_box", "channel", "decay_ode")
K_INITS = ("l0", "duct", "uniform", "zero")

GEOMETRY_NOTE = {
    "annulus2d": "annulus approximated on a periodic box [-1.05, 1.05]^2; outer-disk complement and the "
                 "obstacle are solid mask cells handled by Brinkman penalization",
    "periodic_box": "doubly periodic box, no walls",
    "channel": "periodic in x, no-slip box walls in y",
    "decay_ode": "doubly periodic box, zero velocity, uniform k",
}


# -- configuration ----------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioConfig:
    """One run.  ``None`` for ``reynolds`` means: estimate it from the forcing.

    The estimate is ``Re = L U_f / nu`` with ``U_f = (F L)^1/2``, the
    velocity scale at which inertia balances the force.
    """

    scenario: str = "annulus2d"
    resolution: int = 64
    nu_m2s: float = 1e-4
    mode: str = "kinematic"
    mu: float = 0.55
    tau_s: float = 1.0
    theta: float | None = None
    k_floor_m2s2: float = 0.0
    dt_s: float = 0.01
    t_end_s: float = 10.0
    proj_tol: float = 1e-8
    penal_eta_s: float = 1e-6
    ramp: bool = True
    model_start_s: float = 1.0
    cfl_max: float = 0.9
    k_init: str = "l0"
    k0_m2s2: float = 1.0
    l0_m: float | None = None
    reynolds: float | None = None
    force_amplitude: float = 1.0
    t0_s: float = 1.0
    sample_every: int = 10
    nse_reference: bool = False
    checkpoint_times_s: tuple[float, ...] = ()
    snapshot_times_s: tuple[float, ...] = ()
    restart_from: str | None = None
    output_dir: str | None = None
    sweep_param: str | None = None
    sweep_values: tuple[float, ...] = ()
    checks: tuple[str, ...] = ()

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.k_init not in K_INITS:
            raise ValueError(f"unknown k_init {self.k_init!r}")
        if self.sample_every < 1:
            raise ValueError("sample_every must be >= 1")
        if self.sweep_param is not None and not self.sweep_values:
            raise ValueError("sweep lists must be non-empty")
        # validate the nested configs early
        self.closure()
        self.solver()

    # ---- conversions -------------------------------------------------------------
    def closure(self) -> ClosureConfig:
        return ClosureConfig(mode=self.mode, mu=self.mu, tau=self.tau_s, nu=self.nu_m2s, theta=self.theta,
                             k_floor=self.k_floor_m2s2)

    def solver(self) -> SolverConfig:
        return SolverConfig(dt=self.dt_s, t_end=self.t_end_s, proj_tol=self.proj_tol, penal_eta=self.penal_eta_s,
                            ramp=self.ramp, model_start=self.model_start_s, cfl_max=self.cfl_max)

    def with_(self, **kw) -> "ScenarioConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ScenarioConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        d = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def physics_dict(self) -> dict[str, Any]:
        """Fields that determine the numbers produced (output plumbing removed)."""
        d = self.to_dict()
        for k in ("output_dir", "restart_from", "sweep_param", "sweep_values", "checks"):
            d.pop(k)
        return d

    def hash(self) -> str:
        """SHA-256 of the canonical JSON (sorted keys), stable under field reordering."""
        return config_hash(self.physics_dict())


def config_hash(d: dict[str, Any]) -> str:
    return hashlib.sha256(json.dumps(d, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


# -- scenarios ----------------------------------------------------------------------

def _periodic_cell_force(x, y, t, ramp=True, amp=1.0):
    s = amp * (min(t, 1.0) if ramp else 1.0)
    return s * np.sin(x) * np.cos(y), -s * np.cos(x) * np.sin(y)


def _channel_force(x, y, t, ramp=True, amp=1.0):
    s = amp * (min(t, 1.0) if ramp else 1.0)
    return s + 0.0 * x, 0.0 * y


def _annulus_force(x, y, t, ramp=True, amp=1.0):
    fx, fy = body_force_annulus(x, y, t, ramp)
    return amp * fx, amp * fy


@dataclass
class Scenario:
    grid: Grid
    force_fn: Any  # (x, y, t, ramp, amp) -> (fx, fy), or None for no forcing


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    n = cfg.resolution
    if cfg.scenario == "annulus2d":
        h = 1.05
        g = make_grid(((-h, h), (-h, h)), n, PERIODIC, obstacles=[Circle(0.5, 0.0, 0.1)], outer=Circle(0.0, 0.0, 1.0))
        return Scenario(g, _annulus_force)
    if cfg.scenario == "periodic_box":
        g = make_grid(((0.0, 2 * math.pi), (0.0, 2 * math.pi)), n, PERIODIC)
        return Scenario(g, _periodic_cell_force)
    if cfg.scenario == "channel":
        g = make_grid(((0.0, 2 * math.pi), (0.0, 1.0)), (2 * n, n) if n <= 64 else (n, n), (PERIODIC, NOSLIP))
        return Scenario(g, _channel_force)
    g = make_grid(((0.0, 1.0), (0.0, 1.0)), n, PERIODIC)
    return Scenario(g, None)


def steady_force(cfg: ScenarioConfig, scen: Scenario, fluid_only: bool = True) -> VectorField | None:
    if scen.force_fn is None:
        return None
    return sample_force(scen.grid, scen.force_fn, 1.0, fluid_only=fluid_only, ramp=False, amp=cfg.force_amplitude)


def reynolds_estimate(cfg: ScenarioConfig, scen: Scenario) -> float:
    if cfg.reynolds is not None:
        return float(cfg.reynolds)
    f = steady_force(cfg, scen, fluid_only=False)
    if f is None or cfg.nu_m2s == 0:
        return 1.0
    try:
        F, L, _, _ = force_scales(f, scen.grid)
    except ScalesUndefined:
        return 1.0
    return L * math.sqrt(F * L) / cfg.nu_m2s


def length_scale_field(cfg: ScenarioConfig, scen: Scenario, re: float) -> np.ndarray:
    g = scen.grid
    if cfg.l0_m is not None:
        return np.where(g.solid_mask, 0.0, cfg.l0_m)
    return static_length_scale(g, re)


def initial_k(cfg: ScenarioConfig, scen: Scenario, state: FlowState, l0: np.ndarray, re: float) -> np.ndarray:
    g = scen.grid
    if cfg.k_init == "l0":
        tau = cfg.tau_s if cfg.mode != "static" else 1.0
        k = initial_k_from_l0(l0, tau)
    elif cfg.k_init == "duct":
        k = initial_k_duct(state.vel, re, g)
    elif cfg.k_init == "uniform":
        k = np.full((g.nx, g.ny), cfg.k0_m2s2)
    else:
        k = g.zeros_scalar()
    return np.where(g.solid_mask, 0.0, k)


# -- results --------------------------------------------------------------------------

DIAG_FIELDS = ("t", "cfl", "div_max", "poisson_iterations", "energy", "k_old", "k_int", "production_old",
               "production", "k_sink", "boundary_loss", "clamped_mass", "k_min", "work", "dissipation",
               "audit_residual", "model_active")


@dataclass
class RunManifest:
    config: dict
    config_hash: str
    status: str = "ok"
    message: str = ""
    failure_step: int | None = None
    start_wall: float = 0.0
    end_wall: float = 0.0
    files: list[str] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    scales: dict = field(default_factory=dict)
    geometry_note: str = ""
    output_dir: str | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default))
        return path

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o)}")


@dataclass
class RunResult:
    config: ScenarioConfig
    grid: Grid
    closure: ClosureConfig
    l0: np.ndarray
    reynolds: float
    scales: FlowScales | None
    series: StatSeries
    diagnostics: dict[str, np.ndarray]
    state: FlowState
    manifest: RunManifest
    velocity_samples: list[tuple[float, VectorField]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.manifest.status == "ok"

    def records(self):
        if self.scales is None:
            raise ScalesUndefined("run has no flow scales")
        return self.series.records(self.scales.L, self.scales.U)

    def stat(self, name: str) -> np.ndarray:
        """Normalized statistic column by its CSV header name."""
        col = {
            "t": "t", "energy": "energy", "eps_model": "eps_model", "intensity": "intensity",
            "nu_eff": "nu_eff", "vr": "vr", "taylor": "taylor",
        }
        if name in col:
            return self.series.column(col[name])
        s = self.scales
        if name == "avg_l_over_L":
            return self.series.column("rms_l") / s.L
        if name == "avg_nuT_over_LU":
            return self.series.column("mean_nu_t") / (s.L * s.U)
        raise KeyError(name)


def _time_key(t: float) -> str:
    return f"{t:g}".replace(".", "p")


def _step_of(t: float, dt: float) -> int:
    return int(round(t / dt))


def _diag_row(d: StepDiagnostics, active: bool) -> list:
    return [d.t, d.cfl, d.div_max, d.poisson_iterations, d.energy_new, d.k_old, d.k_new, d.production_old,
            d.production, d.k_sink, d.boundary_loss, d.clamped_mass, d.k_min, d.work,
            d.viscous_dissipation + d.k_dissipation, d.audit_residual, int(active)]


# -- the run ----------------------------------------------------------------------------

def resolve_output_dir(cfg: ScenarioConfig, out_dir: str | Path | None | bool) -> Path | None:
    if out_dir is False:
        return None
    if out_dir is not None and out_dir is not True:
        return Path(out_dir)
    if cfg.output_dir:
        return Path(cfg.output_dir)
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
    return root / f"{cfg.scenario}-{cfg.hash()[:12]}"


def run(cfg: ScenarioConfig, out_dir: str | Path | None | bool = None, *, keep_velocity: bool = False,
        progress: bool = False) -> RunResult:
    """Execute one scenario end to end.

    ``out_dir=False`` keeps everything in memory.  Solver errors do not
    propagate: the manifest records the failure step and ``status="failed"``.
    """
    start = time.time()
    out = resolve_output_dir(cfg, out_dir)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    scen = build_scenario(cfg)
    g = scen.grid
    closure = cfg.closure()
    scfg = cfg.solver()
    re = reynolds_estimate(cfg, scen)
    l0 = length_scale_field(cfg, scen, re)
    f_steady = steady_force(cfg, scen)
    force = RampedForce(f_steady, ramp=cfg.ramp) if f_steady is not None else None
    solver = FlowSolver(g, closure, scfg, force, l0=l0, nu_t_override=0.0 if cfg.nse_reference else None)

    model_start = 0.0 if cfg.scenario == "decay_ode" else cfg.model_start_s
    if cfg.restart_from:
        state = read_checkpoint(cfg.restart_from, g)
    else:
        state = rest_state(g, model_active=False)
        if cfg.scenario == "decay_ode":
            state.model_active = True
            state.k = initial_k(cfg, scen, state, l0, re)

    manifest = RunManifest(config=cfg.to_dict(), config_hash=cfg.hash(), start_wall=start,
                           geometry_note=GEOMETRY_NOTE[cfg.scenario], output_dir=str(out) if out else None)
    series = StatSeries()
    diag_rows: list[list] = []
    vel_samples: list[tuple[float, VectorField]] = []
    files: list[Path] = []

    n_end = _step_of(cfg.t_end_s, cfg.dt_s)
    ckpt_steps = {_step_of(t, cfg.dt_s): t for t in cfg.checkpoint_times_s}
    snap_steps = {_step_of(t, cfg.dt_s): t for t in cfg.snapshot_times_s}

    def record(st: FlowState):
        series.append(sample(st, closure, g, l0))
        if keep_velocity:
            vel_samples.append((st.t, st.vel.copy()))

    def outputs(st: FlowState):
        if out is None:
            return
        if st.step in ckpt_steps:
            files.append(write_checkpoint(out / f"t{_time_key(ckpt_steps[st.step])}.ckpt", st, g))
        if st.step in snap_steps:
            files.append(write_snapshot_csv(out / f"snapshot_t{_time_key(snap_steps[st.step])}.csv", g, st.vel,
                                            st.p, st.k, solver.nu_t(st)))

    record(state)
    outputs(state)
    try:
        while state.step < n_end:
            if (not state.model_active and not cfg.nse_reference
                    and state.t >= model_start - 1e-9 * max(1.0, model_start)):
                state.k = initial_k(cfg, scen, state, l0, re)
                state.model_active = True
            state, d = solver.step(state)
            diag_rows.append(_diag_row(d, state.model_active))
            if state.step % cfg.sample_every == 0 or state.step == n_end:
                record(state)
            outputs(state)
            if progress and state.step % max(1, n_end // 20) == 0:
                log.info("t=%.3f cfl=%.3f", state.t, d.cfl)
    except SolverError as exc:
        manifest.status = "failed"
        manifest.failure_step = state.step + 1
        manifest.message = str(exc)
        log.error("run failed at step %d: %s", state.step + 1, exc)

    diag = {name: np.array([r[i] for r in diag_rows], dtype=float) for i, name in enumerate(DIAG_FIELDS)}

    scales = None
    if f_steady is not None:
        try:
            F, L, sup, rms = force_scales(steady_force(cfg, scen, fluid_only=False), g)
            t_arr, msq = series.column("t"), series.column("mean_sq_speed")
            U = math.sqrt(time_average(t_arr, msq, cfg.t0_s)) if t_arr[-1] > cfg.t0_s else math.nan
            scales = FlowScales(F=F, L=L, U=U, nu=cfg.nu_m2s, L_domain=g.domain_length, sup_grad_f=sup,
                                rms_grad_f=rms)
        except (ScalesUndefined, ValueError) as exc:
            log.warning("flow scales undefined: %s", exc)
    else:
        # unforced runs: normalize by the domain and the initial k
        scales = FlowScales(F=0.0, L=g.domain_length, U=math.sqrt(max(2 * cfg.k0_m2s2, 1e-300)), nu=cfg.nu_m2s,
                            L_domain=g.domain_length)

    k_total = diag["k_int"] if diag_rows else np.zeros(1)
    manifest.diagnostics = {
        "steps": len(diag_rows),
        "max_cfl": float(diag["cfl"].max()) if diag_rows else 0.0,
        "max_div": float(diag["div_max"].max()) if diag_rows else 0.0,
        "max_poisson_iterations": int(diag["poisson_iterations"].max()) if diag_rows else 0,
        "total_clamped_mass": float(diag["clamped_mass"].sum()) if diag_rows else 0.0,
        "max_clamped_fraction": float(np.max(diag["clamped_mass"] / np.maximum(k_total, 1e-300))) if diag_rows else 0.0,
        "min_k_before_clamp": float(diag["k_min"].min()) if diag_rows else 0.0,
        "reynolds_l0": re,
    }
    if scales is not None:
        manifest.scales = scales.to_dict()
        manifest.scales["consistent"] = bool(scales_consistent(scales)) if scales.F > 0 else None

    if out is not None:
        if scales is not None and math.isfinite(scales.U) and scales.U > 0:
            files.append(series.write_csv(out / "stats.csv", scales.L, scales.U))
        else:
            files.append(series.write_csv(out / "stats.csv", scales.L if scales else 1.0, 1.0))
        files.append(_write_diagnostics(out / "diagnostics.csv", diag))
        files.append(write_checkpoint(out / "final.ckpt", state, g))
        manifest.files = [p.name for p in files] + ["manifest.json"]
    manifest.end_wall = time.time()
    if out is not None:
        manifest.write(out / "manifest.json")

    return RunResult(cfg, g, closure, l0, re, scales, series, diag, state, manifest, vel_samples)


def _write_diagnostics(path: Path, diag: dict[str, np.ndarray]) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DIAG_FIELDS)
        n = len(diag["t"])
        for i in range(n):
            w.writerow([repr(float(diag[f][i])) for f in DIAG_FIELDS])
    return path


def read_diagnostics_csv(path: str | Path) -> dict[str, np.ndarray]:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float).reshape(len(rows) - 1, len(rows[0]))
    return {h: data[:, i] for i, h in enumerate(rows[0])}


# -- comparison -------------------------------------------------------------------------

@dataclass
class Comparison:
    t: np.ndarray
    a: dict[str, np.ndarray]
    b: dict[str, np.ndarray]
    averages_a: dict[str, float]
    averages_b: dict[str, float]
    t0: float

    @property
    def avg_diff(self) -> dict[str, float]:
        return {k: self.averages_a[k] - self.averages_b[k] for k in self.averages_a}

    def crossing(self, which: str, name: str, level: float) -> float | None:
        """First sample strictly after ``t0`` where ``name`` drops to ``level``."""
        series = self.a if which == "a" else self.b
        return first_crossing(self.t, series[name], level, self.t0, strict=True)

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        names = [h for h in STAT_HEADER if h != "t"]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"{n}_{s}" for n in names for s in ("a", "b", "diff")])
            for i, t in enumerate(self.t):
                row = [t]
                for n in names:
                    row += [self.a[n][i], self.b[n][i], self.a[n][i] - self.b[n][i]]
                w.writerow([repr(float(x)) for x in row])
            w.writerow([])
            w.writerow(["time_average_from_t0", self.t0])
            for n in names:
                w.writerow([n, repr(self.averages_a[n]), repr(self.averages_b[n]), repr(self.avg_diff[n])])
        return path


def _safe_avg(t, y, t0):
    try:
        return time_average(t, y, t0)
    except ValueError:
        return math.nan


def compare_series(sa: dict[str, np.ndarray], sb: dict[str, np.ndarray], t0: float = 1.0) -> Comparison:
    if sa["t"].shape != sb["t"].shape or not np.allclose(sa["t"], sb["t"], rtol=0, atol=1e-9):
        raise ValueError("runs do not share sampling times")
    names = [h for h in STAT_HEADER if h != "t"]
    return Comparison(
        t=sa["t"], a={n: sa[n] for n in names}, b={n: sb[n] for n in names},
        averages_a={n: _safe_avg(sa["t"], sa[n], t0) for n in names},
        averages_b={n: _safe_avg(sb["t"], sb[n], t0) for n in names},
        t0=t0,
    )


def result_series(res: RunResult) -> dict[str, np.ndarray]:
    return {h: res.stat(h) for h in STAT_HEADER}


def compare_results(a: RunResult, b: RunResult) -> Comparison:
    _check_comparable(a.config.to_dict(), b.config.to_dict())
    return compare_series(result_series(a), result_series(b), a.config.t0_s)


def _check_comparable(ca: dict, cb: dict):
    for key in ("scenario", "resolution", "dt_s", "sample_every"):
        if ca[key] != cb[key]:
            raise ValueError(f"runs differ in {key}: {ca[key]} vs {cb[key]}")


def compare(manifest_a: str | Path, manifest_b: str | Path, out_csv: str | Path | None = None) -> Comparison:
    """Pair two finished runs by their manifests and write the comparison CSV."""
    ma, mb = RunManifest.load(manifest_a), RunManifest.load(manifest_b)
    _check_comparable(ma.config, mb.config)
    sa = read_stats_csv(Path(manifest_a).parent / "stats.csv")
    sb = read_stats_csv(Path(manifest_b).parent / "stats.csv")
    cmp = compare_series(sa, sb, ma.config.get("t0_s", 1.0))
    if out_csv is not None:
        cmp.write_csv(out_csv)
    return cmp


# -- sweeps -------------------------------------------------------------------------------

_SWEEP_ALIASES = {"tau": "tau_s", "nu": "nu_m2s", "dt": "dt_s", "theta": "theta", "mu": "mu"}


def sweep_configs(cfg: ScenarioConfig, param: str, values) -> list[ScenarioConfig]:
    name = _SWEEP_ALIASES.get(param, param)
    if name not in {f.name for f in dataclasses.fields(ScenarioConfig)}:
        raise ValueError(f"unknown sweep parameter {param!r}")
    values = list(values)
    if not values:
        raise ValueError("sweep lists must be non-empty")
    out = []
    base_dir = resolve_output_dir(cfg, None)
    for v in values:
        c = cfg.with_(**{name: v}, sweep_param=None, sweep_values=())
        out.append(c.with_(output_dir=str(base_dir / f"{name}={v:g}")))
    return out


def _run_to_manifest(cfg: ScenarioConfig) -> dict:
    return run(cfg).manifest.to_dict()


def sweep(cfg: ScenarioConfig, param: str, values, workers: int = 1) -> list[RunManifest]:
    """Run one config per value; independent runs go to a process pool when ``workers > 1``."""
    cfgs = sweep_configs(cfg, param, values)
    if workers <= 1:
        return [run(c).manifest for c in cfgs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [RunManifest(**m) for m in pool.map(_run_to_manifest, cfgs)]
