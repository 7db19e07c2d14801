"""
Numerical checks of the model's structural properties.

Each check returns a :class:`ConditionReport`; failures are reported, never
raised.  Checks that need simulations take a :class:`ScenarioConfig` and
drive :func:`urans1eq.runner.run`; checks that only post-process take a
finished :class:`RunResult`.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .closure import SQRT2, ClosureConfig, decay_closed_form, k_step, turbulent_viscosity
from .grid import PERIODIC, make_grid
from .runner import RunResult, ScenarioConfig, run
from .statistics import time_average

THETA_13 = 2.0 / 1.3


@dataclass
class ConditionReport:
    condition: str
    passed: bool
    measured: dict[str, Any]
    bound: dict[str, Any]
    tolerance: Any
    config: dict[str, Any] = field(default_factory=dict)
    notes: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = bool(d.pop("passed"))
        return _jsonable(d)

    def summary(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.condition}: {self.notes}"


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.floating, float)):
        x = float(o)
        return x if math.isfinite(x) else None
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    return o


def write_report(reports: Sequence[ConditionReport], path: str | Path) -> Path:
    """Aggregate reports into one ``verification_report.json`` document."""
    path = Path(path)
    doc = {"all_pass": all(r.passed for r in reports), "checks": [r.to_dict() for r in reports]}
    path.write_text(json.dumps(doc, indent=2))
    return path


def _meta(res: RunResult) -> dict:
    c = res.config
    return {"scenario": c.scenario, "resolution": c.resolution, "mode": c.mode, "tau_s": c.tau_s, "mu": c.mu,
            "dt_s": c.dt_s, "t_end_s": c.t_end_s, "nu_m2s": c.nu_m2s}


def _window(res: RunResult, T: float | None):
    """Per-step diagnostics restricted to ``t <= T``."""
    d = res.diagnostics
    if T is None:
        return d
    m = d["t"] <= T + 1e-9
    return {k: v[m] for k, v in d.items()}


# -- Condition 1 ---------------------------------------------------------------------

def velocity_gap(a: RunResult, b: RunResult) -> float:
    """``max_t (|Omega|^-1 int_fluid |v_a - v_b|^2)^1/2`` over the common sample times."""
    g = a.grid
    wu = (1.0 - g.u_solid) * g.cell_area
    wv = (1.0 - g.v_solid) * g.cell_area
    gap = 0.0
    for (ta, va), (tb, vb) in zip(a.velocity_samples, b.velocity_samples):
        if abs(ta - tb) > 1e-9:
            raise ValueError("runs do not share sampling times")
        e = float(((va.u - vb.u) ** 2 * wu).sum() + ((va.v - vb.v) ** 2 * wv).sum()) / g.fluid_area
        gap = max(gap, math.sqrt(e))
    return gap


def check_condition1(base: ScenarioConfig, taus: Sequence[float] = (1e-2, 1e-3, 1e-4), rel_tol: float = 1e-3,
                     runs: dict | None = None) -> ConditionReport:
    """Model reverts to the Navier-Stokes equations as ``tau -> 0``.

    ``taus`` is a decreasing list; every run shares grid and ``dt`` with the
    ``nu_T = 0`` reference.  ``runs`` may carry precomputed results keyed by
    ``"ref"`` and each tau.
    """
    if len(taus) < 3:
        raise ValueError("need at least 3 tau values")
    runs = dict(runs or {})
    base = base.with_(mode="kinematic")
    if "ref" not in runs:
        runs["ref"] = run(base.with_(nse_reference=True), out_dir=False, keep_velocity=True)
    ref = runs["ref"]
    gaps = []
    for tau in taus:
        if tau not in runs:
            runs[tau] = run(base.with_(tau_s=tau), out_dir=False, keep_velocity=True)
        gaps.append(velocity_gap(runs[tau], ref))
    U = ref.scales.U if ref.scales is not None else math.nan
    decreasing = all(b < a for a, b in zip(gaps, gaps[1:]))
    small = gaps[-1] < rel_tol * U
    # frozen k: nu_T strictly increasing and linear in tau
    k1 = np.ones((4, 4))
    cl = ClosureConfig(mode="kinematic", mu=base.mu, nu=base.nu_m2s)
    nt = [float(turbulent_viscosity(cl.with_(tau=t), k1).max()) for t in sorted(taus) + [2 * max(taus)]]
    monotone_nut = all(b > a for a, b in zip(nt, nt[1:]))
    ok = all(r.ok for r in runs.values() if isinstance(r, RunResult))
    return ConditionReport(
        "1", bool(decreasing and small and monotone_nut and ok),
        {"taus": list(taus), "gaps": gaps, "U": U, "gap_over_U": [g_ / U for g_ in gaps],
         "nu_t_frozen_k_increasing": monotone_nut, "runs_ok": ok},
        {"gaps_strictly_decreasing": True, "smallest_gap_below": rel_tol * U},
        rel_tol, {**_meta(ref), "k_init": base.k_init},
        notes=f"gaps={['%.3e' % g_ for g_ in gaps]} U={U:.4g}",
    )


# -- Condition 3 ---------------------------------------------------------------------

def check_condition3(res: RunResult, T: float | None = None, slope_tol: float = 1e-3) -> ConditionReport:
    """Finite kinetic energy: ``E = 1/2 ||v||^2 + int k`` stays bounded.

    Passes when the series is finite and its supremum is attained before
    ``0.9 T`` or the late-time slope (last 30 % of the run, divided by the
    late mean) is at most ``slope_tol`` per unit time.  The saturation
    envelope ``E(t) <= E(0) exp(-alpha t / 2) + W_max / alpha`` with
    ``alpha = min D / E`` and ``W_max = max (f, v)`` is checked at every
    step as a qualitative bound.
    """
    d = _window(res, T)
    t, E = d["t"], d["energy"]
    T = float(t[-1]) if T is None else T
    finite = bool(np.all(np.isfinite(E)))
    i_max = int(np.argmax(E))
    late = t >= t[0] + 0.7 * (T - t[0])
    slope = float(np.polyfit(t[late], E[late], 1)[0]) if late.sum() >= 2 else 0.0
    mean_late = float(np.mean(E[late])) if late.any() else float(E[-1])
    rel_slope = slope / mean_late if mean_late > 0 else 0.0
    bounded = finite and (t[i_max] <= 0.9 * T or rel_slope <= slope_tol)
    pos = E > 0
    alpha = float(np.min(d["dissipation"][pos] / E[pos])) if pos.any() else 0.0
    w_max = float(np.max(d["work"])) if len(t) else 0.0
    if alpha > 0:
        env = E[0] * np.exp(-0.5 * alpha * (t - t[0])) + max(w_max, 0.0) / alpha
        envelope_ok = bool(np.all(E <= env * (1 + 1e-9) + 1e-14))
    else:
        envelope_ok = w_max <= 0.0 and bool(np.all(np.diff(E) <= 1e-12 * max(E.max(), 1.0)))
    return ConditionReport(
        "3", bool(bounded and envelope_ok),
        {"sup_energy": float(E.max()), "t_sup": float(t[i_max]), "late_slope": slope, "late_rel_slope": rel_slope,
         "final_energy": float(E[-1]), "envelope_ok": envelope_ok, "alpha": alpha, "w_max": w_max},
        {"t_sup_before": 0.9 * T, "late_rel_slope_max": slope_tol},
        slope_tol, {**_meta(res), "T": T},
        notes=f"sup E={E.max():.4g} at t={t[i_max]:.2f}, late rel slope={rel_slope:.2e}",
    )


# -- Condition 4 ---------------------------------------------------------------------

def condition4_bound(U: float, L: float, Re: float) -> float:
    return 4.0 * (1.0 + 1.0 / Re) * U**3 / L


def check_condition4(res: RunResult, T: float | None = None, tol: float = 0.05) -> ConditionReport:
    """``<eps_model> <= 4 (1 + 1/Re) U^3 / L`` with scales recomputed on ``[t0, T]``."""
    c = res.config
    s = res.series
    t = s.column("t")
    T = float(t[-1]) if T is None else T
    m = t <= T + 1e-9
    t, eps, msq = t[m], s.column("eps_model")[m], s.column("mean_sq_speed")[m]
    eps_avg = time_average(t, eps, c.t0_s, T)
    U = math.sqrt(time_average(t, msq, c.t0_s, T))
    L = res.scales.L
    Re = L * U / c.nu_m2s
    bound = condition4_bound(U, L, Re)
    Tstar = L / U if U > 0 else math.inf
    ratio_tau = c.tau_s / Tstar if c.mode != "static" else 0.0
    threshold = 1.0 / math.sqrt(c.mu)
    in_hyp = ratio_tau <= threshold
    ok = eps_avg <= bound * (1 + tol)
    return ConditionReport(
        "4", bool(ok),
        {"eps_avg": eps_avg, "U": U, "L": L, "Re": Re, "Tstar": Tstar, "tau_over_Tstar": ratio_tau,
         "in_hypothesis": bool(in_hyp), "eps_over_bound": eps_avg / bound if bound > 0 else math.nan},
        {"bound": bound, "tau_over_Tstar_max": threshold},
        tol, {**_meta(res), "T": T, "t0": c.t0_s},
        notes=(f"<eps>={eps_avg:.4g} bound={bound:.4g} tau/T*={ratio_tau:.3f} "
               f"({'in' if in_hyp else 'OUT OF'} hypothesis)"),
    )


# -- Lemma 1 and the k-equation identity -------------------------------------------------

def lemma1_sides(res: RunResult, T: float) -> tuple[float, float]:
    """Time averages of ``<sqrt2 mu k tau>`` and ``2 mu tau^2 <sqrt2 mu k tau |grad_s v|^2>``."""
    c, g = res.closure, res.grid
    d = _window(res, T)
    act = d["model_active"] > 0
    t_n = d["t"][act] - res.config.dt_s  # both integrands are taken at the start of each step
    lhs = SQRT2 * c.mu * c.tau * d["k_old"][act] / g.fluid_area
    rhs = 2.0 * c.mu * c.tau**2 * d["production_old"][act] / g.fluid_area
    t0 = max(res.config.t0_s, float(t_n[0]))
    return time_average(t_n, lhs, t0, T - res.config.dt_s), time_average(t_n, rhs, t0, T - res.config.dt_s)


def check_lemma1(res: RunResult, horizons: Sequence[float] | None = None, tol: float = 0.10) -> ConditionReport:
    """Production/relaxation balance; discrepancy within ``tol`` and shrinking with ``T``."""
    if res.closure.mode != "kinematic":
        raise ValueError("Lemma 1 concerns the kinematic length scale")
    if horizons is None:
        horizons = (0.5 * res.config.t_end_s, res.config.t_end_s)
    discs, sides = [], []
    for T in horizons:
        a, b = lemma1_sides(res, T)
        m = max(abs(a), abs(b))
        discs.append(abs(a - b) / m if m > 0 else 0.0)
        sides.append((a, b))
    shrinking = all(y < x for x, y in zip(discs, discs[1:]))
    ok = discs[0] <= tol and shrinking
    # share of production leaving through k = 0 boundaries (absent for periodic k)
    d = _window(res, horizons[-1])
    act = (d["model_active"] > 0) & (d["t"] > res.config.t0_s)
    prod = float(np.sum(d["production"][act]))
    loss_share = float(np.sum(d["boundary_loss"][act])) / prod if prod > 0 else 0.0
    return ConditionReport(
        "Lemma1", bool(ok),
        {"horizons": list(horizons), "discrepancy": discs, "lhs_rhs": sides, "decreasing_in_T": shrinking,
         "boundary_loss_share_of_production": loss_share},
        {"discrepancy_max_at_first_horizon": tol, "strictly_decreasing": True},
        tol, _meta(res),
        notes=f"discrepancy {', '.join(f'T={T:g}: {x:.3%}' for T, x in zip(horizons, discs))}",
    )


def k_energy_residuals(res: RunResult) -> dict[str, np.ndarray]:
    """Per-step residuals of ``d/dt int k + a int k = int nu_T |grad_s v|^2`` (kinematic).

    ``first_order``: the identity with old-level production and relaxation;
    ``bookkeeping``: the scheme's own budget including sink, boundary loss
    and clamped mass, which must close to round-off.
    """
    c, dt = res.closure, res.config.dt_s
    d = res.diagnostics
    act = d["model_active"] > 0
    a = 1.0 / (SQRT2 * c.tau)
    dK = (d["k_int"] - d["k_old"]) / dt
    first = dK + a * d["k_old"] - d["production_old"]
    book = dK - (d["production"] - d["k_sink"] - d["boundary_loss"] + d["clamped_mass"] / dt)
    return {"t": d["t"][act], "first_order": first[act], "bookkeeping": book[act]}


def check_k_energy_equality(coarse: RunResult, fine: RunResult, band: float = 0.2) -> ConditionReport:
    """Halving ``dt`` halves the max residual within ``band`` (ratio in ``[2(1-band), 2(1+band)]``)."""
    if abs(fine.config.dt_s - 0.5 * coarse.config.dt_s) > 1e-15:
        raise ValueError("fine run must use half the time step")
    rc, rf = k_energy_residuals(coarse), k_energy_residuals(fine)
    area = coarse.grid.fluid_area
    mc = float(np.max(np.abs(rc["first_order"]))) / area
    mf = float(np.max(np.abs(rf["first_order"]))) / area
    ratio = mc / mf if mf > 0 else math.inf
    scale = max(float(np.max(np.abs(coarse.diagnostics["production"]))), 1e-300)
    book = max(float(np.max(np.abs(rc["bookkeeping"]))), float(np.max(np.abs(rf["bookkeeping"])))) / scale
    ok = 2 * (1 - band) <= ratio <= 2 * (1 + band) and book <= 1e-9
    return ConditionReport(
        "k_energy", bool(ok),
        {"max_residual_dt": mc, "max_residual_dt_half": mf, "ratio": ratio, "bookkeeping_rel": book},
        {"ratio_range": [2 * (1 - band), 2 * (1 + band)], "bookkeeping_rel_max": 1e-9},
        band, {**_meta(coarse), "dt_fine": fine.config.dt_s},
        notes=f"max residual ratio {ratio:.3f}, bookkeeping {book:.1e}",
    )


def k_energy_config(dt: float = 0.01, T: float = 2.0, resolution: int = 32) -> ScenarioConfig:
    """Periodic cellular-forcing scenario used for the k-equation refinement pair."""
    return ScenarioConfig(scenario="periodic_box", resolution=resolution, nu_m2s=1e-2, mode="kinematic", tau_s=1.0,
                          dt_s=dt, t_end_s=T, model_start_s=0.0, k_init="uniform", k0_m2s2=0.01, sample_every=10)


# -- divergence and positivity ----------------------------------------------------------

def check_divergence(res: RunResult) -> ConditionReport:
    m = float(np.max(res.diagnostics["div_max"]))
    tol = res.config.proj_tol
    return ConditionReport("divergence", bool(m <= tol and res.ok), {"max_div": m}, {"proj_tol": tol}, tol,
                           _meta(res), notes=f"max |div v| = {m:.2e}")


def check_positivity(res: RunResult, T: float | None = None, rel: float = 1e-12) -> ConditionReport:
    d = _window(res, T)
    act = d["model_active"] > 0
    kmin = float(np.min(d["k_min"][act])) if act.any() else 0.0
    frac = d["clamped_mass"][act] / np.maximum(d["k_int"][act], 1e-300)
    worst = float(np.max(frac)) if act.any() else 0.0
    ok = kmin >= 0.0 and worst < rel and res.ok
    return ConditionReport("positivity", bool(ok), {"min_k_before_clamp": kmin, "max_clamped_fraction": worst},
                           {"min_k": 0.0, "clamped_fraction_max": rel}, rel, _meta(res),
                           notes=f"min k={kmin:.2e}, clamped fraction={worst:.1e}")


# -- decay exponents ------------------------------------------------------------------------

def decay_history(closure: ClosureConfig, k0: float = 1.0, l0: float = 1.0, t_end: float = 1e5, dt0: float = 1e-2,
                  growth: float | None = 1e-2, n: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Zero-velocity, uniform-``k`` history of the k step on a small periodic grid.

    With ``growth`` the step size is ``max(dt0, growth * t)``, which resolves
    polynomial decay over many decades in time; ``None`` keeps ``dt0``.
    """
    g = make_grid(((0.0, 1.0), (0.0, 1.0)), n, PERIODIC)
    vel = g.zeros_vector()
    l0f = np.full((n, n), l0)
    k = np.full((n, n), k0)
    ts, ks = [0.0], [k0]
    t = 0.0
    while t < t_end * (1 - 1e-12):
        dt = dt0 if growth is None else max(dt0, growth * t)
        dt = min(dt, t_end - t)
        k, _ = k_step(k, vel, closure, g, dt, l0=l0f, vel_production=vel)
        t += dt
        ts.append(t)
        ks.append(float(k.mean()))
    return np.array(ts), np.array(ks)


def _loglog_slope(t, k, t_lo, t_hi):
    m = (t >= t_lo) & (t <= t_hi) & (k > 0)
    return float(np.polyfit(np.log(t[m]), np.log(k[m]), 1)[0])


def _loglin_slope(t, k, t_lo, t_hi):
    m = (t >= t_lo) & (t <= t_hi) & (k > 0)
    return float(np.polyfit(t[m], np.log(k[m]), 1)[0])


def check_decay_exponents(tau: float = 1.0, mu: float = 0.55) -> ConditionReport:
    """Kinematic exponential decay, static ``t^-2`` and geometric ``t^-1.3`` decay."""
    kin = ClosureConfig(mode="kinematic", tau=tau, mu=mu)
    t, k = decay_history(kin, t_end=10.0 * tau, dt0=1e-2 * tau, growth=None)
    s_kin = _loglin_slope(t, k, 2.0 * tau, 10.0 * tau)
    target_kin = -1.0 / (SQRT2 * tau)
    e_kin = abs(s_kin / target_kin - 1.0)
    oracle_err = float(np.max(np.abs(k / decay_closed_form(1.0, kin, t) - 1.0)))

    st = ClosureConfig(mode="static", mu=mu)
    t, k = decay_history(st)
    s_st = _loglog_slope(t, k, 1e3, 1e5)
    e_st = abs(s_st / -2.0 - 1.0)

    geo = ClosureConfig(mode="geometric", theta=THETA_13, tau=tau, mu=mu)
    t, k = decay_history(geo)
    s_geo = _loglog_slope(t, k, 1e3, 1e5)
    e_geo = abs(s_geo / -1.3 - 1.0)

    ok = e_kin <= 0.01 and e_st <= 0.02 and e_geo <= 0.02
    return ConditionReport(
        "Decay", bool(ok),
        {"kinematic_log_slope": s_kin, "static_loglog_slope": s_st, "geometric_loglog_slope": s_geo,
         "rel_errors": [e_kin, e_st, e_geo], "kinematic_max_rel_error_vs_closed_form": oracle_err},
        {"kinematic": target_kin, "static": -2.0, "geometric": -1.3},
        {"kinematic": 0.01, "static": 0.02, "geometric": 0.02},
        {"tau": tau, "mu": mu, "theta": THETA_13},
        notes=f"slopes {s_kin:.5f} / {s_st:.5f} / {s_geo:.5f}",
    )


# -- driver ----------------------------------------------------------------------------------

CHECKS = ("positivity", "divergence", "condition1", "condition3", "condition4", "lemma1", "k_energy", "decay")


def run_checks(cfg: ScenarioConfig, checks: Sequence[str] | None = None, out_dir: str | Path | None = None
               ) -> list[ConditionReport]:
    """Run the named checks for ``cfg`` and return their reports.

    Checks that post-process a run share one simulation of ``cfg``.
    """
    checks = list(checks or cfg.checks or CHECKS)
    unknown = set(checks) - set(CHECKS)
    if unknown:
        raise ValueError(f"unknown checks: {sorted(unknown)}")
    reports = []
    main = None
    if set(checks) & {"positivity", "divergence", "condition3", "condition4", "lemma1"}:
        main = run(cfg, out_dir=(Path(out_dir) / "main") if out_dir else False)
    for name in checks:
        if name == "positivity":
            reports.append(check_positivity(main))
        elif name == "divergence":
            reports.append(check_divergence(main))
        elif name == "condition3":
            reports.append(check_condition3(main))
        elif name == "condition4":
            reports.append(check_condition4(main))
        elif name == "lemma1":
            reports.append(check_lemma1(main))
        elif name == "condition1":
            reports.append(check_condition1(cfg.with_(k_init="duct")))
        elif name == "k_energy":
            reports.append(check_k_energy_equality(run(k_energy_config(0.01), out_dir=False),
                                                   run(k_energy_config(0.005), out_dir=False)))
        elif name == "decay":
            reports.append(check_decay_exponents(cfg.tau_s, cfg.mu))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for r in reports:
            (out / f"check_{r.condition}.json").write_text(json.dumps(r.to_dict(), indent=2))
        write_report(reports, out / "verification_report.json")
    return reports
