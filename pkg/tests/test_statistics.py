import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from urans1eq.closure import ClosureConfig
from urans1eq.flowsolver import FlowState, body_force_annulus, sample_force
from urans1eq.grid import NOSLIP, PERIODIC, Circle, VectorField, deformation_tensor_magsq, make_grid
from urans1eq.statistics import (
    STAT_HEADER,
    ScalesUndefined,
    StatSeries,
    TimeAverager,
    avg_l,
    avg_nuT,
    compute_scales,
    dissipation_rate,
    effective_viscosity,
    first_crossing,
    intensity,
    read_stats_csv,
    sample,
    scales_consistent,
    taylor_microscale,
    time_average,
    viscosity_ratio,
)

SQRT2 = math.sqrt(2.0)
NU = 1e-4


def box(n=32):
    return make_grid(((0.0, 2 * math.pi), (0.0, 2 * math.pi)), n, PERIODIC)


def state_of(grid, fu, fv, k=0.0, active=True):
    xu, yu = grid.u_points()
    xv, yv = grid.v_points()
    vel = VectorField(np.broadcast_to(fu(xu, yu), grid.u_shape).astype(float),
                      np.broadcast_to(fv(xv, yv), grid.v_shape).astype(float))
    kk = np.broadcast_to(k, (grid.nx, grid.ny)).astype(float) if not callable(k) else k(*grid.cell_centers())
    return FlowState(vel, grid.zeros_scalar(), kk, model_active=active)


def sin_shear(grid, k=0.0):
    return state_of(grid, lambda x, y: np.sin(y), lambda x, y: 0 * x, k)


def kin(tau=1.0):
    return ClosureConfig(mode="kinematic", tau=tau, nu=NU)


def k_for_nut(nut, tau=1.0, mu=0.55):
    return nut / (SQRT2 * mu * tau)


# -- scales ---------------------------------------------------------------------------------

def annulus(n):
    return make_grid(((-1.05, 1.05), (-1.05, 1.05)), n, PERIODIC, obstacles=[Circle(0.5, 0.0, 0.1)],
                     outer=Circle(0.0, 0.0, 1.0))


def annulus_force(g, amp=1.0):
    f = sample_force(g, body_force_annulus, 1.0, fluid_only=False, ramp=False)
    return f.scale(amp)


def test_annulus_scales_match_fine_quadrature():
    coarse = compute_scales(annulus_force(annulus(64)), annulus(64), NU, U=1.0)
    fine = compute_scales(annulus_force(annulus(256)), annulus(256), NU, U=1.0)
    assert coarse.F == pytest.approx(fine.F, rel=2e-2)
    assert coarse.L == pytest.approx(fine.L, rel=5e-2)
    assert coarse.L <= coarse.L_domain
    assert scales_consistent(coarse) and scales_consistent(fine)


def test_doubling_force_doubles_F_keeps_L():
    g = annulus(64)
    a = compute_scales(annulus_force(g), g, NU, U=1.0)
    b = compute_scales(annulus_force(g, 2.0), g, NU, U=1.0)
    assert b.F == pytest.approx(2 * a.F, rel=1e-12)
    assert b.L == pytest.approx(a.L, rel=1e-12)


def test_zero_force_has_no_scales():
    g = box(8)
    with pytest.raises(ScalesUndefined):
        compute_scales(g.zeros_vector(), g, NU, U=1.0)


def test_velocity_scale_from_history():
    g = annulus(32)
    t = np.linspace(0.0, 10.0, 101)
    s = compute_scales(annulus_force(g), g, NU, mean_sq_speed=np.where(t < 1, 0.0, 4.0), t=t, t0=1.0)
    assert s.U == pytest.approx(2.0)
    assert s.Re == pytest.approx(s.L * 2.0 / NU)
    assert s.Tstar == pytest.approx(s.L / 2.0)


# -- dissipation ---------------------------------------------------------------------------------

def test_rest_state_has_no_dissipation():
    g = box(8)
    st_ = FlowState(g.zeros_vector(), g.zeros_scalar(), g.zeros_scalar())
    assert dissipation_rate(st_, kin(), g) == 0.0


def test_uniform_k_kinematic_dissipation():
    g = box(8)
    st_ = FlowState(g.zeros_vector(), g.zeros_scalar(), np.ones((8, 8)))
    assert dissipation_rate(st_, kin(1.0), g) == pytest.approx(SQRT2 / 2)


def test_pure_shear_dissipation():
    g = make_grid(((0.0, 1.0), (-0.5, 0.5)), 16, (PERIODIC, NOSLIP))
    st_ = state_of(g, lambda x, y: y, lambda x, y: 0 * x)
    S2 = deformation_tensor_magsq(st_.vel, g)
    assert np.allclose(S2[:, 1:-1], 0.5)
    assert dissipation_rate(st_, kin(), g, S2=np.full_like(S2, 0.5)) == pytest.approx(1e-4)


def test_static_dissipation_uses_length_scale():
    g = box(8)
    st_ = FlowState(g.zeros_vector(), g.zeros_scalar(), np.full((8, 8), 4.0))
    eps = dissipation_rate(st_, ClosureConfig(mode="static", nu=NU), g, l0=np.full((8, 8), 2.0))
    assert eps == pytest.approx(4.0**1.5 / 2.0)


# -- intensity ---------------------------------------------------------------------------------------

def test_intensity_examples():
    g = box(8)
    one = state_of(g, lambda x, y: 0 * x + 1.0, lambda x, y: 0 * x, k=0.5)
    assert intensity(one, g) == pytest.approx(1.0)
    assert intensity(state_of(g, lambda x, y: 0 * x + 1.0, lambda x, y: 0 * x), g) == 0.0
    two = state_of(g, lambda x, y: 0 * x + 2.0, lambda x, y: 0 * x, k=0.5)
    assert intensity(two, g) == pytest.approx(0.25)


def test_intensity_missing_for_zero_velocity():
    g = box(8)
    assert math.isnan(intensity(FlowState(g.zeros_vector(), g.zeros_scalar(), np.ones((8, 8))), g))


# -- effective viscosity and viscosity ratio --------------------------------------------------------------

def test_effective_viscosity_without_model_is_nu():
    g = box()
    assert effective_viscosity(sin_shear(g), kin(), g) == pytest.approx(NU)


def test_effective_viscosity_constant_nut():
    g = box()
    st_ = sin_shear(g, k=k_for_nut(NU))
    assert effective_viscosity(st_, kin(), g) == pytest.approx(2 * NU)
    assert viscosity_ratio(st_, kin(), g) == pytest.approx(0.5)
    assert viscosity_ratio(sin_shear(g, k=k_for_nut(2 * NU)), kin(), g) == pytest.approx(1.0)
    assert viscosity_ratio(sin_shear(g), kin(), g) == 0.0


def test_effective_viscosity_varying_nut_against_analytic_weighting():
    # nu_T = a (1 + sin^2 y) weighted by |grad_s v|^2 = cos^2(y)/2 averages to nu + 1.25 a
    a = 3e-4
    g = box(64)
    st_ = sin_shear(g, k=lambda X, Y: k_for_nut(a * (1 + np.sin(Y) ** 2)))
    assert effective_viscosity(st_, kin(), g) == pytest.approx(NU + 1.25 * a, rel=1e-2)


def test_degenerate_ratios_are_missing():
    g = box(8)
    still = FlowState(g.zeros_vector(), g.zeros_scalar(), np.ones((8, 8)))
    for f in (effective_viscosity, viscosity_ratio):
        assert math.isnan(f(still, kin(), g))
    assert math.isnan(taylor_microscale(still, g))


# -- Taylor microscale ---------------------------------------------------------------------------------------

def test_taylor_microscale_of_sin_shear():
    g = box(64)
    assert taylor_microscale(sin_shear(g), g) == pytest.approx(SQRT2, rel=1e-3)


@settings(max_examples=20, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_taylor_microscale_scale_invariant(c):
    g = box(16)
    a = taylor_microscale(sin_shear(g), g)
    b = taylor_microscale(state_of(g, lambda x, y: c * np.sin(y), lambda x, y: 0 * x), g)
    assert b == pytest.approx(a, rel=1e-10)


def test_taylor_microscale_grid_converged():
    f = lambda x, y: np.sin(x) * np.cos(2 * y)  # noqa: E731
    vals = [taylor_microscale(state_of(box(n), f, lambda x, y: 0.5 * np.cos(x) * np.sin(2 * y)), box(n))
            for n in (64, 128)]
    assert vals[0] == pytest.approx(vals[1], rel=1e-2)


# -- averaged length and viscosity ---------------------------------------------------------------------------

def test_avg_l_and_nut():
    g = box(8)
    zero = FlowState(g.zeros_vector(), g.zeros_scalar(), g.zeros_scalar())
    assert avg_l(zero, kin(), g, L=2.0) == 0.0
    k = 0.5
    st_ = FlowState(g.zeros_vector(), g.zeros_scalar(), np.full((8, 8), k))
    assert avg_l(st_, kin(1.0), g, L=2.0) == pytest.approx(0.5)  # l = 1 everywhere
    assert avg_nuT(st_, kin(1.0), g, L=2.0, U=3.0) == pytest.approx(SQRT2 * 0.55 * k / 6.0)


# -- time averages --------------------------------------------------------------------------------------------

def test_time_average_examples():
    t = np.linspace(0.0, 2.0, 21)
    assert time_average(t, np.full_like(t, 3.5), 0.0) == pytest.approx(3.5)
    assert time_average(t, t, 0.0, 2.0) == pytest.approx(1.0)
    # averaging an already averaged (constant) series changes nothing
    m = time_average(t, t**2, 0.5)
    assert time_average(t, np.full_like(t, m), 0.5) == pytest.approx(m)


def test_time_average_interpolates_window_edges():
    t = np.array([0.0, 1.0, 2.0])
    assert time_average(t, t, 0.5, 1.5) == pytest.approx(1.0)


def test_empty_window_raises():
    with pytest.raises(ValueError):
        time_average([0.0, 1.0], [1.0, 1.0], 1.0, 1.0)
    with pytest.raises(ValueError):
        time_average([0.0, 1.0], [1.0, 1.0], 0.0, 5.0)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 30, elements=st.floats(-10, 10)), arrays(np.float64, 30, elements=st.floats(-10, 10)))
def test_cauchy_schwarz_for_time_averages(a, b):
    t = np.linspace(0.0, 3.0, 30)
    lhs = time_average(t, a * b, 0.0)
    rhs = math.sqrt(time_average(t, a * a, 0.0) * time_average(t, b * b, 0.0))
    assert lhs <= rhs * (1 + 1e-9) + 1e-9


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, 25, elements=st.floats(-5, 5)), st.floats(0.1, 2.0))
def test_running_averager_matches_trapezoid(y, t0):
    t = np.linspace(0.0, 3.0, 25)
    avg = TimeAverager(t0)
    for ti, yi in zip(t, y):
        avg.add(ti, {"y": yi})
    assert avg.averages()["y"] == pytest.approx(time_average(t, y, t0), rel=1e-9, abs=1e-9)


def test_averager_undefined_before_t0():
    avg = TimeAverager(1.0)
    avg.add(0.5, {"y": 1.0})
    with pytest.raises(ValueError):
        avg.averages()


def test_first_crossing():
    t = np.array([0.0, 1.0, 2.0, 3.0])
    y = np.array([0.0, 5.0, 2.0, 1.0])
    assert first_crossing(t, y, 2.0, t0=1.0) == 2.0
    assert first_crossing(t, y, 0.5, t0=1.0) is None


# -- invariance and output ---------------------------------------------------------------------------------------

@settings(max_examples=15, deadline=None)
@given(shift=st.integers(1, 15), seed=st.integers(0, 10_000))
def test_statistics_invariant_under_periodic_translation(shift, seed):
    g = box(16)
    rng = np.random.default_rng(seed)
    vel = VectorField(rng.standard_normal(g.u_shape), rng.standard_normal(g.v_shape))
    k = rng.random((16, 16))
    a = sample(FlowState(vel, g.zeros_scalar(), k), kin(), g)
    moved = FlowState(VectorField(np.roll(vel.u, shift, 1), np.roll(vel.v, shift, 1)), g.zeros_scalar(),
                      np.roll(k, shift, 1))
    b = sample(moved, kin(), g)
    for name in ("energy", "eps_model", "intensity", "nu_eff", "vr", "taylor", "rms_l", "mean_nu_t"):
        assert getattr(b, name) == pytest.approx(getattr(a, name), rel=1e-10)


def test_stats_csv_header_and_missing_values(tmp_path):
    g = box(8)
    series = StatSeries()
    series.append(sample(FlowState(g.zeros_vector(), g.zeros_scalar(), g.zeros_scalar()), kin(), g))
    series.append(sample(sin_shear(g, k=0.1), kin(), g))
    path = series.write_csv(tmp_path / "s.csv", L=1.0, U=1.0)
    assert path.read_text().splitlines()[0] == ",".join(STAT_HEADER)
    back = read_stats_csv(path)
    assert math.isnan(back["intensity"][0]) and back["energy"][0] == 0.0
    assert back["intensity"][1] > 0


def test_first_crossing_strict_skips_t0():
    t = np.array([0.0, 1.0, 2.0])
    y = np.array([1.0, 1.0, 1.0])
    assert first_crossing(t, y, 1.0, t0=1.0) == 1.0
    assert first_crossing(t, y, 1.0, t0=1.0, strict=True) == 2.0
