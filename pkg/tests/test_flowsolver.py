import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from urans1eq.closure import ClosureConfig
from urans1eq.flowsolver import (
    CFLError,
    FlowSolver,
    FlowState,
    SolverConfig,
    body_force_annulus,
    kinetic_energy,
    read_checkpoint,
    rest_state,
    write_checkpoint,
)
from urans1eq.grid import NOSLIP, PERIODIC, Circle, VectorField, divergence, gradient, make_grid
from urans1eq.linsolve import PoissonSolver, SolverError
from urans1eq.runner import ScenarioConfig, run


def annulus(n=32):
    return make_grid(((-1.05, 1.05), (-1.05, 1.05)), n, PERIODIC, obstacles=[Circle(0.5, 0.0, 0.1)],
                     outer=Circle(0.0, 0.0, 1.0))


# -- forcing --------------------------------------------------------------------------------

def test_force_vanishes_at_origin():
    assert body_force_annulus(0.0, 0.0, 3.0) == (0.0, 0.0)


def test_force_example_point():
    fx, fy = body_force_annulus(0.5, 0.0, 1.0)
    assert fx == pytest.approx(0.0) and fy == pytest.approx(1.5)
    fx, fy = body_force_annulus(0.5, 0.0, 0.5)
    assert fy == pytest.approx(0.75)
    assert body_force_annulus(0.5, 0.0, 0.5, ramp=False)[1] == pytest.approx(1.5)


@settings(max_examples=30)
@given(st.floats(0.0, 2 * math.pi), st.floats(0.0, 5.0))
def test_force_vanishes_on_unit_circle(phi, t):
    fx, fy = body_force_annulus(math.cos(phi), math.sin(phi), t)
    assert abs(fx) < 1e-14 and abs(fy) < 1e-14


# -- momentum and projection -------------------------------------------------------------------

def test_rest_state_is_fixed_point():
    g = annulus()
    s = FlowSolver(g, ClosureConfig(), SolverConfig(dt=0.01))
    new, diag = s.step(rest_state(g))
    assert new.vel.max_abs() == 0.0 and np.all(new.k == 0.0) and new.t == pytest.approx(0.01)


def test_penalization_kills_velocity_in_solids_within_one_step():
    g = annulus()
    s = FlowSolver(g, ClosureConfig(), SolverConfig(dt=0.01, penal_eta=1e-6))
    vel = VectorField(np.ones(g.u_shape), np.ones(g.v_shape))
    st0 = FlowState(vel, g.zeros_scalar(), g.zeros_scalar(), model_active=False)
    v1 = s.momentum_step(st0)
    solid_u = g.u_solid > 0
    assert np.abs(v1.u[solid_u]).max() < 1e-3 * vel.max_abs()


def test_projection_of_divergence_free_field_is_identity():
    g = make_grid(((0.0, 2 * math.pi), (0.0, 2 * math.pi)), 32, PERIODIC)
    xu, yu = g.u_points()
    xv, yv = g.v_points()
    vel = VectorField(np.sin(xu) * np.cos(yu), -np.cos(xv) * np.sin(yv))
    s = FlowSolver(g, ClosureConfig(), SolverConfig(dt=0.1))
    out, phi = s.pressure_project(vel)
    assert (out - vel).max_abs() <= 1e-8


@pytest.mark.parametrize("bc", [PERIODIC, NOSLIP])
def test_projection_annihilates_gradients(bc):
    g = make_grid(((0.0, 1.0), (0.0, 1.0)), 24, bc)
    X, Y = g.cell_centers()
    w = gradient(np.cos(2 * math.pi * X) * np.sin(2 * math.pi * Y), g)
    s = FlowSolver(g, ClosureConfig(), SolverConfig(dt=1.0))
    out, _ = s.pressure_project(w)
    assert out.max_abs() < 1e-8 * max(1.0, w.max_abs())


@pytest.mark.parametrize("bc", [PERIODIC, NOSLIP, (PERIODIC, NOSLIP)])
@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_projection_of_random_field_is_solenoidal(bc, seed):
    g = make_grid(((0.0, 1.0), (0.0, 1.0)), 16, bc)
    rng = np.random.default_rng(seed)
    vel = VectorField(rng.standard_normal(g.u_shape) * g.u_free, rng.standard_normal(g.v_shape) * g.v_free)
    s = FlowSolver(g, ClosureConfig(), SolverConfig(dt=0.01, proj_tol=1e-8))
    out, _ = s.pressure_project(vel)
    assert np.abs(divergence(out, g)).max() <= 1e-8


def test_poisson_reports_non_convergence():
    g = make_grid(((0.0, 1.0), (0.0, 1.0)), 8, PERIODIC)
    ps = PoissonSolver(g, tol=1e-30, max_iter=1)
    with pytest.raises(SolverError) as err:
        ps.solve(np.random.default_rng(0).standard_normal((8, 8)))
    assert "iterations" in err.value.diagnostics


def test_cfl_guard_aborts():
    g = make_grid(((0.0, 1.0), (0.0, 1.0)), 8, PERIODIC)
    s = FlowSolver(g, ClosureConfig(), SolverConfig(dt=1.0))
    st0 = FlowState(VectorField(np.ones(g.u_shape), np.zeros(g.v_shape)), g.zeros_scalar(), g.zeros_scalar())
    with pytest.raises(CFLError):
        s.step(st0)


def test_solver_config_validation():
    for kw in (dict(dt=0.0), dict(proj_tol=0.0), dict(penal_eta=-1.0)):
        with pytest.raises(ValueError):
            SolverConfig(**kw)


# -- energy audit -------------------------------------------------------------------------------------

def audit_run(dt, T=1.0):
    cfg = ScenarioConfig(scenario="periodic_box", resolution=24, nu_m2s=1e-2, tau_s=1.0, dt_s=dt, t_end_s=T,
                         model_start_s=0.0, k_init="uniform", k0_m2s2=0.01)
    res = run(cfg, out_dir=False)
    return res.diagnostics["audit_residual"] / dt, float(np.abs(res.diagnostics["work"]).max())


def test_energy_audit_is_first_order():
    (a1, w), (a2, _) = audit_run(0.02), audit_run(0.01)
    # the positive part of the per-unit-time residual is a few percent of the
    # power input and halves with dt
    p1, p2 = max(a1.max(), 0.0), max(a2.max(), 0.0)
    assert p1 <= 0.05 * w
    assert 0.4 * p1 <= p2 <= 0.6 * p1


# -- checkpoints -------------------------------------------------------------------------------------

@pytest.mark.parametrize("bc", [PERIODIC, (PERIODIC, NOSLIP)])
def test_checkpoint_round_trip(tmp_path, bc):
    g = make_grid(((0.0, 1.0), (0.0, 1.0)), (8, 6), bc)
    rng = np.random.default_rng(1)
    st0 = FlowState(VectorField(rng.random(g.u_shape), rng.random(g.v_shape)), rng.random((8, 6)),
                    rng.random((8, 6)), t=1.25, step=125, model_active=True)
    path = write_checkpoint(tmp_path / "a.ckpt", st0, g)
    raw = path.read_bytes()
    assert raw[:8] == b"URANSCK1" and len(raw) == 64 + 8 * (st0.vel.u.size + st0.vel.v.size + 2 * 48)
    back = read_checkpoint(path, g)
    assert back.t == 1.25 and back.step == 125 and back.model_active
    for a, b in ((st0.vel.u, back.vel.u), (st0.vel.v, back.vel.v), (st0.p, back.p), (st0.k, back.k)):
        assert np.array_equal(a, b)


def test_checkpoint_rejects_other_grid(tmp_path):
    g = make_grid(((0.0, 1.0), (0.0, 1.0)), 8, PERIODIC)
    path = write_checkpoint(tmp_path / "a.ckpt", rest_state(g), g)
    with pytest.raises(ValueError):
        read_checkpoint(path, make_grid(((0.0, 1.0), (0.0, 1.0)), 10, PERIODIC))


def test_kinetic_energy_of_uniform_flow():
    g = make_grid(((0.0, 2.0), (0.0, 1.0)), (8, 4), PERIODIC)
    vel = VectorField(np.full(g.u_shape, 2.0), np.zeros(g.v_shape))
    assert kinetic_energy(vel, g) == pytest.approx(0.5 * 4.0 * 2.0)
