"""
Time integration of the momentum/continuity equations coupled to the closure.

One step is

1. ``momentum_step``: SSP-RK3 sub-integration of the conservative advection,
   explicit body force and old pressure gradient, then one implicit solve
   with the symmetric-gradient viscous operator (viscosity ``2 nu + nu_T``)
   and the Brinkman term ``chi / eta`` of the solid mask;
2. ``pressure_project``: incremental pressure correction;
3. ``k_step`` with production evaluated on the projected velocity.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .closure import ClosureConfig, KStepInfo, k_step, turbulent_viscosity
from .grid import Grid, VectorField, advect_velocity, deformation_tensor_magsq, divergence, gradient, viscous_operator
from .linsolve import PoissonSolver, SolverError, solve_spd

ForceFn = Callable[[float], VectorField]


class CFLError(SolverError):
    pass


@dataclass
class FlowState:
    vel: VectorField
    p: np.ndarray
    k: np.ndarray
    t: float = 0.0
    step: int = 0
    model_active: bool = True

    def copy(self) -> "FlowState":
        return FlowState(self.vel.copy(), self.p.copy(), self.k.copy(), self.t, self.step, self.model_active)


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 0.01
    t_end: float = 10.0
    proj_tol: float = 1e-8
    penal_eta: float = 1e-6
    ramp: bool = True
    model_start: float = 0.0
    cfl_max: float = 0.9

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.proj_tol > 0 or not self.penal_eta > 0:
            raise ValueError("proj_tol and penal_eta must be positive")

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **kw)


@dataclass
class StepDiagnostics:
    """Scalars recorded for every step (area-weighted integrals over the box)."""

    t: float = 0.0
    cfl: float = 0.0
    div_max: float = 0.0
    poisson_iterations: int = 0
    energy_old: float = 0.0
    energy_new: float = 0.0
    viscous_dissipation: float = 0.0
    k_dissipation: float = 0.0
    work: float = 0.0
    k_old: float = 0.0
    k_new: float = 0.0
    production_old: float = 0.0
    production: float = 0.0
    k_sink: float = 0.0
    boundary_loss: float = 0.0
    clamped_mass: float = 0.0
    k_min: float = 0.0

    @property
    def audit_residual(self) -> float:
        """``dE + dt (dissipation) - dt (f, v)`` divided by ``dt``; <= O(dt) for the scheme."""
        return self.energy_new - self.energy_old + self._dt * (self.viscous_dissipation + self.k_dissipation - self.work)

    _dt: float = field(default=1.0, repr=False)


# -- forcing ------------------------------------------------------------------

def body_force_annulus(x, y, t: float, ramp: bool = True):
    """Counter-clockwise swirl ``min(t,1) (-4y(1-r^2), 4x(1-r^2))``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = min(t, 1.0) if ramp else 1.0
    w = 4.0 * (1.0 - x * x - y * y)
    return -s * w * y, s * w * x


def sample_force(grid: Grid, fn: Callable, t: float, *, fluid_only: bool = True, **kw) -> VectorField:
    """Evaluate ``fn(x, y, t) -> (fx, fy)`` on the faces; zero on solid faces if asked."""
    xu, yu = grid.u_points()
    xv, yv = grid.v_points()
    fu, _ = fn(xu, yu, t, **kw)
    _, fv = fn(xv, yv, t, **kw)
    fu = np.broadcast_to(fu, grid.u_shape).astype(float)
    fv = np.broadcast_to(fv, grid.v_shape).astype(float)
    if fluid_only:
        fu = fu * (1.0 - grid.u_solid)
        fv = fv * (1.0 - grid.v_solid)
    fu = fu * grid.u_free
    fv = fv * grid.v_free
    return VectorField(fu, fv)


class RampedForce:
    """Steady face force times ``min(t, 1)`` (or 1 without ramp)."""

    def __init__(self, steady: VectorField, ramp: bool = True):
        self.steady = steady
        self.ramp = ramp

    def __call__(self, t: float) -> VectorField:
        return self.steady.scale(min(t, 1.0) if self.ramp else 1.0)


def zero_force(grid: Grid) -> ForceFn:
    z = grid.zeros_vector()
    return lambda t: z


# -- the solver ---------------------------------------------------------------

class FlowSolver:
    """Owns the grid-dependent machinery (Poisson solver, cached operators)."""

    def __init__(self, grid: Grid, closure: ClosureConfig, cfg: SolverConfig, force: ForceFn | None = None,
                 l0: np.ndarray | None = None, nu_t_override: float | None = None):
        self.grid = grid
        self.closure = closure
        self.cfg = cfg
        self.force = force if force is not None else zero_force(grid)
        self.l0 = l0
        self.poisson = PoissonSolver(grid, tol=cfg.proj_tol)
        self._free = np.flatnonzero(grid.vel_free)
        chi = np.concatenate([grid.u_solid.ravel(), grid.v_solid.ravel()])
        self._penal = chi / cfg.penal_eta
        self._K_cache: dict = {}
        # nu_t_override = 0 gives the plain Navier-Stokes reference run
        self.nu_t_override = nu_t_override

    # ---- pieces -----------------------------------------------------------
    def nu_t(self, state: FlowState) -> np.ndarray:
        g = self.grid
        if not state.model_active or self.nu_t_override == 0.0:
            return np.zeros((g.nx, g.ny))
        return np.where(g.solid_mask, 0.0, turbulent_viscosity(self.closure, state.k, self.l0))

    def _viscous(self, eta: np.ndarray) -> sp.csr_matrix:
        if np.all(eta == eta.flat[0]):
            key = float(eta.flat[0])
            if key not in self._K_cache:
                self._K_cache[key] = viscous_operator(eta, self.grid)
            return self._K_cache[key]
        return viscous_operator(eta, self.grid)

    def advective_increment(self, vel: VectorField, dt: float) -> VectorField:
        """SSP-RK3 integration of ``w' = -div(w w)`` over ``dt``, returned as ``w(dt) - vel``."""
        g = self.grid
        w1 = vel + advect_velocity(vel, g).scale(dt)
        w2 = vel.scale(0.75) + (w1 + advect_velocity(w1, g).scale(dt)).scale(0.25)
        w3 = vel.scale(1.0 / 3.0) + (w2 + advect_velocity(w2, g).scale(dt)).scale(2.0 / 3.0)
        return w3 - vel

    def momentum_step(self, state: FlowState, nu_t: np.ndarray | None = None) -> VectorField:
        g, dt = self.grid, self.cfg.dt
        if nu_t is None:
            nu_t = self.nu_t(state)
        eta = 2.0 * self.closure.nu + nu_t
        f = self.force(state.t)
        gp = gradient(state.p, g)
        rhs = state.vel + self.advective_increment(state.vel, dt) + (f - gp).scale(dt)
        A = self._viscous(eta) * dt + sp.diags(1.0 + dt * self._penal)
        idx = self._free
        A_ff = A[idx][:, idx]
        sol = np.zeros(g.ops.nu + g.ops.nv)
        sol[idx] = solve_spd(A_ff, rhs.flat()[idx], what="momentum diffusion")
        return g.split(sol)

    def pressure_project(self, vel_star: VectorField) -> tuple[VectorField, np.ndarray]:
        """Project onto discretely solenoidal fields; returns ``(vel, phi)`` with ``p_new = p + phi``."""
        g, dt = self.grid, self.cfg.dt
        rhs = divergence(vel_star, g) / dt
        phi = self.poisson.solve(rhs, tol=0.5 * self.cfg.proj_tol / dt)
        gphi = gradient(phi, g)
        return vel_star - gphi.scale(dt), phi

    def check_cfl(self, vel: VectorField) -> float:
        g = self.grid
        cfl = vel.max_abs() * self.cfg.dt / min(g.dx, g.dy)
        if cfl > self.cfg.cfl_max:
            raise CFLError("CFL limit exceeded", cfl=round(cfl, 4), limit=self.cfg.cfl_max)
        return cfl

    # ---- full step ------------------------------------------------------------
    def step(self, state: FlowState) -> tuple[FlowState, StepDiagnostics]:
        g, dt, c = self.grid, self.cfg.dt, self.closure
        area = g.cell_area
        diag = StepDiagnostics(_dt=dt)
        diag.cfl = self.check_cfl(state.vel)
        nu_t = self.nu_t(state)

        vel_star = self.momentum_step(state, nu_t)
        vel_new, phi = self.pressure_project(vel_star)
        p_new = state.p + phi
        diag.poisson_iterations = self.poisson.last_iterations
        diag.div_max = float(np.abs(divergence(vel_new, g)).max())

        S2_new = deformation_tensor_magsq(vel_new, g)
        if state.model_active and self.nu_t_override != 0.0:
            k_new, kinfo = k_step(state.k, state.vel, c, g, dt, l0=self.l0, vel_production=vel_new)
            S2_old = deformation_tensor_magsq(state.vel, g)
            diag.production_old = float((nu_t * S2_old).sum() * area)
        else:
            k_new, kinfo = state.k.copy(), KStepInfo(k_old=float(state.k.sum() * area), k_new=float(state.k.sum() * area))

        f = self.force(state.t)
        diag.t = state.t + dt
        diag.energy_old = kinetic_energy(state.vel, g) + float(state.k.sum() * area)
        diag.energy_new = kinetic_energy(vel_new, g) + float(k_new.sum() * area)
        diag.viscous_dissipation = float((2.0 * c.nu * S2_new).sum() * area)
        if state.model_active:
            diag.k_dissipation = kinfo.sink
        diag.work = float(np.dot(f.flat(), state.vel.flat()) * area)
        diag.k_old, diag.k_new = kinfo.k_old, kinfo.k_new
        diag.production = kinfo.production
        diag.k_sink = kinfo.sink
        diag.boundary_loss = kinfo.boundary_loss
        diag.clamped_mass = kinfo.clamped_mass
        diag.k_min = kinfo.min_before_clamp

        new = FlowState(vel_new, p_new, k_new, t=(state.step + 1) * dt, step=state.step + 1,
                        model_active=state.model_active)
        return new, diag


def kinetic_energy(vel: VectorField, grid: Grid) -> float:
    """``1/2 ||v||^2`` as the face sum (matches the discrete momentum budget)."""
    return 0.5 * float((vel.u**2).sum() + (vel.v**2).sum()) * grid.cell_area


def rest_state(grid: Grid, model_active: bool = True) -> FlowState:
    return FlowState(grid.zeros_vector(), grid.zeros_scalar(), grid.zeros_scalar(), 0.0, 0, model_active)


# -- checkpoints ---------------------------------------------------------------
#
# 64-byte little-endian header, then u, v, p, k as float64 in C order:
#   0  8s  magic  b"URANSCK1"
#   8  u32 version (1)
#  12  u32 nx
#  16  u32 ny
#  20  u32 flags  bit0 model_active, bit1 periodic x, bit2 periodic y
#  24  f64 t
#  32  i64 step
#  40  24 reserved zero bytes
_HEADER = struct.Struct("<8sIIIIdq24x")
MAGIC = b"URANSCK1"
VERSION = 1
assert _HEADER.size == 64


def write_checkpoint(path: str | Path, state: FlowState, grid: Grid) -> Path:
    path = Path(path)
    flags = int(state.model_active) | (int(grid.periodic_x) << 1) | (int(grid.periodic_y) << 2)
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, grid.nx, grid.ny, flags, float(state.t), int(state.step)))
        for a in (state.vel.u, state.vel.v, state.p, state.k):
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return path


def read_checkpoint(path: str | Path, grid: Grid) -> FlowState:
    data = Path(path).read_bytes()
    magic, version, nx, ny, flags, t, step = _HEADER.unpack_from(data, 0)
    if magic != MAGIC or version != VERSION:
        raise ValueError(f"{path}: not a version-{VERSION} checkpoint")
    if (nx, ny) != (grid.nx, grid.ny) or bool(flags & 2) != grid.periodic_x or bool(flags & 4) != grid.periodic_y:
        raise ValueError(f"{path}: checkpoint grid does not match")
    off = _HEADER.size
    arrays = []
    for shape in (grid.u_shape, grid.v_shape, (nx, ny), (nx, ny)):
        n = shape[0] * shape[1]
        arrays.append(np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(shape).astype(float))
        off += 8 * n
    if off != len(data):
        raise ValueError(f"{path}: trailing bytes in checkpoint")
    u, v, p, k = arrays
    return FlowState(VectorField(u, v), p, k, t=t, step=step, model_active=bool(flags & 1))


def max_stable_dt(grid: Grid, vel: VectorField, cfl: float = 0.9) -> float:
    m = vel.max_abs()
    return math.inf if m == 0 else cfl * min(grid.dx, grid.dy) / m
