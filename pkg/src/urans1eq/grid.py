"""
Staggered (MAC) grid, discrete fields and finite-difference operators.

Layout
------
Cell (i, j) has its center at ``(x0 + (i + 1/2) dx, y0 + (j + 1/2) dy)``.
Arrays are indexed ``[i, j]`` (x first).

* ``u`` lives on x-faces.  Shape ``(nx, ny)`` when x is periodic (face ``i`` is
  the left face of cell ``i``), ``(nx + 1, ny)`` when x is bounded by no-slip
  walls (faces 0 and nx are the walls and always hold zero).
* ``v`` lives on y-faces, same convention in y.
* Corners (where the off-diagonal strain lives) have shape
  ``(ncx, ncy)`` with ``ncx = nx`` (periodic) or ``nx + 1`` (walls).
* No-slip walls are imposed through odd ghost values for the tangential
  velocity, i.e. the wall sits exactly on the outer face.

Every linear operator is also available as a ``scipy.sparse`` matrix acting on
the C-order flattening of the arrays, so the implicit solvers and the explicit
kernels share one discretization.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

PERIODIC = "periodic"
NOSLIP = "noslip"


class ConfigurationError(ValueError):
    """Raised for geometrically or physically inconsistent set-ups."""


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    r: float


@dataclass(frozen=True)
class VectorField:
    """Face-centred velocity ``(u, v)``."""

    u: np.ndarray
    v: np.ndarray

    def copy(self) -> "VectorField":
        return VectorField(self.u.copy(), self.v.copy())

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.u + other.u, self.v + other.v)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.u - other.u, self.v - other.v)

    def scale(self, c: float) -> "VectorField":
        return VectorField(c * self.u, c * self.v)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.u.ravel(), self.v.ravel()])

    def max_abs(self) -> float:
        return float(max(np.abs(self.u).max(initial=0.0), np.abs(self.v).max(initial=0.0)))


# 1d difference / averaging stencils --------------------------------------

def _face_to_cell_diff(n: int, periodic: bool) -> sp.csr_matrix:
    """(f[i+1] - f[i]) for cell i."""
    if periodic:
        d = sp.diags([-np.ones(n), np.ones(n - 1)], [0, 1], shape=(n, n), format="lil")
        d[n - 1, 0] = 1.0
        return d.tocsr()
    return sp.diags([-np.ones(n), np.ones(n)], [0, 1], shape=(n, n + 1), format="csr")


def _cell_to_node_diff(n: int, periodic: bool) -> sp.csr_matrix:
    """(c[i] - c[i-1]) at node i; odd ghost cells beyond no-slip walls."""
    if periodic:
        d = sp.diags([np.ones(n), -np.ones(n - 1)], [0, -1], shape=(n, n), format="lil")
        d[0, n - 1] = -1.0
        return d.tocsr()
    d = sp.diags([np.ones(n), -np.ones(n)], [0, -1], shape=(n + 1, n), format="lil")
    d[0, 0] = 2.0
    d[n, n - 1] = -2.0
    return d.tocsr()


def _node_to_cell_avg(n: int, periodic: bool) -> sp.csr_matrix:
    if periodic:
        a = sp.diags([0.5 * np.ones(n), 0.5 * np.ones(n - 1)], [0, 1], shape=(n, n), format="lil")
        a[n - 1, 0] = 0.5
        return a.tocsr()
    return sp.diags([0.5 * np.ones(n), 0.5 * np.ones(n)], [0, 1], shape=(n, n + 1), format="csr")


@dataclass(eq=False)
class Grid:
    """Rectangular MAC grid with a solid mask and an analytic wall-distance field."""

    nx: int
    ny: int
    dx: float
    dy: float
    origin: tuple[float, float]
    extent: tuple[float, float]
    solid_mask: np.ndarray
    wall_distance: np.ndarray
    bc_kind: tuple[str, str]
    obstacles: tuple[Circle, ...] = ()
    outer: Circle | None = None
    meta: dict = field(default_factory=dict)

    # -- geometry ---------------------------------------------------------
    @property
    def periodic_x(self) -> bool:
        return self.bc_kind[0] == PERIODIC

    @property
    def periodic_y(self) -> bool:
        return self.bc_kind[1] == PERIODIC

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def u_shape(self) -> tuple[int, int]:
        return (self.nx if self.periodic_x else self.nx + 1, self.ny)

    @property
    def v_shape(self) -> tuple[int, int]:
        return (self.nx, self.ny if self.periodic_y else self.ny + 1)

    @property
    def corner_shape(self) -> tuple[int, int]:
        return (self.nx if self.periodic_x else self.nx + 1, self.ny if self.periodic_y else self.ny + 1)

    @cached_property
    def xc(self) -> np.ndarray:
        return self.origin[0] + (np.arange(self.nx) + 0.5) * self.dx

    @cached_property
    def yc(self) -> np.ndarray:
        return self.origin[1] + (np.arange(self.ny) + 0.5) * self.dy

    @cached_property
    def xf(self) -> np.ndarray:
        return self.origin[0] + np.arange(self.u_shape[0]) * self.dx

    @cached_property
    def yf(self) -> np.ndarray:
        return self.origin[1] + np.arange(self.v_shape[1]) * self.dy

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xc, self.yc, indexing="ij")

    def u_points(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xf, self.yc, indexing="ij")

    def v_points(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xc, self.yf, indexing="ij")

    @cached_property
    def fluid(self) -> np.ndarray:
        return ~self.solid_mask

    @cached_property
    def fluid_area(self) -> float:
        return float(self.fluid.sum()) * self.cell_area

    @property
    def has_walls(self) -> bool:
        return bool(np.isfinite(self.wall_distance).any())

    @cached_property
    def domain_length(self) -> float:
        """Largest extent of the fluid region (``L_Omega``)."""
        if not self.fluid.any():
            return 0.0
        X, Y = self.cell_centers()
        xs, ys = X[self.fluid], Y[self.fluid]
        lx = xs.max() - xs.min() + self.dx
        ly = ys.max() - ys.min() + self.dy
        return float(max(lx, ly))

    # -- face masks -------------------------------------------------------
    @cached_property
    def u_solid(self) -> np.ndarray:
        """Penalization indicator on x-faces: 1 if either neighbouring cell is solid."""
        s = self.solid_mask.astype(float)
        if self.periodic_x:
            return np.maximum(s, np.roll(s, 1, axis=0))
        out = np.zeros(self.u_shape)
        out[1:-1] = np.maximum(s[1:], s[:-1])
        out[0], out[-1] = s[0], s[-1]
        return out

    @cached_property
    def v_solid(self) -> np.ndarray:
        s = self.solid_mask.astype(float)
        if self.periodic_y:
            return np.maximum(s, np.roll(s, 1, axis=1))
        out = np.zeros(self.v_shape)
        out[:, 1:-1] = np.maximum(s[:, 1:], s[:, :-1])
        out[:, 0], out[:, -1] = s[:, 0], s[:, -1]
        return out

    @cached_property
    def u_free(self) -> np.ndarray:
        """x-faces that are unknowns (not the wall faces of a bounded direction)."""
        m = np.ones(self.u_shape, dtype=bool)
        if not self.periodic_x:
            m[0] = m[-1] = False
        return m

    @cached_property
    def v_free(self) -> np.ndarray:
        m = np.ones(self.v_shape, dtype=bool)
        if not self.periodic_y:
            m[:, 0] = m[:, -1] = False
        return m

    @cached_property
    def vel_free(self) -> np.ndarray:
        return np.concatenate([self.u_free.ravel(), self.v_free.ravel()])

    # -- sparse operators -------------------------------------------------
    @cached_property
    def ops(self) -> "Operators":
        return Operators(self)

    def zeros_vector(self) -> VectorField:
        return VectorField(np.zeros(self.u_shape), np.zeros(self.v_shape))

    def zeros_scalar(self) -> np.ndarray:
        return np.zeros((self.nx, self.ny))

    def split(self, flat: np.ndarray) -> VectorField:
        nu = self.u_shape[0] * self.u_shape[1]
        return VectorField(flat[:nu].reshape(self.u_shape).copy(), flat[nu:].reshape(self.v_shape).copy())


class Operators:
    """Sparse MAC operators of a grid (built once, cached on the grid)."""

    def __init__(self, g: Grid):
        px, py = g.periodic_x, g.periodic_y
        Ix, Iy = sp.identity(g.nx, format="csr"), sp.identity(g.ny, format="csr")
        Icx = sp.identity(g.corner_shape[0], format="csr")
        Icy = sp.identity(g.corner_shape[1], format="csr")

        Dfc_x = _face_to_cell_diff(g.nx, px)
        Dfc_y = _face_to_cell_diff(g.ny, py)
        Dcn_x = _cell_to_node_diff(g.nx, px)
        Dcn_y = _cell_to_node_diff(g.ny, py)

        # u -> du/dx at cells, v -> dv/dy at cells
        self.ux = (sp.kron(Dfc_x, Iy) / g.dx).tocsr()
        self.vy = (sp.kron(Ix, Dfc_y) / g.dy).tocsr()
        # u -> du/dy at corners, v -> dv/dx at corners
        self.uy = (sp.kron(Icx, Dcn_y) / g.dy).tocsr()
        self.vx = (sp.kron(Dcn_x, Icy) / g.dx).tocsr()

        nu = g.u_shape[0] * g.u_shape[1]
        nv = g.v_shape[0] * g.v_shape[1]
        self.nu, self.nv = nu, nv
        zu_c = sp.csr_matrix((g.nx * g.ny, nv))
        zv_c = sp.csr_matrix((g.nx * g.ny, nu))
        self.div = sp.hstack([self.ux, self.vy]).tocsr()
        # strain components as maps from the stacked velocity vector
        self.s11 = sp.hstack([self.ux, zu_c]).tocsr()
        self.s22 = sp.hstack([zv_c, self.vy]).tocsr()
        self.s12 = (0.5 * sp.hstack([self.uy, self.vx])).tocsr()

        free = g.vel_free.astype(float)
        # gradient = -div^T restricted to the free faces (adjoint pairing)
        self.grad = (sp.diags(free) @ (-self.div.T)).tocsr()
        # corner -> cell average (weights 1/4)
        self.corner_to_cell = sp.kron(_node_to_cell_avg(g.nx, px), _node_to_cell_avg(g.ny, py)).tocsr()
        self.lap = (self.div @ self.grad).tocsr()


# -- construction -----------------------------------------------------------

def _box_distance(X, Y, origin, extent, bc_kind):
    d = np.full(X.shape, np.inf)
    if bc_kind[0] == NOSLIP:
        d = np.minimum(d, np.minimum(X - origin[0], origin[0] + extent[0] - X))
    if bc_kind[1] == NOSLIP:
        d = np.minimum(d, np.minimum(Y - origin[1], origin[1] + extent[1] - Y))
    return d


def make_grid(
    box: tuple[tuple[float, float], tuple[float, float]],
    resolution: int | tuple[int, int],
    bc_kind: str | Sequence[str] = PERIODIC,
    obstacles: Sequence[Circle] = (),
    outer: Circle | None = None,
) -> Grid:
    """Build a MAC grid on ``box = ((x0, x1), (y0, y1))``.

    Cells whose centre lies inside any obstacle circle, or outside ``outer``
    when given, are marked solid.  The wall distance of fluid cells is the
    exact distance to the nearest no-slip boundary (box walls, obstacle
    circles, outer circle); solid cells carry zero.  With no walls at all the
    distance is ``+inf`` everywhere.
    """
    (x0, x1), (y0, y1) = box
    if isinstance(resolution, int):
        nx = ny = resolution
    else:
        nx, ny = resolution
    if isinstance(bc_kind, str):
        bc = (bc_kind, bc_kind)
    else:
        bc = tuple(bc_kind)
    if nx < 4 or ny < 4:
        raise ConfigurationError(f"need at least 4 cells per direction, got {nx}x{ny}")
    if x1 <= x0 or y1 <= y0:
        raise ConfigurationError("empty box")
    for kind in bc:
        if kind not in (PERIODIC, NOSLIP):
            raise ConfigurationError(f"unknown boundary kind {kind!r}")
    dx, dy = (x1 - x0) / nx, (y1 - y0) / ny
    h = max(dx, dy)
    for c in obstacles:
        if c.r <= 0:
            raise ConfigurationError("obstacle radius must be positive")
        if not (x0 <= c.cx - c.r and c.cx + c.r <= x1 and y0 <= c.cy - c.r and c.cy + c.r <= y1):
            raise ConfigurationError(f"obstacle {c} not inside box")
        if 2 * c.r < 2 * h:
            raise ConfigurationError(
                f"obstacle diameter {2 * c.r:g} under-resolved by cell size {h:g}"
            )

    X, Y = np.meshgrid(x0 + (np.arange(nx) + 0.5) * dx, y0 + (np.arange(ny) + 0.5) * dy, indexing="ij")
    solid = np.zeros((nx, ny), dtype=bool)
    dist = _box_distance(X, Y, (x0, y0), (x1 - x0, y1 - y0), bc)
    for c in obstacles:
        rr = np.hypot(X - c.cx, Y - c.cy)
        solid |= rr < c.r
        dist = np.minimum(dist, rr - c.r)
    if outer is not None:
        rr = np.hypot(X - outer.cx, Y - outer.cy)
        solid |= rr > outer.r
        dist = np.minimum(dist, outer.r - rr)
    dist = np.where(solid, 0.0, np.maximum(dist, 0.0))
    return Grid(
        nx=nx,
        ny=ny,
        dx=dx,
        dy=dy,
        origin=(x0, y0),
        extent=(x1 - x0, y1 - y0),
        solid_mask=solid,
        wall_distance=dist,
        bc_kind=bc,
        obstacles=tuple(obstacles),
        outer=outer,
    )


def wall_distance_at(grid: Grid, x: float, y: float) -> float:
    """Analytic wall distance at an arbitrary point (same rules as :func:`make_grid`)."""
    d = float(_box_distance(np.array(x), np.array(y), grid.origin, grid.extent, grid.bc_kind))
    inside_solid = False
    for c in grid.obstacles:
        rr = math.hypot(x - c.cx, y - c.cy)
        inside_solid |= rr < c.r
        d = min(d, rr - c.r)
    if grid.outer is not None:
        rr = math.hypot(x - grid.outer.cx, y - grid.outer.cy)
        inside_solid |= rr > grid.outer.r
        d = min(d, grid.outer.r - rr)
    return 0.0 if inside_solid else max(d, 0.0)


# -- field operators ----------------------------------------------------------

def divergence(vel: VectorField, grid: Grid) -> np.ndarray:
    """Cell-centred discrete divergence."""
    return (grid.ops.div @ vel.flat()).reshape(grid.nx, grid.ny)


def gradient(p: np.ndarray, grid: Grid) -> VectorField:
    """Face-centred gradient, the negative adjoint of :func:`divergence`.

    Wall faces of bounded directions get zero (homogeneous Neumann pressure).
    """
    return grid.split(grid.ops.grad @ np.asarray(p).ravel())


def strain_components(vel: VectorField, grid: Grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """S11, S22 at cell centres and S12 at corners."""
    w = vel.flat()
    o = grid.ops
    return (
        (o.s11 @ w).reshape(grid.nx, grid.ny),
        (o.s22 @ w).reshape(grid.nx, grid.ny),
        (o.s12 @ w).reshape(grid.corner_shape),
    )


def deformation_tensor_magsq(vel: VectorField, grid: Grid) -> np.ndarray:
    """Cell-centred ``|grad_s v|^2 = S11^2 + S22^2 + 2 S12^2``.

    The off-diagonal part is the average of ``S12^2`` over the four corners of
    each cell.  Integrating this field with weight ``eta`` reproduces exactly
    the dissipation of the discrete viscous operator built in
    :func:`viscous_operator`, which is what makes momentum dissipation and
    k-production cancel in the discrete energy budget.
    """
    s11, s22, s12 = strain_components(vel, grid)
    off = (grid.ops.corner_to_cell @ (s12 * s12).ravel()).reshape(grid.nx, grid.ny)
    return s11 * s11 + s22 * s22 + 2.0 * off


def viscous_operator(eta: np.ndarray, grid: Grid) -> sp.csr_matrix:
    """SPD matrix ``K`` with ``v.K v = sum_cells eta |grad_s v|^2`` (per unit cell area).

    ``-K v`` is the discrete ``div(eta grad_s v)`` on faces.  ``eta`` is a
    cell-centred viscosity; corner values are the quarter-weighted sum of the
    neighbouring cells.
    """
    o = grid.ops
    e = np.asarray(eta, dtype=float).ravel()
    e_corner = o.corner_to_cell.T @ e
    return (
        o.s11.T @ sp.diags(e) @ o.s11
        + o.s22.T @ sp.diags(e) @ o.s22
        + o.s12.T @ sp.diags(2.0 * e_corner) @ o.s12
    ).tocsr()


def _pad(a: np.ndarray, axis: int, periodic: bool, odd: bool) -> np.ndarray:
    """One ghost layer on each side along ``axis``: wrap, odd or even reflection."""
    if periodic:
        return np.concatenate([np.take(a, [-1], axis=axis), a, np.take(a, [0], axis=axis)], axis=axis)
    s = -1.0 if odd else 1.0
    return np.concatenate([s * np.take(a, [0], axis=axis), a, s * np.take(a, [-1], axis=axis)], axis=axis)


def _face_flux_upwind(vel: VectorField, q: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """First-order upwind fluxes ``u q`` on x- and y-faces."""
    if grid.periodic_x:
        ql, qr = np.roll(q, 1, axis=0), q
        fx = np.where(vel.u > 0, vel.u * ql, vel.u * qr)
    else:
        fx = np.zeros(grid.u_shape)
        ui = vel.u[1:-1]
        fx[1:-1] = np.where(ui > 0, ui * q[:-1], ui * q[1:])
    if grid.periodic_y:
        qb, qt = np.roll(q, 1, axis=1), q
        fy = np.where(vel.v > 0, vel.v * qb, vel.v * qt)
    else:
        fy = np.zeros(grid.v_shape)
        vi = vel.v[:, 1:-1]
        fy[:, 1:-1] = np.where(vi > 0, vi * q[:, :-1], vi * q[:, 1:])
    return fx, fy


def _flux_divergence(fx: np.ndarray, fy: np.ndarray, grid: Grid) -> np.ndarray:
    if grid.periodic_x:
        dfx = np.roll(fx, -1, axis=0) - fx
    else:
        dfx = fx[1:] - fx[:-1]
    if grid.periodic_y:
        dfy = np.roll(fy, -1, axis=1) - fy
    else:
        dfy = fy[:, 1:] - fy[:, :-1]
    return dfx / grid.dx + dfy / grid.dy


def advect_scalar(vel: VectorField, q: np.ndarray, grid: Grid) -> np.ndarray:
    """Tendency ``-div(v q)`` with monotone first-order upwind fluxes.

    Conservative: the cell sum of the tendency is zero for periodic or
    impermeable boundaries.  A forward-Euler update is positivity preserving
    when ``dt * (|u|/dx + |v|/dy) <= 1`` (see :func:`upwind_dt_limit`).
    """
    fx, fy = _face_flux_upwind(vel, q, grid)
    return -_flux_divergence(fx, fy, grid)


def upwind_dt_limit(vel: VectorField, grid: Grid) -> float:
    """Largest dt for which the upwind update keeps every cell coefficient >= 0."""
    if grid.periodic_x:
        ax = np.maximum(np.roll(vel.u, -1, axis=0), 0.0) - np.minimum(vel.u, 0.0)
    else:
        ax = np.maximum(vel.u[1:], 0.0) - np.minimum(vel.u[:-1], 0.0)
    if grid.periodic_y:
        ay = np.maximum(np.roll(vel.v, -1, axis=1), 0.0) - np.minimum(vel.v, 0.0)
    else:
        ay = np.maximum(vel.v[:, 1:], 0.0) - np.minimum(vel.v[:, :-1], 0.0)
    rate = float((ax / grid.dx + ay / grid.dy).max(initial=0.0))
    return math.inf if rate == 0.0 else 1.0 / rate


def advect_velocity(vel: VectorField, grid: Grid) -> VectorField:
    """Tendency ``-div(v (x) v)`` in conservative second-order MAC form.

    Normal momentum fluxes are products of cell-centre averages, transverse
    fluxes products of corner averages; for a discretely solenoidal field the
    kinetic energy is conserved by the spatial operator.
    """
    u, v = vel.u, vel.v
    px, py = grid.periodic_x, grid.periodic_y
    # u at cell centres / v at cell centres
    uc = 0.5 * (np.roll(u, -1, axis=0) + u) if px else 0.5 * (u[1:] + u[:-1])
    vc = 0.5 * (np.roll(v, -1, axis=1) + v) if py else 0.5 * (v[:, 1:] + v[:, :-1])
    # corner values: u averaged in y, v averaged in x
    up = _pad(u, 1, py, odd=True)
    u_cor = 0.5 * (up[:, 1:] + up[:, :-1])  # shape (nux, ny+1)
    vp = _pad(v, 0, px, odd=True)
    v_cor = 0.5 * (vp[1:] + vp[:-1])  # shape (nx+1, nvy)
    if py:
        u_cor = u_cor[:, :-1]
    if px:
        v_cor = v_cor[:-1]
    # corner arrays now have corner_shape when both are consistent
    uv = u_cor * v_cor  # corner flux of x-momentum in y (and y-momentum in x)

    # x-momentum: d(uu)/dx at u faces + d(uv)/dy at u faces
    uu = uc * uc
    if px:
        duu = (uu - np.roll(uu, 1, axis=0)) / grid.dx
    else:
        duu = np.zeros(grid.u_shape)
        duu[1:-1] = (uu[1:] - uu[:-1]) / grid.dx
    if py:
        duv_y = (np.roll(uv, -1, axis=1) - uv) / grid.dy
    else:
        duv_y = (uv[:, 1:] - uv[:, :-1]) / grid.dy
    au = -(duu + duv_y)
    if not px:
        au[0] = au[-1] = 0.0

    vv = vc * vc
    if py:
        dvv = (vv - np.roll(vv, 1, axis=1)) / grid.dy
    else:
        dvv = np.zeros(grid.v_shape)
        dvv[:, 1:-1] = (vv[:, 1:] - vv[:, :-1]) / grid.dy
    if px:
        duv_x = (np.roll(uv, -1, axis=0) - uv) / grid.dx
    else:
        duv_x = (uv[1:] - uv[:-1]) / grid.dx
    av = -(dvv + duv_x)
    if not py:
        av[:, 0] = av[:, -1] = 0.0
    return VectorField(au, av)


def advect(vel: VectorField, field_: VectorField | np.ndarray, grid: Grid):
    """Advective tendency of a cell scalar (upwind) or of the velocity itself."""
    if isinstance(field_, VectorField):
        if field_ is not vel:
            raise ValueError("velocity advection is only defined for the advecting field itself")
        return advect_velocity(vel, grid)
    return advect_scalar(vel, field_, grid)


def to_centers(vel: VectorField, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Velocity interpolated to cell centres."""
    u, v = vel.u, vel.v
    uc = 0.5 * (np.roll(u, -1, axis=0) + u) if grid.periodic_x else 0.5 * (u[1:] + u[:-1])
    vc = 0.5 * (np.roll(v, -1, axis=1) + v) if grid.periodic_y else 0.5 * (v[:, 1:] + v[:, :-1])
    return uc, vc


def speed_sq_centers(vel: VectorField, grid: Grid) -> np.ndarray:
    """``|v|^2`` at cell centres as the average of the adjacent face squares."""
    u2, v2 = vel.u**2, vel.v**2
    a = 0.5 * (np.roll(u2, -1, axis=0) + u2) if grid.periodic_x else 0.5 * (u2[1:] + u2[:-1])
    b = 0.5 * (np.roll(v2, -1, axis=1) + v2) if grid.periodic_y else 0.5 * (v2[:, 1:] + v2[:, :-1])
    return a + b


SNAPSHOT_HEADER = ("x", "y", "u", "v", "p", "k", "nu_t")


def write_snapshot_csv(path: str | Path, grid: Grid, vel: VectorField, p: np.ndarray, k: np.ndarray,
                       nu_t: np.ndarray) -> Path:
    """One row per cell centre: ``x,y,u,v,p,k,nu_t``."""
    path = Path(path)
    X, Y = grid.cell_centers()
    uc, vc = to_centers(vel, grid)
    cols = [X, Y, uc, vc, p, k, nu_t]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SNAPSHOT_HEADER)
        for row in zip(*(np.asarray(c).ravel() for c in cols)):
            w.writerow([repr(float(x)) for x in row])
    return path
