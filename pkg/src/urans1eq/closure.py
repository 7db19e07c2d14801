"""
Turbulence length scales, eddy viscosity and the k-equation time step.

Three length-scale modes are supported:

``static``
    ``l0(x) = min(0.41 y, 0.082 Re^-1/2)`` from the wall distance ``y``.
``kinematic``
    ``lK(x, t) = sqrt(2) k^1/2 tau``; the k sink becomes linear,
    ``(sqrt(2)/2) k / tau``, and ``nu_T = sqrt(2) mu k tau``.
``geometric``
    ``l_theta = l0^theta lK^(1 - theta)``; ``theta = 1`` is static and
    ``theta = 0`` kinematic.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .grid import Grid, VectorField, advect_scalar, deformation_tensor_magsq, speed_sq_centers, upwind_dt_limit
from .linsolve import solve_spd

log = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
KAPPA = 0.41
CAP = 0.082

Mode = Literal["static", "kinematic", "geometric"]


@dataclass(frozen=True)
class ClosureConfig:
    """Parameters of the one-equation closure.

    ``mu`` defaults to 0.55 (law-of-the-wall calibration); the kinetic-theory
    values 0.33 (2d) / 0.27 (3d) can be passed explicitly.
    """

    mode: Mode = "kinematic"
    mu: float = 0.55
    tau: float = 1.0
    nu: float = 1e-4
    theta: float | None = None
    k_floor: float = 0.0

    def __post_init__(self):
        if self.mode not in ("static", "kinematic", "geometric"):
            raise ValueError(f"unknown length-scale mode {self.mode!r}")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.mode in ("kinematic", "geometric") and not self.tau > 0:
            raise ValueError("tau must be positive for kinematic/geometric modes")
        if self.mode == "geometric":
            if self.theta is None or not 0.0 <= self.theta <= 2.0:
                raise ValueError("geometric mode needs theta in [0, 2]")
        if self.nu < 0 or self.k_floor < 0:
            raise ValueError("nu and k_floor must be non-negative")

    def with_(self, **kw) -> "ClosureConfig":
        return replace(self, **kw)


# -- length scales --------------------------------------------------------------

def static_length_scale(grid: Grid, re: float) -> np.ndarray:
    """``min(0.41 y, 0.082 Re^-1/2)``; the cap alone where there are no walls."""
    if not re > 0:
        raise ValueError("Reynolds number must be positive")
    cap = CAP / math.sqrt(re)
    with np.errstate(invalid="ignore"):
        return np.minimum(KAPPA * grid.wall_distance, cap)


def kinematic_length_scale(k: np.ndarray, tau: float) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise ValueError("kinematic length scale needs k >= 0; clamp first")
    return SQRT2 * np.sqrt(k) * tau


def geometric_length_scale(l0: np.ndarray, lk: np.ndarray, theta: float) -> np.ndarray:
    """Weighted geometric mean ``l0^theta lk^(1-theta)`` (zero wherever ``l0 = 0`` and ``theta > 0``)."""
    l0 = np.asarray(l0, dtype=float)
    lk = np.asarray(lk, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.power(l0, theta) * np.power(lk, 1.0 - theta)
    if theta > 0:
        out = np.where(l0 == 0.0, 0.0, out)
    return out


def length_scale(closure: ClosureConfig, k: np.ndarray, l0: np.ndarray | None) -> np.ndarray:
    """Current turbulence length scale for the configured mode."""
    kp = np.maximum(k, 0.0)
    if closure.mode == "static":
        return np.broadcast_to(_need(l0), kp.shape).copy()
    lk = kinematic_length_scale(kp, closure.tau)
    if closure.mode == "kinematic":
        return lk
    return geometric_length_scale(_need(l0), lk, closure.theta)


def _need(l0):
    if l0 is None:
        raise ValueError("this length-scale mode needs the static field l0")
    return np.asarray(l0, dtype=float)


def eddy_viscosity(l: np.ndarray, k: np.ndarray, mu: float) -> np.ndarray:
    """Prandtl-Kolmogorov ``nu_T = mu l sqrt(k)``."""
    return mu * np.asarray(l) * np.sqrt(np.maximum(k, 0.0))


def turbulent_viscosity(closure: ClosureConfig, k: np.ndarray, l0: np.ndarray | None = None) -> np.ndarray:
    """``nu_T`` for the configured mode, written so that ``k = 0`` never yields ``inf * 0``."""
    kp = np.maximum(np.asarray(k, dtype=float), 0.0)
    if closure.mode == "kinematic":
        return SQRT2 * closure.mu * closure.tau * kp
    if closure.mode == "static":
        return closure.mu * _need(l0) * np.sqrt(kp)
    th = closure.theta
    return closure.mu * np.power(_need(l0), th) * (SQRT2 * closure.tau) ** (1.0 - th) * np.power(kp, 1.0 - 0.5 * th)


def sink_rate(closure: ClosureConfig, k: np.ndarray, l0: np.ndarray | None = None) -> np.ndarray:
    """Coefficient ``c`` with k-sink ``= c k``: ``sqrt(k)/l`` frozen at the given ``k``.

    ``inf`` marks cells where the length scale vanishes (the sink forces ``k = 0``).
    """
    kp = np.maximum(np.asarray(k, dtype=float), 0.0)
    if closure.mode == "kinematic":
        return np.full(kp.shape, SQRT2 / (2.0 * closure.tau))
    l0 = _need(l0)
    with np.errstate(divide="ignore", invalid="ignore"):
        if closure.mode == "static":
            c = np.sqrt(kp) / l0
        else:
            th = closure.theta
            c = np.power(kp, 0.5 * th) / (np.power(l0, th) * (SQRT2 * closure.tau) ** (1.0 - th))
    return np.where(l0 == 0.0, np.inf, np.nan_to_num(c, nan=0.0, posinf=np.inf))


def dissipation_density(closure: ClosureConfig, k: np.ndarray, l0: np.ndarray | None = None) -> np.ndarray:
    """Pointwise k-sink ``k^3/2 / l`` (``(sqrt(2)/2) k / tau`` in kinematic mode)."""
    kp = np.maximum(np.asarray(k, dtype=float), 0.0)
    c = sink_rate(closure, kp, l0)
    with np.errstate(invalid="ignore"):
        return np.where(kp == 0.0, 0.0, c * kp)


# -- initial conditions -----------------------------------------------------------

def initial_k_from_l0(l0: np.ndarray, tau: float) -> np.ndarray:
    """``k(x, 0) = l0^2 / (2 tau^2)`` so that the kinematic length equals ``l0`` at start."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    return np.asarray(l0, dtype=float) ** 2 / (2.0 * tau * tau)


def duct_intensity(re: float) -> float:
    return 0.16 * re ** (-1.0 / 8.0)


def initial_k_duct(vel0: VectorField | np.ndarray, re: float, grid: Grid | None = None) -> np.ndarray:
    """``k = 1.5 |u0|^2 I^2`` with ``I = 0.16 Re^-1/8``.

    ``vel0`` is either a face velocity (``grid`` required) or an array of
    ``|u0|`` values.
    """
    if not re > 0:
        raise ValueError("Reynolds number must be positive")
    if isinstance(vel0, VectorField):
        if grid is None:
            raise ValueError("grid required for a face velocity")
        speed2 = speed_sq_centers(vel0, grid)
    else:
        speed2 = np.asarray(vel0, dtype=float) ** 2
    return 1.5 * speed2 * duct_intensity(re) ** 2


# -- k-equation time step ---------------------------------------------------------

@dataclass
class KStepInfo:
    """Per-step bookkeeping of the k update (all integrals are area-weighted sums)."""

    k_old: float = 0.0
    k_new: float = 0.0
    production: float = 0.0
    sink: float = 0.0
    boundary_loss: float = 0.0
    clamped_mass: float = 0.0
    min_before_clamp: float = 0.0
    advection_substeps: int = 1


def _face_average(d: np.ndarray, grid: Grid) -> np.ndarray:
    """Cell diffusivity averaged to the stacked (x-faces, y-faces) vector."""
    if grid.periodic_x:
        dx_ = 0.5 * (d + np.roll(d, 1, axis=0))
    else:
        dx_ = np.zeros(grid.u_shape)
        dx_[1:-1] = 0.5 * (d[1:] + d[:-1])
    if grid.periodic_y:
        dy_ = 0.5 * (d + np.roll(d, 1, axis=1))
    else:
        dy_ = np.zeros(grid.v_shape)
        dy_[:, 1:-1] = 0.5 * (d[:, 1:] + d[:, :-1])
    return np.concatenate([dx_.ravel(), dy_.ravel()])


def _wall_dirichlet_coeff(d: np.ndarray, grid: Grid) -> np.ndarray:
    """Extra diagonal for k = 0 on box walls (odd ghost at half-cell distance)."""
    c = np.zeros_like(d)
    if not grid.periodic_x:
        c[0] += 2.0 * d[0] / grid.dx**2
        c[-1] += 2.0 * d[-1] / grid.dx**2
    if not grid.periodic_y:
        c[:, 0] += 2.0 * d[:, 0] / grid.dy**2
        c[:, -1] += 2.0 * d[:, -1] / grid.dy**2
    return c


def diffusion_matrix(diffusivity: np.ndarray, grid: Grid) -> sp.csr_matrix:
    """Matrix of ``-div(D grad k)`` on cells, homogeneous Dirichlet on box walls."""
    o = grid.ops
    dface = _face_average(diffusivity, grid)
    return (-(o.div @ sp.diags(dface) @ o.grad) + sp.diags(_wall_dirichlet_coeff(diffusivity, grid).ravel())).tocsr()


def k_step(
    k: np.ndarray,
    vel: VectorField,
    closure: ClosureConfig,
    grid: Grid,
    dt: float,
    *,
    l0: np.ndarray | None = None,
    vel_production: VectorField | None = None,
) -> tuple[np.ndarray, KStepInfo]:
    """Advance ``k`` by one step.

    1. explicit upwind advection by ``vel`` (sub-cycled to the monotonicity limit),
    2. implicit diffusion with diffusivity ``nu + nu_T`` frozen at the old ``k``,
    3. implicit sink ``c(k_old) k_new`` (exactly linear in kinematic mode),
    4. explicit production ``nu_T(k_old) |grad_s v|^2`` with ``v = vel_production``
       (defaults to ``vel``).

    The system matrix is an M-matrix and every right-hand-side term is
    non-negative, so the result is non-negative up to round-off.  Solid cells
    and cells with vanishing length scale are held at ``k = 0``.  Values below
    ``closure.k_floor`` are clamped and the clamped mass is reported.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    area = grid.cell_area
    k = np.where(grid.solid_mask, 0.0, np.maximum(np.asarray(k, dtype=float), 0.0))
    info = KStepInfo(k_old=float(k.sum() * area))

    nu_t = np.where(grid.solid_mask, 0.0, turbulent_viscosity(closure, k, l0))
    sink = sink_rate(closure, k, l0)
    vp = vel if vel_production is None else vel_production
    prod = nu_t * deformation_tensor_magsq(vp, grid)

    # explicit advection, sub-cycled to stay monotone
    limit = upwind_dt_limit(vel, grid)
    nsub = 1 if dt <= limit else int(math.ceil(dt / limit))
    h = dt / nsub
    k_adv = k
    for _ in range(nsub):
        k_adv = k_adv + h * advect_scalar(vel, k_adv, grid)
    info.advection_substeps = nsub
    k_adv = np.where(grid.solid_mask, 0.0, k_adv)

    fixed = grid.solid_mask | ~np.isfinite(sink)
    active = ~fixed.ravel()
    A = diffusion_matrix(closure.nu + nu_t, grid) * dt
    diag = 1.0 + dt * np.where(fixed, 0.0, sink)
    A = (A + sp.diags(diag.ravel())).tocsr()
    rhs = (k_adv + dt * prod).ravel()

    k_new = np.zeros(k.size)
    if active.any():
        idx = np.flatnonzero(active)
        A_aa = A[idx][:, idx]
        k_new[idx] = solve_spd(A_aa, rhs[idx], what="k diffusion")
    k_new = k_new.reshape(k.shape)

    info.production = float(prod[~fixed].sum() * area)
    info.sink = float((np.where(fixed, 0.0, sink) * k_new).sum() * area)
    k_adv_int = float(k_adv[~fixed].sum() * area)
    raw_int = float(k_new.sum() * area)
    info.boundary_loss = (k_adv_int - raw_int) / dt + info.production - info.sink
    info.min_before_clamp = float(k_new.min())

    floor = closure.k_floor
    deficit = np.maximum(floor - k_new, 0.0)
    deficit[fixed] = 0.0
    info.clamped_mass = float(deficit.sum() * area)
    if info.clamped_mass > 0:
        log.debug("k clamp added %.3e", info.clamped_mass)
    k_new = np.where(fixed, 0.0, np.maximum(k_new, floor))
    info.k_new = float(k_new.sum() * area)
    return k_new, info


# -- zero-velocity decay ------------------------------------------------------------

def decay_rhs(closure: ClosureConfig, l0: float | None = None):
    """Right-hand side ``k' = -sink(k)`` of the spatially uniform, zero-velocity k-equation."""
    if closure.mode == "kinematic":
        a = SQRT2 / (2.0 * closure.tau)
        return lambda t, k: -a * k
    if closure.mode == "static":
        return lambda t, k: -np.power(np.maximum(k, 0.0), 1.5) / l0
    th = closure.theta
    c = 1.0 / (l0**th * (SQRT2 * closure.tau) ** (1.0 - th))
    return lambda t, k: -c * np.power(np.maximum(k, 0.0), 1.0 + 0.5 * th)


def decay_ode_oracle(k0: float, closure: ClosureConfig, t, l0: float | None = None, rtol: float = 1e-10) -> np.ndarray:
    """High-accuracy solution of the zero-velocity k-equation at times ``t``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if k0 < 0:
        raise ValueError("k0 must be non-negative")
    if k0 == 0 or t.max() == 0:
        return np.full(t.shape, float(k0))
    sol = solve_ivp(decay_rhs(closure, l0), (0.0, float(t.max())), [float(k0)], method="DOP853",
                    t_eval=np.sort(np.unique(np.concatenate([[0.0], t]))), rtol=rtol, atol=1e-14 * k0)
    if not sol.success:
        raise RuntimeError(sol.message)
    return np.interp(t, sol.t, sol.y[0])


def decay_closed_form(k0: float, closure: ClosureConfig, t, l0: float | None = None) -> np.ndarray:
    """Exact decay: exponential (kinematic) or ``k0 (1 + lam t)^(-2/theta)`` (static: theta = 1)."""
    t = np.asarray(t, dtype=float)
    if closure.mode == "kinematic":
        return k0 * np.exp(-t / (SQRT2 * closure.tau))
    th = 1.0 if closure.mode == "static" else closure.theta
    if th == 0:
        return k0 * np.exp(-t / (SQRT2 * closure.tau))
    c = 1.0 / (l0**th * (SQRT2 * closure.tau) ** (1.0 - th))
    lam = 0.5 * th * c * k0 ** (0.5 * th)
    return k0 * (1.0 + lam * t) ** (-2.0 / th)
