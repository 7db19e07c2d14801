"""Linear solvers: the pressure Poisson problem and the implicit diffusion systems."""
from __future__ import annotations

import numpy as np
import scipy.fft as sfft
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid


class SolverError(RuntimeError):
    """A linear solve failed to reach its tolerance.

    ``diagnostics`` carries the iteration count and final residual.
    """

    def __init__(self, message: str, **diagnostics):
        super().__init__(f"{message} ({', '.join(f'{k}={v}' for k, v in diagnostics.items())})")
        self.diagnostics = diagnostics


def _eigs_1d(n: int, h: float, periodic: bool) -> np.ndarray:
    m = np.arange(n)
    if periodic:
        return (2.0 * np.cos(2.0 * np.pi * m / n) - 2.0) / h**2
    return (2.0 * np.cos(np.pi * m / n) - 2.0) / h**2


class PoissonSolver:
    """Solve ``div(grad phi) = rhs`` on the MAC grid.

    The discrete Laplacian of a uniform grid with periodic and/or homogeneous
    Neumann sides is diagonalized by FFT (periodic) and DCT-II (Neumann)
    transforms, so each sweep is an exact inverse up to round-off.  The sweep
    is used as the preconditioner of a defect-correction iteration that runs
    until the max-norm residual is below ``tol``.
    """

    def __init__(self, grid: Grid, tol: float = 1e-8, max_iter: int = 20):
        self.grid = grid
        self.tol = tol
        self.max_iter = max_iter
        lx = _eigs_1d(grid.nx, grid.dx, grid.periodic_x)
        ly = _eigs_1d(grid.ny, grid.dy, grid.periodic_y)
        lam = lx[:, None] + ly[None, :]
        lam[0, 0] = 1.0  # null space (constants); the mode is zeroed below
        self._inv = 1.0 / lam
        self._inv[0, 0] = 0.0
        self.last_iterations = 0
        self.last_residual = 0.0

    def _forward(self, a):
        g = self.grid
        a = sfft.fft(a, axis=0) if g.periodic_x else sfft.dct(a, type=2, axis=0)
        a = sfft.fft(a, axis=1) if g.periodic_y else sfft.dct(a, type=2, axis=1)
        return a

    def _backward(self, a):
        g = self.grid
        a = sfft.ifft(a, axis=1) if g.periodic_y else sfft.idct(a, type=2, axis=1)
        a = sfft.ifft(a, axis=0) if g.periodic_x else sfft.idct(a, type=2, axis=0)
        return np.real(a)

    def sweep(self, rhs: np.ndarray) -> np.ndarray:
        return self._backward(self._forward(rhs) * self._inv)

    def apply(self, phi: np.ndarray) -> np.ndarray:
        g = self.grid
        return (g.ops.lap @ phi.ravel()).reshape(g.nx, g.ny)

    def solve(self, rhs: np.ndarray, tol: float | None = None) -> np.ndarray:
        """Return ``phi`` with ``max|lap(phi) - rhs| <= tol`` (absolute)."""
        tol = self.tol if tol is None else tol
        rhs = rhs - rhs.mean()  # compatibility with the constant null space
        phi = np.zeros_like(rhs)
        res = rhs
        rnorm = float(np.abs(res).max(initial=0.0))
        it = 0
        while it < self.max_iter and rnorm > 1e-2 * tol:
            it += 1
            phi = phi + self.sweep(res)
            res = rhs - self.apply(phi)
            res -= res.mean()
            new = float(np.abs(res).max())
            stalled = new > 0.5 * rnorm
            rnorm = new
            if stalled:
                break
        self.last_iterations = it
        self.last_residual = rnorm
        if not np.isfinite(rnorm) or rnorm > tol:
            raise SolverError("Poisson solve did not converge", iterations=it, residual=rnorm)
        return phi


def solve_spd(A: sp.spmatrix, b: np.ndarray, what: str = "diffusion", rtol: float = 1e-12,
              maxiter: int = 5000, x0: np.ndarray | None = None, method: str = "cg") -> np.ndarray:
    """Solve an SPD system; Jacobi-preconditioned CG by default, sparse LU with ``method="direct"``.

    Raises :class:`SolverError` with the iteration count and residual when the
    relative residual does not reach ``rtol``.
    """
    bn = float(np.linalg.norm(b))
    if bn == 0.0:
        return np.zeros_like(b)
    # solve for b / |b| so that tiny right-hand sides do not underflow inside CG
    b = b / bn
    if x0 is not None:
        x0 = x0 / bn
    if method == "direct":
        try:
            x = spla.splu(sp.csc_matrix(A)).solve(b)
        except RuntimeError as exc:  # singular factor
            raise SolverError(f"{what} solve failed: {exc}", iterations=0, residual=float("nan")) from exc
        iters = 1
    else:
        A = sp.csr_matrix(A)
        dinv = 1.0 / A.diagonal()
        M = spla.LinearOperator(A.shape, matvec=lambda r: dinv * r, dtype=float)
        count = [0]

        def cb(_):
            count[0] += 1

        x, status = spla.cg(A, b, x0=x0, rtol=rtol, atol=0.0, maxiter=maxiter, M=M, callback=cb)
        iters = count[0]
        if status < 0:
            raise SolverError(f"{what} solve broke down", iterations=iters, residual=float("nan"))
    r = float(np.linalg.norm(A @ x - b))
    if not np.all(np.isfinite(x)) or r > 10.0 * rtol:
        raise SolverError(f"{what} solve did not converge", iterations=iters, residual=r)
    return x * bn
