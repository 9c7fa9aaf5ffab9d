"""Finite-difference assembly of the drift-diffusion eigenproblem.

Three discretizations on a uniform tensor grid with homogeneous Dirichlet
conditions, all using the second-order ``2N+1`` point Laplacian:

* the gauge-transformed, self-adjoint form in physical coordinates,
  ``-eps Lap u + [alpha^2/eps |grad m|^2 + alpha Lap m + V] u``;
* the same operator in blow-up coordinates ``y = alpha^(1/2) x``,
  ``-eps Lap_y w + [(4/eps) sum a_i^2 y_i^2 + V(alpha^(-1/2) y)/alpha] w``,
  whose eigenvalues are those of the physical operator divided by ``alpha``;
* the original non-symmetric drift form ``-eps Lap phi - 2 alpha grad m . grad phi + V phi``
  with centered advection, kept for small-alpha cross-checks only.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .model import DriftSpec, Frame, Grid, GridField, PotentialSpec, eval_grad_m, eval_laplacian_m, eval_m

OVERFLOW_GUARD = 600.0


class OverflowGuardError(ValueError):
    """Gauge factor ``exp(alpha m / eps)`` would leave double range on the grid."""


@dataclass(frozen=True, eq=False)
class SymmetricOperator:
    matrix: sp.csr_matrix
    grid: Grid
    frame: Frame
    eps: float
    alpha: float
    potential: np.ndarray  # full diagonal potential term at the interior nodes

    @property
    def mass_weight(self) -> float:
        return self.grid.cell_volume

    @property
    def size(self) -> int:
        return self.grid.size


@dataclass(frozen=True, eq=False)
class NonSymmetricOperator:
    matrix: sp.csr_matrix
    grid: Grid
    eps: float
    alpha: float


def _second_difference(n: int, h: float) -> sp.csr_matrix:
    main = np.full(n, 2.0 / h**2)
    off = np.full(n - 1, -1.0 / h**2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def _first_difference(n: int, h: float) -> sp.csr_matrix:
    off = np.full(n - 1, 0.5 / h)
    return sp.diags([-off, off], [-1, 1], format="csr")


def _along_axis(block: sp.spmatrix, axis: int, shape: tuple) -> sp.csr_matrix:
    """Kronecker embedding of a 1-D operator acting along ``axis``."""
    out = sp.identity(1, format="csr")
    for j, n in enumerate(shape):
        out = sp.kron(out, block if j == axis else sp.identity(n, format="csr"), format="csr")
    return out


def negative_laplacian(grid: Grid) -> sp.csr_matrix:
    """``-Lap`` with Dirichlet zeros; a Kronecker sum, hence exactly symmetric."""
    shape = grid.shape
    out = sp.csr_matrix((grid.size, grid.size))
    for axis, (n, h) in enumerate(zip(shape, grid.spacing)):
        out = out + _along_axis(_second_difference(n, h), axis, shape)
    return out.tocsr()


def effective_potential(drift: DriftSpec, V: PotentialSpec, eps: float, alpha: float, x) -> np.ndarray:
    """``(alpha^2/eps) |grad m|^2 + alpha Lap m + V`` which is ``(4 alpha^2/eps) sum a_i^2 x_i^2 + V``."""
    if eps <= 0 or alpha < 0:
        raise ValueError("need eps > 0 and alpha >= 0")
    x = np.asarray(x, dtype=float)
    g = eval_grad_m(drift, x)
    return (alpha**2 / eps) * np.sum(g**2, axis=-1) + alpha * eval_laplacian_m(drift) + V(x)


def oscillator_potential(drift: DriftSpec, eps: float, y) -> np.ndarray:
    """``(4/eps) sum a_i^2 y_i^2``."""
    y = np.asarray(y, dtype=float)
    return (4.0 / eps) * np.sum(drift.a**2 * y**2, axis=-1)


def assemble_symmetric(
    drift: DriftSpec,
    V: PotentialSpec,
    grid: Grid,
    eps: float,
    alpha: float,
    frame: Optional[Frame] = None,
) -> SymmetricOperator:
    """Assemble the self-adjoint operator in the physical or rescaled frame.

    ``frame`` defaults to physical.  For a rescaled frame the grid box is read
    in ``y`` coordinates and the smallest eigenvalue approximates
    ``lambda_alpha / alpha``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if grid.dim != drift.dim:
        raise ValueError("grid and drift dimensions differ")
    frame = Frame.physical() if frame is None else frame
    pts = grid.points()
    if frame.is_rescaled:
        if frame.alpha != alpha:
            raise ValueError("rescaled frame alpha does not match alpha")
        s = alpha**-0.5
        pot = oscillator_potential(drift, eps, pts) + V(s * pts) / alpha
    else:
        pot = effective_potential(drift, V, eps, alpha, pts)
    A = eps * negative_laplacian(grid) + sp.diags(pot, format="csr")
    return SymmetricOperator(A.tocsr(), grid, frame, float(eps), float(alpha), pot)


def schrodinger_operator(grid: Grid, potential=None, eps: float = 1.0) -> SymmetricOperator:
    """``-eps Lap + diag(potential)`` on any grid; used for classical oracle problems."""
    pot = np.zeros(grid.size) if potential is None else np.asarray(potential, dtype=float).ravel()
    A = eps * negative_laplacian(grid) + sp.diags(pot, format="csr")
    return SymmetricOperator(A.tocsr(), grid, Frame.physical(), float(eps), 0.0, pot)


def shifted_oscillator(drift: DriftSpec, grid: Grid, eps: float) -> sp.csr_matrix:
    """Discrete ``-eps Lap + (4/eps) sum a_i^2 y_i^2 - 2 sum |a_i|``."""
    pot = oscillator_potential(drift, eps, grid.points()) - drift.mu
    return (eps * negative_laplacian(grid) + sp.diags(pot, format="csr")).tocsr()


def gauge_exponent_bound(drift: DriftSpec, grid: Grid, eps: float, alpha: float) -> float:
    """``alpha max|m| / eps`` over the closed box.

    A separable quadratic attains its extremes with each coordinate at ``lo``, ``0`` or ``hi``.
    """
    cand = np.array(np.meshgrid(*[(l, 0.0, h) for l, h in zip(grid.box.lo, grid.box.hi)], indexing="ij"))
    cand = cand.reshape(grid.dim, -1).T
    return alpha * float(np.max(np.abs(eval_m(drift, cand)))) / eps


def assemble_nonsymmetric(
    drift: DriftSpec, V: PotentialSpec, grid: Grid, eps: float, alpha: float
) -> NonSymmetricOperator:
    """Centered discretization of ``-eps Lap - 2 alpha grad m . grad + V`` (no upwinding)."""
    if eps <= 0 or alpha < 0:
        raise ValueError("need eps > 0 and alpha >= 0")
    bound = gauge_exponent_bound(drift, grid, eps, alpha)
    if bound > OVERFLOW_GUARD:
        raise OverflowGuardError(f"alpha*max|m|/eps = {bound:.3g} exceeds {OVERFLOW_GUARD:g}")
    pts = grid.points()
    A = eps * negative_laplacian(grid)
    if alpha != 0.0:
        g = eval_grad_m(drift, pts)
        for axis, (n, h) in enumerate(zip(grid.shape, grid.spacing)):
            D = _along_axis(_first_difference(n, h), axis, grid.shape)
            A = A - 2.0 * alpha * sp.diags(g[:, axis]) @ D
    A = A + sp.diags(V(pts))
    return NonSymmetricOperator(A.tocsr(), grid, float(eps), float(alpha))


def gauge_factor(drift: DriftSpec, grid: Grid, eps: float, alpha: float) -> np.ndarray:
    """``exp(alpha (m - a0) / eps)`` at the interior nodes; maps ``phi`` to ``u``."""
    return np.exp(alpha * (eval_m(drift, grid.points()) - drift.a0) / eps)


def rayleigh_quotient(op: SymmetricOperator, u: GridField) -> float:
    """``u^T A u / u^T u`` with the discrete matrix."""
    if u.grid != op.grid:
        raise ValueError("field and operator live on different grids")
    v = u.values
    uu = float(v @ v)
    if uu == 0.0:
        raise ValueError("Rayleigh quotient of the zero field")
    return float(v @ (op.matrix @ v)) / uu


def write_coo(matrix: sp.spmatrix, path) -> None:
    """Write ``row col value`` lines (0-based, row-major order)."""
    m = sp.coo_matrix(matrix)
    order = np.lexsort((m.col, m.row))
    with open(Path(path), "w") as fh:
        for r, c, v in zip(m.row[order], m.col[order], m.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")


def read_coo(path, size: int) -> sp.csr_matrix:
    data = np.loadtxt(Path(path), ndmin=2)
    return sp.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(size, size))
