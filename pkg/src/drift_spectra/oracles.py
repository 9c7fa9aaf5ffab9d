"""Brute-force reference solutions used to cross-check the spectral and iterative solvers."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .limit import LimitPair
from .model import BoxDomain, Grid
from .operator import shifted_oscillator
from .richardson import romberg


def constrained_grid_solve(limit: LimitPair, rhs: Callable, grid: Grid) -> np.ndarray:
    """Solve ``Nop_h phi = F, <phi, Q>_h = 0`` with a Lagrange multiplier.

    Bordered system ``[[Nop_h, w Q], [w Q^T, 0]] [phi; s] = [F; 0]`` with the
    midpoint weight ``w``; returns ``phi`` at the grid nodes.
    """
    pts = grid.points()
    N = shifted_oscillator(limit.drift, grid, limit.eps)
    q = grid.cell_volume * limit.Q(pts)
    K = sp.bmat([[N, sp.csr_matrix(q[:, None])], [sp.csr_matrix(q[None, :]), None]], format="csc")
    b = np.concatenate([np.asarray(rhs(pts), dtype=float), [0.0]])
    sol = spla.spsolve(K, b)
    return sol[:-1]


def constrained_solve_extrapolated(
    limit: LimitPair, rhs: Callable, radius: float = 6.0, levels: Sequence[int] = (63, 127, 255)
):
    """Romberg-extrapolated grid solution sampled on the coarsest grid.

    ``levels`` are interior point counts ``2^k - 1`` on ``[-radius, radius]^N``
    so that every coarse node is a fine node.  Returns ``(coarse_grid, values)``.
    """
    box = BoxDomain.cube(radius, limit.drift.dim)
    grids = [Grid.uniform(box, n) for n in levels]
    coarse = grids[0]
    sols = []
    for g in grids:
        v = constrained_grid_solve(limit, rhs, g).reshape(g.shape)
        step = (g.shape[0] + 1) // (coarse.shape[0] + 1)
        sl = tuple(slice(step - 1, None, step) for _ in g.shape)
        sols.append(v[sl].ravel())
    ratio = (levels[1] + 1) / (levels[0] + 1)
    return coarse, romberg(sols, ratio=ratio)

