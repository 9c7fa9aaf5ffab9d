"""Smallest eigenpair of a sparse symmetric positive definite operator.

Inexact inverse iteration: each step solves ``A x = u`` by Jacobi-preconditioned
conjugate gradients with an inner tolerance tied to the current eigen-residual.
When the observed contraction per step is poor (small spectral gap) the
iteration hands over to LOBPCG with block size 2.  The start vector is fixed
(all ones) so results are reproducible.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import GridField
from .operator import NonSymmetricOperator, SymmetricOperator
from .richardson import romberg, romberg_error_estimate

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 10000
SLOW_CONTRACTION = 0.9
POSITIVITY_SLACK = 1e-8


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, best_residual: float):
        super().__init__(f"{message} (best relative residual {best_residual:.3e})")
        self.best_residual = best_residual


@dataclass(frozen=True, eq=False)
class EigenPair:
    lambda_: float
    u: GridField
    residual: float
    iterations: int
    gap_estimate: Optional[float] = None

    @property
    def relative_residual(self) -> float:
        return self.residual / abs(self.lambda_) if self.lambda_ else self.residual


def _check_symmetric(A: sp.spmatrix) -> None:
    d = (A - A.T).tocoo()
    if d.nnz and np.max(np.abs(d.data)) != 0.0:
        raise ValueError("operator matrix is not symmetric")


def _jacobi(A: sp.spmatrix) -> spla.LinearOperator:
    dinv = 1.0 / A.diagonal()
    return spla.LinearOperator(
        A.shape,
        matvec=lambda v: dinv * np.ravel(v),
        matmat=lambda V: dinv[:, None] * V,
        dtype=float,
    )


def _finish(op: SymmetricOperator, x: np.ndarray, lam: float, resid: float, its: int, gap) -> EigenPair:
    # sign fix: largest-magnitude entry positive, then quadrature normalization
    k = int(np.argmax(np.abs(x)))
    if x[k] < 0:
        x = -x
    x = x / np.sqrt(op.mass_weight * float(x @ x))
    if x.min() < -POSITIVITY_SLACK * x.max():
        raise ConvergenceError("principal eigenvector failed the positivity check", resid)
    return EigenPair(float(lam), GridField(op.grid, x, op.frame), float(resid), int(its), gap)


def smallest_eigenpair(
    op: SymmetricOperator,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> EigenPair:
    """Algebraically smallest eigenpair with ``||Au - lam u|| / ||u|| <= tol |lam|``.

    Parameters
    ----------
    op : SymmetricOperator
        Assembled operator; must be symmetric with positive diagonal.
    tol : float
        Relative residual target.
    max_iter : int
        Budget of matrix-vector products across all inner solves.

    Returns
    -------
    EigenPair
        Eigenvalue, positive quadrature-normalized eigenvector, achieved
        residual, matvec count and a gap estimate from the contraction rate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = op.matrix
    _check_symmetric(A)
    M = _jacobi(A)
    n = A.shape[0]
    x = np.full(n, 1.0 / np.sqrt(n))
    Ax = A @ x
    lam = float(x @ Ax)
    rel = np.linalg.norm(Ax - lam * x) / abs(lam)
    matvecs = 1
    best = rel
    history = []

    def count(_):
        nonlocal matvecs
        matvecs += 1

    while rel > tol:
        if matvecs >= max_iter:
            raise ConvergenceError(f"inverse iteration exceeded {max_iter} matvecs", best)
        inner = max(1e-14, min(1e-3, 1e-2 * rel))
        y, _ = spla.cg(A, x, x0=x / lam, rtol=inner, M=M, maxiter=max_iter - matvecs, callback=count)
        x = y / np.linalg.norm(y)
        Ax = A @ x
        matvecs += 1
        lam = float(x @ Ax)
        new = np.linalg.norm(Ax - lam * x) / abs(lam)
        history.append(new / rel if rel > 0 else 0.0)
        rel = new
        best = min(best, rel)
        if len(history) >= 4 and min(history[-3:]) > SLOW_CONTRACTION and rel > tol:
            log.info("slow inverse iteration (rate %.3f); switching to LOBPCG", history[-1])
            return _lobpcg(op, x, tol, max_iter, matvecs, M)
    gap = None
    if len(history) >= 2 and 0 < history[-1] < 1:
        # residual contracts by about lam1/lam2 per inverse-iteration step
        gap = lam / history[-1] - lam
    return _finish(op, x, lam, rel * abs(lam), matvecs, gap)


def _lobpcg(op, x, tol, max_iter, used, M) -> EigenPair:
    A = op.matrix
    X = np.column_stack([x, _second_start(op)])
    vals, vecs, hist = spla.lobpcg(
        A, X, M=M, tol=tol * abs(float(x @ (A @ x))), maxiter=max(1, (max_iter - used) // 2),
        largest=False, retResidualNormsHistory=True,
    )
    order = np.argsort(vals)
    v = vecs[:, order[0]]
    lam = float(v @ (A @ v) / (v @ v))
    res = np.linalg.norm(A @ v - lam * v) / np.linalg.norm(v)
    if res > tol * abs(lam):
        raise ConvergenceError("LOBPCG did not reach the tolerance", res / abs(lam))
    return _finish(op, v, lam, res, used + 2 * len(hist), float(vals[order[1]] - vals[order[0]]))


def _second_start(op: SymmetricOperator) -> np.ndarray:
    rng = np.random.default_rng(12345)
    return rng.standard_normal(op.size)


def second_eigenvalue(op: SymmetricOperator, first: EigenPair, tol: float = 1e-8, max_iter: int = 5000) -> float:
    """Smallest eigenvalue on the orthogonal complement of ``first.u`` (LOBPCG with a constraint)."""
    A = op.matrix
    Y = first.u.values[:, None] / np.linalg.norm(first.u.values)
    X = _second_start(op)[:, None]
    vals, vecs = spla.lobpcg(
        A, X, Y=Y, M=_jacobi(A), tol=tol * abs(first.lambda_), maxiter=max_iter, largest=False
    )
    v = vecs[:, 0]
    lam2 = float(v @ (A @ v) / (v @ v))
    res = np.linalg.norm(A @ v - lam2 * v) / np.linalg.norm(v)
    if res > 1e3 * tol * abs(lam2):
        raise ConvergenceError("second eigenvalue did not converge", res / abs(lam2))
    if not lam2 > first.lambda_:
        raise ConvergenceError("second eigenvalue not above the first", res / abs(lam2))
    return lam2


def dense_spectrum(op: SymmetricOperator, k: int = 2) -> np.ndarray:
    """Smallest ``k`` eigenvalues by dense diagonalization (small grids only)."""
    from scipy.linalg import eigh

    return eigh(op.matrix.toarray(), eigvals_only=True, subset_by_index=(0, k - 1))


def principal_eigenpair_nonsymmetric(op: NonSymmetricOperator, tol: float = 1e-12, max_iter: int = 500):
    """Principal eigenpair of the drift form by inverse power iteration with a sparse LU.

    Returns ``(lambda, phi)`` with ``phi`` a positive, max-normalized GridField.
    """
    lu = spla.splu(op.matrix.tocsc())
    n = op.matrix.shape[0]
    x = np.full(n, 1.0 / np.sqrt(n))
    lam = np.inf
    for it in range(max_iter):
        y = lu.solve(x)
        x = y / np.linalg.norm(y)
        Ax = op.matrix @ x
        lam = float(x @ Ax)
        if np.linalg.norm(Ax - lam * x) <= tol * abs(lam):
            break
    else:
        raise ConvergenceError("inverse power iteration on the drift form", np.linalg.norm(Ax - lam * x) / abs(lam))
    if x[np.argmax(np.abs(x))] < 0:
        x = -x
    return lam, GridField(op.grid, x / x.max())


def extrapolated_eigenvalue(ops, tol: float = DEFAULT_TOL, max_iter: int = 50 * DEFAULT_MAX_ITER):
    """Romberg-extrapolated smallest eigenvalue over operators on nested grids (coarse to fine).

    Returns ``(value, error_estimate, pairs)``.
    """
    pairs = [smallest_eigenpair(op, tol=tol, max_iter=max_iter) for op in ops]
    lams = [p.lambda_ for p in pairs]
    return romberg(lams), romberg_error_estimate(lams), pairs
