"""Named potential presets and a table-sampled escape hatch."""
from __future__ import annotations

from functools import partial
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .model import HomogeneousPart, LocalModel, PotentialSpec

PRESETS = ("zero", "quadratic", "linear+quadratic", "homogeneous-power", "shifted-quadratic", "table")


def _zero(x):
    return np.zeros(np.shape(x)[:-1])


def _quadratic_form(H, x):
    return np.einsum("...i,ij,...j->...", x, H, x)


def _linear_quadratic(offset, g, H, x):
    return np.maximum(offset + x @ g + _quadratic_form(H, x), 0.0)


def _radial_power(scale, k, x):
    return scale * np.linalg.norm(x, axis=-1) ** k


def _axis_power(weights, k, x):
    return np.abs(x) ** k @ weights


def _shifted(offset, weights, center, x):
    return offset + (x - center) ** 2 @ weights


def zero(dim: int) -> PotentialSpec:
    """``V = 0``."""
    return PotentialSpec(
        _zero,
        LocalModel(0.0, (0.0,) * dim, np.zeros((dim, dim))),
        None,
        name="zero",
    )


def quadratic(dim: int, matrix=None, offset: float = 0.0) -> PotentialSpec:
    """``V = offset + x . H x`` with ``H`` symmetric positive semidefinite (identity by default).

    With ``offset == 0`` the potential is its own homogeneous part of degree 2.
    """
    H = np.eye(dim) if matrix is None else np.asarray(matrix, dtype=float)
    if H.shape != (dim, dim) or np.max(np.abs(H - H.T)) > 1e-12:
        raise ValueError("quadratic matrix must be symmetric N x N")
    if np.linalg.eigvalsh(H).min() < -1e-12 or offset < 0:
        raise ValueError("quadratic preset must be nonnegative (H >= 0, offset >= 0)")
    f = partial(_linear_quadratic, float(offset), np.zeros(dim), H)
    hom = None
    if offset == 0.0 and np.linalg.eigvalsh(H).min() > 0:
        hom = HomogeneousPart(partial(_quadratic_form, H), 2.0)
    return PotentialSpec(f, LocalModel(offset, (0.0,) * dim, 2 * H), hom, name="quadratic")


def linear_quadratic(dim: int, gradient, matrix=None, offset: float = 0.0) -> PotentialSpec:
    """``V = max(0, offset + g . x + x . H x)``.

    The clamp keeps ``V`` admissible away from the origin; for ``offset > 0`` it
    is inactive near 0 so the local model is exact there.
    """
    g = np.asarray(gradient, dtype=float)
    H = np.zeros((dim, dim)) if matrix is None else np.asarray(matrix, dtype=float)
    if g.shape != (dim,) or H.shape != (dim, dim):
        raise ValueError("gradient must have N entries and matrix be N x N")
    f = partial(_linear_quadratic, float(offset), g, H)
    return PotentialSpec(f, LocalModel(offset, g, 2 * H), None, name="linear+quadratic")


def homogeneous_power(dim: int, power: float, scale: float = 1.0, weights=None) -> PotentialSpec:
    """``scale * |x|**power``, or ``sum_j w_j |x_j|**power`` when ``weights`` is given.

    Only ``power == 2`` carries an analytic local model; other powers are
    non-smooth at the origin (odd or non-integer) or have vanishing Hessian.
    """
    k = float(power)
    if k <= 0 or scale < 0:
        raise ValueError("homogeneous-power needs power > 0 and scale >= 0")
    if weights is None:
        f = partial(_radial_power, float(scale), k)
        hess = 2 * scale * np.eye(dim)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (dim,) or np.any(w < 0):
            raise ValueError("weights must be N nonnegative numbers")
        f = partial(_axis_power, w, k)
        hess = 2 * np.diag(w)
    smooth = k == 2.0 or (weights is not None and k.is_integer() and k % 2 == 0)
    local = LocalModel(0.0, (0.0,) * dim, hess) if k == 2.0 else None
    return PotentialSpec(f, local, HomogeneousPart(f, k, smooth=smooth), name="homogeneous-power")


def shifted_quadratic(dim: int, center, weights=None, offset: float = 0.0) -> PotentialSpec:
    """``V = offset + sum_j w_j (x_j - c_j)**2`` (minimum at ``c``, value ``offset``)."""
    c = np.asarray(center, dtype=float)
    w = np.ones(dim) if weights is None else np.asarray(weights, dtype=float)
    if c.shape != (dim,) or w.shape != (dim,) or np.any(w < 0) or offset < 0:
        raise ValueError("shifted-quadratic needs N-vectors center/weights, weights >= 0, offset >= 0")
    f = partial(_shifted, float(offset), w, c)
    local = LocalModel(offset + float(w @ c**2), -2 * w * c, 2 * np.diag(w))
    hom = None
    if offset == 0.0 and not np.any(c) and np.all(w > 0):
        hom = HomogeneousPart(partial(_quadratic_form, np.diag(w)), 2.0)
    return PotentialSpec(f, local, hom, name="shifted-quadratic")


def from_table(path) -> PotentialSpec:
    """Potential sampled on a tensor grid, multilinearly interpolated.

    The file is whitespace-separated text, one row ``x_1 ... x_N V`` per node
    of a full tensor grid (any row order).  Points outside the table are
    clamped to the nearest table value.  No local model is attached; it is
    obtained by finite differences when needed.
    """
    data = np.loadtxt(Path(path), ndmin=2)
    dim = data.shape[1] - 1
    axes = [np.unique(data[:, j]) for j in range(dim)]
    if np.prod([len(a) for a in axes]) != len(data):
        raise ValueError(f"{path}: rows do not form a full tensor grid")
    values = np.empty([len(a) for a in axes])
    idx = tuple(np.searchsorted(a, data[:, j]) for j, a in enumerate(axes))
    values[idx] = data[:, -1]
    if np.any(values < 0):
        raise ValueError(f"{path}: potential must be nonnegative")
    interp = RegularGridInterpolator(axes, values, method="linear", bounds_error=False, fill_value=None)
    lo = np.array([a[0] for a in axes])
    hi = np.array([a[-1] for a in axes])
    return PotentialSpec(partial(_table_eval, interp, lo, hi), None, None, name="table")


def _table_eval(interp, lo, hi, x):
    x = np.asarray(x, dtype=float)
    flat = np.clip(x.reshape(-1, x.shape[-1]), lo, hi)
    return interp(flat).reshape(x.shape[:-1])
