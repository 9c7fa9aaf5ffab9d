"""Domain types: quadratic drift potentials, admissible potentials, boxes, grids.

The drift potential is ``m(x) = a0 + sum_i a_i x_i**2`` with nonzero ``a_i``
summing to zero, so the drift ``grad m`` is divergence free.  Everything here
is immutable once constructed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

DEFAULT_MAX_DIM = 3
SUM_TOLERANCE = 1e-12

PHYSICAL = "physical"
RESCALED = "rescaled"


@dataclass(frozen=True)
class Frame:
    """Coordinate frame of a sampled field: physical ``x`` or ``y = alpha**0.5 x``."""

    kind: str = PHYSICAL
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.kind not in (PHYSICAL, RESCALED):
            raise ValueError(f"unknown frame kind {self.kind!r}")
        if self.kind == RESCALED and (self.alpha is None or self.alpha <= 0):
            raise ValueError("rescaled frame needs a positive alpha")

    @classmethod
    def physical(cls) -> "Frame":
        return cls(PHYSICAL, None)

    @classmethod
    def rescaled(cls, alpha: float) -> "Frame":
        return cls(RESCALED, float(alpha))

    @property
    def is_rescaled(self) -> bool:
        return self.kind == RESCALED


@dataclass(frozen=True)
class DriftSpec:
    """Coefficients of ``m(x) = a0 + sum a_i x_i^2`` with ``sum a_i = 0``.

    The sum constraint is checked to ``SUM_TOLERANCE`` and the last coefficient
    is then re-balanced so that the left-to-right floating point sum is exactly
    zero.
    """

    coeffs: tuple
    a0: float = 0.0
    max_dim: int = field(default=DEFAULT_MAX_DIM, compare=False, repr=False)

    def __post_init__(self):
        a = tuple(float(c) for c in self.coeffs)
        if len(a) < 2:
            raise ValueError("drift needs N >= 2 coefficients (N = 1 cannot sum to zero)")
        if len(a) > self.max_dim:
            raise ValueError(f"dimension {len(a)} exceeds max_dim={self.max_dim}")
        if not all(math.isfinite(c) for c in a) or not math.isfinite(self.a0):
            raise ValueError("drift coefficients must be finite")
        if any(c == 0.0 for c in a):
            raise ValueError("every drift coefficient a_i must be nonzero")
        total = sum(a)
        if abs(total) > SUM_TOLERANCE:
            raise ValueError(f"drift coefficients must sum to zero (sum = {total:g})")
        head = sum(a[:-1])
        a = a[:-1] + (-head,)
        object.__setattr__(self, "coeffs", a)
        object.__setattr__(self, "a0", float(self.a0))

    @property
    def dim(self) -> int:
        return len(self.coeffs)

    @property
    def a(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=float)

    @property
    def mu(self) -> float:
        """Limiting rescaled eigenvalue ``2 sum |a_i|``."""
        return 2.0 * float(np.sum(np.abs(self.a)))


def eval_m(spec: DriftSpec, x) -> np.ndarray:
    """``a0 + sum_i a_i x_i^2``; ``x`` has the coordinate axis last."""
    x = np.asarray(x, dtype=float)
    return spec.a0 + np.sum(spec.a * x**2, axis=-1)


def eval_grad_m(spec: DriftSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return 2.0 * spec.a * x


def eval_laplacian_m(spec: DriftSpec) -> float:
    return 2.0 * float(sum(spec.coeffs))


def check_divergence_free(spec: DriftSpec) -> bool:
    """True iff ``Delta m = 2 sum a_i`` vanishes exactly."""
    return eval_laplacian_m(spec) == 0.0


@dataclass(frozen=True)
class LocalModel:
    """Value, gradient and Hessian of ``V`` at the origin."""

    value_at_origin: float
    gradient_at_origin: tuple
    hessian_at_origin: tuple

    def __post_init__(self):
        g = tuple(float(v) for v in np.ravel(self.gradient_at_origin))
        h = np.asarray(self.hessian_at_origin, dtype=float)
        if h.shape != (len(g), len(g)):
            raise ValueError("hessian_at_origin must be N x N with N = len(gradient)")
        if np.max(np.abs(h - h.T), initial=0.0) > 1e-12:
            raise ValueError("hessian_at_origin must be symmetric")
        object.__setattr__(self, "value_at_origin", float(self.value_at_origin))
        object.__setattr__(self, "gradient_at_origin", g)
        object.__setattr__(self, "hessian_at_origin", tuple(map(tuple, h)))

    @property
    def gradient(self) -> np.ndarray:
        return np.asarray(self.gradient_at_origin)

    @property
    def hessian(self) -> np.ndarray:
        return np.asarray(self.hessian_at_origin)


@dataclass(frozen=True)
class HomogeneousPart:
    """Leading part ``h0`` of ``V`` near the origin, ``h0(t x) = t**k0 h0(x)``."""

    evaluator: Callable
    degree: float
    smooth: bool = True

    def __post_init__(self):
        if not self.degree > 0:
            raise ValueError("homogeneous degree k0 must be positive")

    def __call__(self, x):
        return self.evaluator(np.asarray(x, dtype=float))


def is_homogeneous(h: Callable, degree: float, points, ts=(0.5, 2.0, 3.0), rtol=1e-9) -> bool:
    """Literal check of ``|h(t x) - t^k h(x)| <= rtol (1 + t^k |h(x)|)`` on sample points."""
    x = np.asarray(points, dtype=float)
    hx = np.asarray(h(x), dtype=float)
    for t in ts:
        lhs = np.abs(np.asarray(h(t * x), dtype=float) - t**degree * hx)
        if np.any(lhs > rtol * (1.0 + t**degree * np.abs(hx))):
            return False
    return True


@dataclass(frozen=True)
class PotentialSpec:
    """Nonnegative potential ``V`` with optional analytic data at the origin.

    ``evaluator`` maps an array of points (coordinate axis last) to values.
    The Hölder exponent of ``V`` assumed by the theory has no computational
    role and is not represented.
    """

    evaluator: Callable
    local_model: Optional[LocalModel] = None
    homogeneous_part: Optional[HomogeneousPart] = None
    name: str = "custom"

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(x, dtype=float)), dtype=float)

    def check_nonnegative(self, grid: "Grid") -> bool:
        return bool(np.all(self(grid.points()) >= 0.0))

    def check_homogeneous(self, grid: "Grid") -> bool:
        if self.homogeneous_part is None:
            raise ValueError("potential has no homogeneous part")
        hp = self.homogeneous_part
        return is_homogeneous(hp.evaluator, hp.degree, grid.points())

    def resolved_local_model(self, box: Optional["BoxDomain"] = None, dim: Optional[int] = None) -> LocalModel:
        """Analytic local model if present, else Richardson-extrapolated differences.

        The finite-difference step is ``1e-4`` times the smallest box width.
        """
        if self.local_model is not None:
            return self.local_model
        if box is None:
            raise ValueError("no analytic local model; a box is needed to pick a difference step")
        step = 1e-4 * float(np.min(box.widths))
        return finite_difference_local_model(self, box.dim if dim is None else dim, step)


def finite_difference_local_model(V: Callable, dim: int, step: float) -> LocalModel:
    """Value, gradient and Hessian at 0 from central differences at ``step`` and ``step/2``.

    One Richardson step removes the ``O(step^2)`` term of each difference.
    """

    def at(p):
        return float(np.asarray(V(np.asarray(p, dtype=float)[None, :]))[0])

    def derivs(h):
        e = np.eye(dim) * h
        f0 = at(np.zeros(dim))
        g = np.array([(at(e[i]) - at(-e[i])) / (2 * h) for i in range(dim)])
        H = np.empty((dim, dim))
        for i in range(dim):
            H[i, i] = (at(e[i]) - 2 * f0 + at(-e[i])) / h**2
            for j in range(i + 1, dim):
                H[i, j] = H[j, i] = (
                    at(e[i] + e[j]) - at(e[i] - e[j]) - at(-e[i] + e[j]) + at(-e[i] - e[j])
                ) / (4 * h * h)
        return f0, g, H

    f0, g1, H1 = derivs(step)
    _, g2, H2 = derivs(step / 2)
    g = (4 * g2 - g1) / 3
    H = (4 * H2 - H1) / 3
    H = 0.5 * (H + H.T)
    return LocalModel(f0, tuple(g), tuple(map(tuple, H)))


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box ``[lo, hi]`` with the origin strictly inside."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi) or not lo:
            raise ValueError("lo and hi must have the same positive length")
        if not all(l < 0.0 < h for l, h in zip(lo, hi)):
            raise ValueError("the origin must be an interior point of the box")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, radius: float, dim: int) -> "BoxDomain":
        return cls((-radius,) * dim, (radius,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def widths(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= np.asarray(self.lo)) & (x <= np.asarray(self.hi)), axis=-1)


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid of interior points; boundary nodes carry Dirichlet zeros."""

    box: BoxDomain
    points_per_axis: tuple

    def __post_init__(self):
        n = tuple(int(k) for k in np.broadcast_to(self.points_per_axis, (self.box.dim,)))
        if any(k < 3 for k in n):
            raise ValueError("grid too coarse: need at least 3 interior points per axis")
        object.__setattr__(self, "points_per_axis", n)

    @classmethod
    def uniform(cls, box: BoxDomain, n) -> "Grid":
        if np.ndim(n) == 0:
            n = (n,) * box.dim
        return cls(box, tuple(n))

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def shape(self) -> tuple:
        return self.points_per_axis

    @property
    def size(self) -> int:
        return int(np.prod(self.points_per_axis))

    @property
    def spacing(self) -> np.ndarray:
        return self.box.widths / (np.asarray(self.points_per_axis) + 1)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axes(self) -> list:
        """Interior node coordinates along each axis."""
        return [
            lo + h * np.arange(1, n + 1)
            for lo, h, n in zip(self.box.lo, self.spacing, self.points_per_axis)
        ]

    def axes_with_boundary(self) -> list:
        return [
            lo + h * np.arange(0, n + 2)
            for lo, h, n in zip(self.box.lo, self.spacing, self.points_per_axis)
        ]

    def mesh(self) -> list:
        return np.meshgrid(*self.axes(), indexing="ij")

    def points(self) -> np.ndarray:
        """All interior points, shape ``(size, N)``, lexicographic (last axis fastest)."""
        return np.stack([c.ravel() for c in self.mesh()], axis=-1)

    def coarsened(self) -> "Grid":
        """Grid with doubled spacing on the same box; needs odd point counts."""
        if any(n % 2 == 0 for n in self.points_per_axis):
            raise ValueError("coarsening needs odd interior point counts (n = 2^k - 1 style)")
        return Grid(self.box, tuple((n - 1) // 2 for n in self.points_per_axis))


@dataclass(frozen=True, eq=False)
class GridField:
    """Real values on the interior nodes of ``grid`` (flat, lexicographic)."""

    grid: Grid
    values: np.ndarray
    frame: Frame = Frame()

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} values, got {v.size}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def sample(cls, grid: Grid, f: Callable, frame: Frame = Frame()) -> "GridField":
        return cls(grid, np.asarray(f(grid.points()), dtype=float), frame)

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def with_boundary(self) -> np.ndarray:
        """Values padded with the Dirichlet zeros on the boundary nodes."""
        return np.pad(self.as_array(), 1)

    def l2_norm(self) -> float:
        return float(np.sqrt(self.grid.cell_volume * np.dot(self.values, self.values)))

    def normalized(self) -> "GridField":
        return GridField(self.grid, self.values / self.l2_norm(), self.frame)

    def inner(self, other: "GridField") -> float:
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")
        return float(self.grid.cell_volume * np.dot(self.values, other.values))


def as_points(x: Sequence[float]) -> np.ndarray:
    return np.atleast_2d(np.asarray(x, dtype=float))
