"""Large-alpha expansions of the principal eigenpair and their numerical checks.

Eigenvalue expansions are ordered lists of ``(power, coefficient)`` pairs in
``alpha``; partial sums are compared against rescaled-frame finite-difference
eigenvalues extrapolated over nested grids.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.stats import linregress

from .eigensolver import DEFAULT_TOL, EigenPair, smallest_eigenpair
from .limit import (
    CorrectionSet,
    LimitPair,
    gaussian_moment,
    multi_indices,
    solve_corrections,
)
from .model import BoxDomain, DriftSpec, Frame, Grid, GridField, PotentialSpec
from .operator import SymmetricOperator, assemble_symmetric, shifted_oscillator
from .richardson import romberg, romberg_error_estimate

SMOOTH = "smooth"
HOMOGENEOUS = "homogeneous"

DEFAULT_LADDER = (25.0, 50.0, 100.0, 200.0, 400.0)
DEFAULT_LEVELS = {2: (63, 127, 255), 3: (23, 47, 95)}
RESCALED_RADIUS_FACTOR = 8.0


class ResidualFloorError(ValueError):
    """Too few residuals above the numerical floor for an order fit."""


class BoundaryMaximumError(RuntimeError):
    """Grid argmax on the boundary layer: concentration not resolved."""


@dataclass(frozen=True)
class EigenvalueExpansion:
    kind: str
    coefficients: tuple  # ((power, value), ...) with strictly decreasing powers

    def __post_init__(self):
        if self.kind not in (SMOOTH, HOMOGENEOUS):
            raise ValueError(f"unknown expansion kind {self.kind!r}")
        powers = [p for p, _ in self.coefficients]
        if any(b >= a for a, b in zip(powers, powers[1:])):
            raise ValueError("expansion powers must be strictly decreasing")
        if not (powers and powers[0] == 1 and self.coefficients[0][1] > 0):
            raise ValueError("leading term must be mu * alpha with mu > 0")

    @property
    def order(self) -> int:
        return len(self.coefficients)

    @property
    def mu(self) -> float:
        return self.coefficients[0][1]


def smooth_expansion(V: PotentialSpec, limit: LimitPair, box: Optional[BoxDomain] = None) -> EigenvalueExpansion:
    """``mu alpha + V(0) + alpha^-1/2 int (x.gradV(0)) Q^2 + alpha^-1 sum_{|tau|=2} D^tau V(0)/tau! int x^tau Q^2``."""
    drift, eps = limit.drift, limit.eps
    lm = V.resolved_local_model(box, drift.dim)
    g, H = lm.gradient, lm.hessian
    c_half = sum(g[i] * gaussian_moment(drift, eps, tau) for i, tau in enumerate(multi_indices(drift.dim, 1)))
    c_one = 0.0
    for tau in multi_indices(drift.dim, 2):
        idx = [i for i, t in enumerate(tau) for _ in range(t)]
        fact = math.prod(math.factorial(t) for t in tau)
        c_one += H[idx[0], idx[1]] / fact * gaussian_moment(drift, eps, tau)
    coeffs = ((1.0, limit.mu), (0.0, float(lm.value_at_origin)), (-0.5, float(c_half)), (-1.0, float(c_one)))
    return EigenvalueExpansion(SMOOTH, coeffs)


def homogeneous_expansion(
    V: PotentialSpec, limit: LimitPair, corrections: Optional[CorrectionSet] = None
) -> EigenvalueExpansion:
    """``mu alpha + alpha^(-k0/2) int h0 Q^2 + alpha^(-k0-1) int h0 phi3 Q``."""
    hp = V.homogeneous_part
    if hp is None:
        raise ValueError("potential has no homogeneous part")
    if corrections is None or corrections.phi3 is None:
        corrections = solve_corrections(V, limit, which=("phi3",))
    basis = corrections.basis
    x = basis.nodes()
    Q = limit.Q(x)
    h0 = hp(x)
    c1 = basis.integrate(h0 * Q**2)
    c2 = basis.integrate(h0 * basis.synthesize(corrections.phi3) * Q)
    k0 = hp.degree
    return EigenvalueExpansion(HOMOGENEOUS, ((1.0, limit.mu), (-k0 / 2, c1), (-k0 - 1, c2)))


def default_expansion(V: PotentialSpec, limit: LimitPair) -> EigenvalueExpansion:
    """Smooth kind when local data exist, homogeneous otherwise."""
    if V.local_model is not None:
        return smooth_expansion(V, limit)
    if V.homogeneous_part is not None:
        return homogeneous_expansion(V, limit)
    raise ValueError("potential has neither local data at the origin nor a homogeneous part")


def predict_lambda(exp: EigenvalueExpansion, alpha: float, order: int) -> float:
    """Partial sum ``sum c_p alpha^p`` over the first ``order`` terms."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if not 1 <= order <= exp.order:
        raise ValueError(f"order must be in 1..{exp.order}")
    return float(sum(c * alpha**p for p, c in exp.coefficients[:order]))


def partial_sums(exp: EigenvalueExpansion, alpha: float) -> list:
    return [predict_lambda(exp, alpha, k) for k in range(1, exp.order + 1)]


@dataclass(frozen=True, eq=False)
class EigenfunctionExpansion:
    kind: str
    limit: LimitPair
    corrections: CorrectionSet
    degree: Optional[float] = None  # k0 for the homogeneous kind

    def evaluate(self, alpha: float, x) -> np.ndarray:
        """``Q + a^-3/2 phi1 + a^-2 phi2`` or ``Q + a^-(k0+2)/2 phi3 + a^-(k0+2) [phi4 - (int phi3^2)/2 Q]``."""
        x = np.asarray(x, dtype=float)
        c = self.corrections
        out = self.limit.Q(x)
        if self.kind == SMOOTH:
            if c.phi1 is not None:
                out = out + alpha**-1.5 * c.evaluate("phi1", x)
            if c.phi2 is not None:
                out = out + alpha**-2 * c.evaluate("phi2", x)
            return out
        k0 = self.degree
        out = out + alpha ** (-(k0 + 2) / 2) * c.evaluate("phi3", x)
        if c.phi4 is not None:
            norm3 = float(np.sum(c.phi3**2))
            out = out + alpha ** (-k0 - 2) * (c.evaluate("phi4", x) - 0.5 * norm3 * self.limit.Q(x))
        return out

    def terms(self) -> list:
        """Names of the terms that must be Q-orthogonal."""
        return [name for name, _ in self.corrections.items()]


@dataclass(frozen=True)
class SweepRecord:
    alpha: float
    lambda_numeric: float
    lambda_predicted_partial_sums: tuple
    rescaled_sup_error: float
    d_alpha: tuple
    scaled_max_drift: float
    max_count: int
    boundary_tail_mass: float
    pohozaev_residual: float
    lambda_error: float = 0.0
    correction_error: Optional[float] = None
    converged: bool = True
    message: str = ""

    def __post_init__(self):
        if self.converged:
            if self.lambda_numeric < 0:
                raise ValueError("lambda_numeric must be nonnegative")
            if not 0.0 <= self.boundary_tail_mass <= 1.0:
                raise ValueError("boundary_tail_mass must lie in [0, 1]")

    def residual(self, order: int) -> float:
        return abs(self.lambda_numeric - self.lambda_predicted_partial_sums[order - 1])


def rescaled_radius(drift: DriftSpec, eps: float) -> float:
    """``R = 8 max_j sqrt(eps / (4 |a_j|))``."""
    return RESCALED_RADIUS_FACTOR * float(np.max(np.sqrt(eps / (4 * np.abs(drift.a)))))


def rescale_eigenfunction(u: GridField, alpha: float, center="origin", target: Optional[Grid] = None) -> GridField:
    """``w(y) = alpha^(-N/4) u(alpha^(-1/2) y + c)`` by multilinear interpolation.

    ``center`` is ``"origin"``, ``"argmax"`` or an explicit point.  The target
    grid defaults to the image of the physical grid under ``y = alpha^(1/2)(x - c)``.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if u.frame.is_rescaled:
        raise ValueError("input field must be in the physical frame")
    grid = u.grid
    if isinstance(center, str):
        if center == "origin":
            c = np.zeros(grid.dim)
        elif center == "argmax":
            c = np.asarray(track_max_point(u, 1.0)[0])
        else:
            raise ValueError(f"unknown center {center!r}")
    else:
        c = np.asarray(center, dtype=float)
    s = np.sqrt(alpha)
    if target is None:
        lo = tuple(s * (np.asarray(grid.box.lo) - c))
        hi = tuple(s * (np.asarray(grid.box.hi) - c))
        target = Grid(BoxDomain(lo, hi), grid.points_per_axis)
    x = target.points() / s + c
    lo, hi = np.asarray(grid.box.lo), np.asarray(grid.box.hi)
    tol = 1e-12 * np.max(hi - lo)
    if np.any(x < lo - tol) or np.any(x > hi + tol):
        raise ValueError("target grid exits the physical box")
    interp = RegularGridInterpolator(grid.axes_with_boundary(), u.with_boundary(), method="linear")
    vals = alpha ** (-grid.dim / 4) * interp(np.clip(x, lo, hi))
    return GridField(target, vals, Frame.rescaled(alpha))


def _strict_local_maxima(arr: np.ndarray, floor: float) -> int:
    padded = np.pad(arr, 1, constant_values=-np.inf)
    is_max = arr >= floor
    for shift in np.ndindex(*(3,) * arr.ndim):
        if all(s == 1 for s in shift):
            continue
        sl = tuple(slice(s, s + n) for s, n in zip(shift, arr.shape))
        is_max &= arr > padded[sl]
    return int(np.count_nonzero(is_max))


def track_max_point(u: GridField, alpha: float, floor: float = 1e-8):
    """Refined maximum point ``d_alpha`` (physical coordinates), ``alpha^(1/2) |d_alpha|`` and the strict local max count.

    The grid argmax is refined by a least-squares quadratic fit of ``log u``
    over its ``3^N`` neighborhood.  Local maxima are counted among nodes with
    ``u >= floor * max u``.
    """
    arr = u.as_array()
    idx = np.unravel_index(int(np.argmax(arr)), arr.shape)
    if any(i == 0 or i == n - 1 for i, n in zip(idx, arr.shape)):
        raise BoundaryMaximumError("argmax on the boundary layer: unresolved concentration")
    h = u.grid.spacing
    axes = u.grid.axes()
    x0 = np.array([ax[i] for ax, i in zip(axes, idx)])
    offs = np.array(list(np.ndindex(*(3,) * arr.ndim))) - 1
    vals = np.array([arr[tuple(np.asarray(idx) + o)] for o in offs])
    z = offs * h
    dim = arr.ndim
    cols = [np.ones(len(z))] + [z[:, j] for j in range(dim)]
    pairs = [(i, j) for i in range(dim) for j in range(i, dim)]
    cols += [z[:, i] * z[:, j] for i, j in pairs]
    if np.all(vals > 0):
        coef, *_ = np.linalg.lstsq(np.column_stack(cols), np.log(vals), rcond=None)
        g = coef[1 : dim + 1]
        Hm = np.zeros((dim, dim))
        for (i, j), c in zip(pairs, coef[dim + 1 :]):
            Hm[i, j] += c if i != j else 2 * c
            if i != j:
                Hm[j, i] += c
        try:
            step = -np.linalg.solve(Hm, g)
        except np.linalg.LinAlgError:
            step = np.zeros(dim)
        # keep the refinement inside the neighborhood
        if np.any(np.abs(step) > h):
            step = np.zeros(dim)
    else:
        step = np.zeros(dim)
    d = x0 + step
    if u.frame.is_rescaled:
        d = d / np.sqrt(u.frame.alpha)
    count = _strict_local_maxima(arr, floor * arr.max())
    return tuple(float(v) for v in d), float(np.sqrt(alpha) * np.linalg.norm(d)), count


def pohozaev_projection(op: SymmetricOperator, w: GridField, limit: LimitPair, radius: float) -> float:
    """Quadrature of ``(Nop (w - Q)) Q`` over the ball ``|y| <= radius``.

    ``Nop Q = 0`` holds exactly, so only the discrete ``Nop_h w`` is formed.
    """
    if not op.frame.is_rescaled:
        raise ValueError("Pohozaev projection needs a rescaled-frame operator")
    if w.grid != op.grid:
        raise ValueError("field and operator live on different grids")
    box = op.grid.box
    if radius > min(min(-np.asarray(box.lo)), min(box.hi)):
        raise ValueError("radius exceeds the rescaled box")
    N = shifted_oscillator(limit.drift, op.grid, op.eps)
    y = op.grid.points()
    ball = np.linalg.norm(y, axis=-1) <= radius
    Nw = N @ w.values
    return float(op.grid.cell_volume * np.sum(Nw[ball] * limit.Q(y[ball])))


def boundary_tail_mass(w: GridField, fraction: float = 0.5) -> float:
    """Share of ``int w^2`` outside the centered sub-box scaled by ``fraction``."""
    y = w.grid.points()
    lo, hi = np.asarray(w.grid.box.lo), np.asarray(w.grid.box.hi)
    inner = np.all((y >= fraction * lo) & (y <= fraction * hi), axis=-1)
    v2 = w.values**2
    total = float(v2.sum())
    return float(min(1.0, max(0.0, v2[~inner].sum() / total))) if total > 0 else 0.0


def fit_residual_order(
    records: Sequence[SweepRecord], order: int, solver_tol: float = DEFAULT_TOL, floor_factor: float = 1e-9
):
    """Log-log slope of ``|lambda_numeric - S_order|`` against alpha.

    Only records whose residual exceeds ``max(floor_factor, 10 * solver_tol) * lambda``
    are used; at least four distinct alphas must remain.
    Returns ``(slope, r_squared, alphas_used)``.
    """
    pts = []
    for r in records:
        if not r.converged:
            continue
        res = r.residual(order)
        if res > residual_floor(r, solver_tol, floor_factor):
            pts.append((r.alpha, res))
    alphas = sorted({a for a, _ in pts})
    if len(alphas) < 4:
        raise ResidualFloorError(
            f"expansion exact to solver precision at this order ({len(alphas)} residuals above the floor)"
        )
    a, res = np.array(pts).T
    fit = linregress(np.log(a), np.log(res))
    return float(fit.slope), float(fit.rvalue**2), tuple(float(v) for v in alphas)


def residual_floor(record: SweepRecord, solver_tol: float = DEFAULT_TOL, floor_factor: float = 1e-9) -> float:
    return max(floor_factor, 10.0 * solver_tol) * abs(record.lambda_numeric)


@dataclass(frozen=True, eq=False)
class AlphaSolution:
    """Rescaled-frame solves at one alpha on nested grids (coarse to fine)."""

    alpha: float
    lambda_numeric: float
    lambda_error: float
    pairs: tuple
    operators: tuple

    @property
    def finest(self) -> EigenPair:
        return self.pairs[-1]

    @property
    def finest_operator(self) -> SymmetricOperator:
        return self.operators[-1]


def solve_rescaled(
    drift: DriftSpec,
    V: PotentialSpec,
    eps: float,
    alpha: float,
    radius: Optional[float] = None,
    levels: Optional[Sequence[int]] = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = 50_000,
) -> AlphaSolution:
    """``lambda_alpha`` from Romberg extrapolation of rescaled-frame eigenvalues.

    ``levels`` are interior point counts ``2^k - 1`` so that spacing halves
    exactly; a single level gives the plain grid value.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    R = rescaled_radius(drift, eps) if radius is None else float(radius)
    levels = tuple(DEFAULT_LEVELS.get(drift.dim, (63, 127, 255)) if levels is None else levels)
    box = BoxDomain.cube(R, drift.dim)
    frame = Frame.rescaled(alpha)
    ops, pairs = [], []
    for n in levels:
        op = assemble_symmetric(drift, V, Grid.uniform(box, n), eps, alpha, frame)
        ops.append(op)
        pairs.append(smallest_eigenpair(op, tol=tol, max_iter=max_iter))
    lams = [p.lambda_ for p in pairs]
    if len(levels) > 1:
        ratio = (levels[1] + 1) / (levels[0] + 1)
        val = romberg(lams, ratio=ratio)
        err = romberg_error_estimate(lams, ratio=ratio)
    else:
        val, err = lams[0], abs(lams[0]) * tol
    return AlphaSolution(float(alpha), alpha * val, alpha * err, tuple(pairs), tuple(ops))


def sweep_point(
    drift: DriftSpec,
    V: PotentialSpec,
    eps: float,
    alpha: float,
    expansion: EigenvalueExpansion,
    radius: Optional[float] = None,
    levels: Optional[Sequence[int]] = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = 50_000,
    correction: Optional[tuple] = None,
) -> SweepRecord:
    """One ``SweepRecord``.

    ``correction`` optionally is ``(reference_values, power, phi_values)``:
    the error ``||alpha^power (w - reference) - phi||_inf`` is then recorded.
    """
    limit_pair = _limit(drift, eps)
    sol = solve_rescaled(drift, V, eps, alpha, radius, levels, tol, max_iter)
    w = sol.finest.u
    y = w.grid.points()
    sup_err = float(np.max(np.abs(w.values - limit_pair.Q(y))))
    d, scaled, count = track_max_point(w, alpha)
    R = float(w.grid.box.hi[0])
    poho = pohozaev_projection(sol.finest_operator, w, limit_pair, 0.5 * R)
    corr = None
    if correction is not None:
        ref, power, phi = correction
        corr = float(np.max(np.abs(alpha**power * (w.values - ref) - phi)))
    return SweepRecord(
        alpha=float(alpha),
        lambda_numeric=sol.lambda_numeric,
        lambda_predicted_partial_sums=tuple(partial_sums(expansion, alpha)),
        rescaled_sup_error=sup_err,
        d_alpha=d,
        scaled_max_drift=scaled,
        max_count=count,
        boundary_tail_mass=boundary_tail_mass(w),
        pohozaev_residual=poho,
        lambda_error=sol.lambda_error,
        correction_error=corr,
    )


def failed_record(alpha: float, message: str, n_sums: int) -> SweepRecord:
    nan = float("nan")
    return SweepRecord(
        float(alpha), nan, (nan,) * n_sums, nan, (nan,), nan, 0, nan, nan, nan, None, False, message
    )


def _limit(drift: DriftSpec, eps: float) -> LimitPair:
    from .limit import closed_form_limit

    return closed_form_limit(drift, eps)


def correction_reference(
    drift: DriftSpec,
    V: PotentialSpec,
    eps: float,
    radius: Optional[float] = None,
    n: Optional[int] = None,
    tol: float = DEFAULT_TOL,
):
    """``(Q_h, power, phi)`` for the eigenfunction-correction trend check.

    ``Q_h`` is the discrete ``V = 0`` eigenvector on the same grid, which
    cancels the leading discretization error of ``w - Q``.  Only the smooth
    kind with ``gradV(0) != 0`` is supported (power ``3/2``, ``phi = phi1``).
    """
    from .potentials import zero

    limit_pair = _limit(drift, eps)
    R = rescaled_radius(drift, eps) if radius is None else radius
    n = DEFAULT_LEVELS.get(drift.dim, (255,))[-1] if n is None else n
    grid = Grid.uniform(BoxDomain.cube(R, drift.dim), n)
    op = assemble_symmetric(drift, zero(drift.dim), grid, eps, 1.0, Frame.rescaled(1.0))
    Qh = smallest_eigenpair(op, tol=tol, max_iter=50_000).u.values
    corr = solve_corrections(V, limit_pair, which=("phi1",))
    phi1 = corr.evaluate("phi1", grid.points())
    return Qh, 1.5, phi1


def run_sweep(
    drift: DriftSpec,
    V: PotentialSpec,
    eps: float,
    ladder: Sequence[float] = DEFAULT_LADDER,
    expansion: Optional[EigenvalueExpansion] = None,
    radius: Optional[float] = None,
    levels: Optional[Sequence[int]] = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = 50_000,
    with_correction: bool = False,
    workers: int = 1,
) -> list:
    """Records for every alpha, ordered by alpha; solver failures give ``converged=False`` records."""
    from .eigensolver import ConvergenceError

    limit_pair = _limit(drift, eps)
    expansion = default_expansion(V, limit_pair) if expansion is None else expansion
    correction = correction_reference(drift, V, eps, radius, (levels or [None])[-1], tol) if with_correction else None
    args = [(drift, V, eps, a, expansion, radius, levels, tol, max_iter, correction) for a in sorted(ladder)]
    records = []
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(sweep_point, *a) for a in args]
            for a, fut in zip(args, futures):
                try:
                    records.append(fut.result())
                except (ConvergenceError, BoundaryMaximumError) as exc:
                    records.append(failed_record(a[3], str(exc), expansion.order))
    else:
        for a in args:
            try:
                records.append(sweep_point(*a))
            except (ConvergenceError, BoundaryMaximumError) as exc:
                records.append(failed_record(a[3], str(exc), expansion.order))
    return records


CSV_COLUMNS = (
    "alpha",
    "lambda_numeric",
    "S1",
    "S2",
    "S3",
    "S4",
    "sup_error",
    "scaled_max_drift",
    "max_count",
    "tail_mass",
    "pohozaev",
)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "nan" if math.isnan(v) else f"{v:.11e}"


def records_to_csv(records: Sequence[SweepRecord]) -> str:
    """Stable CSV text: fixed column order, 12 significant digits, ``nan`` for absent sums."""
    lines = [",".join(CSV_COLUMNS)]
    for r in records:
        sums = list(r.lambda_predicted_partial_sums)[:4]
        sums += [float("nan")] * (4 - len(sums))
        row = [r.alpha, r.lambda_numeric, *sums, r.rescaled_sup_error, r.scaled_max_drift, r.max_count,
               r.boundary_tail_mass, r.pohozaev_residual]
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def convergence_to_mu(records: Sequence[SweepRecord], mu: float) -> list:
    """``|lambda_numeric / alpha - mu|`` per record."""
    return [abs(r.lambda_numeric / r.alpha - mu) for r in records]


def partial_sums_monotone(record: SweepRecord, floor: Optional[float] = None) -> bool:
    """``|lambda - S_k|`` non-increasing in ``k`` until it reaches the floor."""
    floor = residual_floor(record) if floor is None else floor
    res = [record.residual(k) for k in range(1, len(record.lambda_predicted_partial_sums) + 1)]
    for a, b in zip(res, res[1:]):
        if a <= floor and b <= floor:
            continue
        if b > a and b > floor:
            return False
    return True


def non_increasing(values, rel_slack: float = 1e-12) -> bool:
    return all(b <= a + rel_slack * max(abs(a), abs(b)) for a, b in zip(values, values[1:]))


def strictly_decreasing(values) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))
