"""Limiting problem: the Gaussian ground state and the correction equations.

The limiting operator ``-eps Lap + (4/eps) sum a_i^2 x_i^2`` is a separable
harmonic oscillator with ground energy ``mu = 2 sum |a_i|`` and ground state

    Q(x) = prod_i (2|a_i| / (eps pi))^(1/4) exp(-|a_i| x_i^2 / eps).

The shifted operator ``Nop = oscillator - mu`` is diagonal in the tensor
Hermite-function basis with scale ``beta_j = sqrt(2|a_j| / eps)``:
``Nop psi_n = 4 sum_j |a_j| n_j psi_n``.  Correction equations
``Nop phi = F, <phi, Q> = 0`` are therefore solved coefficientwise.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import roots_hermite

from .model import DriftSpec, PotentialSpec

MAX_BASIS_DEGREE = 200
DEFAULT_DEGREE = 40
NONPOLYNOMIAL_DEGREE = 80


class SolvabilityError(ValueError):
    """Right-hand side is not orthogonal to the kernel ``span{Q}``."""


class MissingLocalDataError(ValueError):
    """Local data required by a right-hand side is absent."""


class TruncationError(ValueError):
    """Hermite truncation does not resolve the right-hand side."""


@dataclass(frozen=True)
class LimitPair:
    drift: DriftSpec
    eps: float
    mu: float
    sigma: tuple

    @property
    def Q0(self) -> float:
        return float(np.prod(2 * np.abs(self.drift.a) / (self.eps * np.pi)) ** 0.25)

    def Q(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.Q0 * np.exp(-np.sum(np.abs(self.drift.a) * x**2, axis=-1) / self.eps)


def closed_form_limit(drift: DriftSpec, eps: float) -> LimitPair:
    if eps <= 0:
        raise ValueError("eps must be positive")
    sigma = tuple(float(s) for s in np.sqrt(eps / (4 * np.abs(drift.a))))
    return LimitPair(drift, float(eps), drift.mu, sigma)


def _double_factorial(k: int) -> int:
    return math.prod(range(k, 0, -2)) if k > 0 else 1


def gaussian_moment(drift: DriftSpec, eps: float, tau) -> float:
    """``int x^tau Q^2 dx``; ``Q^2`` is a centered Gaussian with variances ``eps / (4|a_j|)``."""
    tau = tuple(int(t) for t in tau)
    if len(tau) != drift.dim or any(t < 0 for t in tau):
        raise ValueError("tau must be a multi-index of length N")
    if sum(tau) > 4:
        raise ValueError("moments are only supported for |tau| <= 4")
    var = eps / (4 * np.abs(drift.a))
    out = 1.0
    for t, v in zip(tau, var):
        if t % 2:
            return 0.0
        out *= _double_factorial(t - 1) * v ** (t // 2)
    return float(out)


def multi_indices(dim: int, order: int):
    """All multi-indices of length ``dim`` with ``|tau| == order``."""
    for combo in itertools.combinations_with_replacement(range(dim), order):
        tau = [0] * dim
        for i in combo:
            tau[i] += 1
        yield tuple(tau)


def hermite_functions(t, degree: int) -> np.ndarray:
    """Orthonormal Hermite functions ``h_0..h_degree`` at ``t``; shape ``t.shape + (degree+1,)``.

    Three-term recurrence on the normalized functions; no raw polynomials.
    """
    t = np.asarray(t, dtype=float)
    out = np.empty(t.shape + (degree + 1,))
    out[..., 0] = np.pi**-0.25 * np.exp(-0.5 * t**2)
    if degree >= 1:
        out[..., 1] = np.sqrt(2.0) * t * out[..., 0]
    for n in range(1, degree):
        out[..., n + 1] = np.sqrt(2.0 / (n + 1)) * t * out[..., n] - np.sqrt(n / (n + 1)) * out[..., n - 1]
    return out


def _apply_axes(arr: np.ndarray, mats) -> np.ndarray:
    """Contract axis ``j`` of ``arr`` with the first axis of ``mats[j]`` for every ``j``."""
    for m in mats:
        arr = np.tensordot(arr, m, axes=([0], [0]))
    return arr


@dataclass(frozen=True, eq=False)
class HermiteBasis:
    """Tensor basis ``psi_n(x) = prod_j sqrt(beta_j) h_{n_j}(beta_j x_j)``, ``0 <= n_j <= M``.

    Carries a per-axis Gauss-Hermite rule with ``K = 2M + 2`` nodes, exact
    against the Gaussian weight up to polynomial degree ``4M + 3``.
    """

    drift: DriftSpec
    eps: float
    max_degree: int
    beta: np.ndarray
    t_nodes: np.ndarray
    scaled_weights: np.ndarray  # w_k exp(t_k^2)
    tables: tuple = field(repr=False)  # per axis (K, M+1): psi values at nodes

    @property
    def dim(self) -> int:
        return self.drift.dim

    @property
    def shape(self) -> tuple:
        return (self.max_degree + 1,) * self.dim

    @property
    def node_shape(self) -> tuple:
        return (len(self.t_nodes),) * self.dim

    def axis_nodes(self, j: int) -> np.ndarray:
        return self.t_nodes / self.beta[j]

    def axis_weights(self, j: int) -> np.ndarray:
        return self.scaled_weights / self.beta[j]

    def nodes(self) -> np.ndarray:
        """Tensor nodes in ``x``, shape ``node_shape + (N,)``."""
        axes = [self.axis_nodes(j) for j in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def eigenvalues(self) -> np.ndarray:
        """``Nop`` eigenvalue ``4 sum_j |a_j| n_j`` for each coefficient slot."""
        grids = np.meshgrid(*[np.arange(self.max_degree + 1)] * self.dim, indexing="ij")
        return 4.0 * sum(abs(a) * n for a, n in zip(self.drift.coeffs, grids))

    def integrate(self, values) -> float:
        """Quadrature of node samples; exact for polynomial times ``Q^2``."""
        w = [self.axis_weights(j) for j in range(self.dim)]
        return float(_apply_axes(np.asarray(values, dtype=float), w))

    def project(self, values) -> np.ndarray:
        """Coefficients ``<f, psi_n>`` from node samples."""
        mats = [self.axis_weights(j)[:, None] * self.tables[j] for j in range(self.dim)]
        return _apply_axes(np.asarray(values, dtype=float), mats)

    def synthesize(self, coeffs) -> np.ndarray:
        """Node samples of ``sum_n c_n psi_n``."""
        return _apply_axes(np.asarray(coeffs, dtype=float), [tab.T for tab in self.tables])

    def axis_functions(self, j: int, x) -> np.ndarray:
        return np.sqrt(self.beta[j]) * hermite_functions(self.beta[j] * np.asarray(x, dtype=float), self.max_degree)

    def evaluate(self, coeffs, x) -> np.ndarray:
        """``sum_n c_n psi_n(x)`` at arbitrary points (coordinate axis last)."""
        x = np.asarray(x, dtype=float)
        pts = x.reshape(-1, self.dim)
        c = np.asarray(coeffs, dtype=float)
        phi0 = self.axis_functions(0, pts[:, 0])
        acc = np.tensordot(phi0, c, axes=([1], [0]))  # (P, M+1, ...)
        for j in range(1, self.dim):
            phij = self.axis_functions(j, pts[:, j])
            acc = np.einsum("pa,pa...->p...", phij, acc)
        return acc.reshape(x.shape[:-1])

    def basis_function(self, index) -> np.ndarray:
        c = np.zeros(self.shape)
        c[tuple(index)] = 1.0
        return c

    def gram(self, j: int = 0) -> np.ndarray:
        tab = self.tables[j]
        return tab.T @ (self.axis_weights(j)[:, None] * tab)


def build_hermite_basis(drift: DriftSpec, eps: float, M: int = DEFAULT_DEGREE) -> HermiteBasis:
    if M < 1:
        raise ValueError("M must be at least 1")
    if M > MAX_BASIS_DEGREE:
        raise ValueError(f"M = {M} exceeds the stable recurrence limit {MAX_BASIS_DEGREE}")
    K = 2 * M + 2
    t, _ = roots_hermite(K)
    # Christoffel form of w_k exp(t_k^2), stable where w_k underflows
    scaled = 1.0 / np.sum(hermite_functions(t, K - 1) ** 2, axis=-1)
    beta = np.sqrt(2 * np.abs(drift.a) / eps)
    tables = tuple(np.sqrt(b) * hermite_functions(t, M) for b in beta)
    return HermiteBasis(drift, float(eps), int(M), beta, t, scaled, tables)


@dataclass(frozen=True, eq=False)
class CorrectionSolution:
    coeffs: np.ndarray
    truncation_residual: float
    tail: float


def _tail(coeffs: np.ndarray, band: int = 4) -> float:
    """Largest coefficient with some index within ``band`` of the cutoff, relative to the largest."""
    c = np.abs(coeffs)
    top = c.max()
    if top == 0.0:
        return 0.0
    M = c.shape[0] - 1
    mask = np.zeros(c.shape, dtype=bool)
    for ax in range(c.ndim):
        sl = [slice(None)] * c.ndim
        sl[ax] = slice(max(M - band + 1, 0), None)
        mask[tuple(sl)] = True
    return float(c[mask].max() / top)


def solve_correction(
    basis: HermiteBasis,
    rhs,
    smooth: bool = True,
    solvability_tol: float = 1e-8,
) -> CorrectionSolution:
    """Solve ``Nop phi = F`` with ``<phi, Q> = 0`` given ``F`` sampled at the basis nodes.

    ``c_n = <F, psi_n> / (4 sum_j |a_j| n_j)`` for ``n != 0`` and ``c_0 = 0``.
    The truncation residual is the relative quadrature L2 error of
    reconstructing ``F`` from its projected coefficients; it must stay below
    ``1e-8`` (or ``1e-6`` with a warning when ``smooth`` is False, e.g.
    ``h0 = |x|``).  Smooth right-hand sides must also have a coefficient tail
    below ``1e-10``.
    """
    F = np.asarray(rhs, dtype=float)
    if F.shape != basis.node_shape:
        raise ValueError(f"rhs must be sampled on the basis nodes {basis.node_shape}")
    normF = np.sqrt(basis.integrate(F**2))
    b = basis.project(F)
    zero = (0,) * basis.dim
    if abs(b[zero]) > solvability_tol * max(1.0, normF):
        raise SolvabilityError(f"<F, Q> = {b[zero]:.3e} violates solvability")
    lam = basis.eigenvalues()
    c = np.zeros_like(b)
    nz = lam > 0
    c[nz] = b[nz] / lam[nz]
    if normF == 0.0:
        return CorrectionSolution(c, 0.0, 0.0)
    b_kernel_free = b.copy()
    b_kernel_free[zero] = 0.0
    recon = basis.synthesize(b_kernel_free)
    resid = float(np.sqrt(basis.integrate((recon - F) ** 2)) / normF)
    tail = _tail(b)
    if smooth:
        if resid > 1e-8:
            raise TruncationError(f"truncation residual {resid:.2e} > 1e-8 at M={basis.max_degree}")
        if tail > 1e-10:
            raise TruncationError(f"coefficient tail {tail:.2e} > 1e-10 at M={basis.max_degree}")
    else:
        if resid > 1e-6:
            raise TruncationError(f"truncation residual {resid:.2e} > 1e-6 at M={basis.max_degree}")
        warnings.warn(
            f"non-smooth right-hand side: algebraic coefficient decay (residual {resid:.1e}, tail {tail:.1e})",
            RuntimeWarning,
            stacklevel=2,
        )
    return CorrectionSolution(c, resid, tail)


def apply_shifted_oscillator(basis: HermiteBasis, coeffs) -> np.ndarray:
    """Coefficients of ``Nop phi``: diagonal scaling by the basis eigenvalues."""
    return basis.eigenvalues() * np.asarray(coeffs)


def hermite_second_derivative(t, degree: int) -> np.ndarray:
    """``h_n''(t) = (t^2 - 2n - 1) h_n(t)`` for the orthonormal Hermite functions."""
    t = np.asarray(t, dtype=float)
    n = np.arange(degree + 1)
    return (t[..., None] ** 2 - 2 * n - 1) * hermite_functions(t, degree)


def apply_shifted_oscillator_pointwise(basis: HermiteBasis, index, x) -> np.ndarray:
    """``Nop psi_index`` at points ``x`` from exact second derivatives (no spectral shortcut)."""
    x = np.asarray(x, dtype=float)
    eps, a = basis.eps, np.abs(basis.drift.a)
    vals = []
    seconds = []
    for j, n in enumerate(index):
        b = basis.beta[j]
        t = b * x[..., j]
        vals.append(np.sqrt(b) * hermite_functions(t, n)[..., n])
        seconds.append(np.sqrt(b) * b**2 * hermite_second_derivative(t, n)[..., n])
    psi = np.prod(vals, axis=0)
    out = ((4 / eps) * np.sum(a**2 * x**2, axis=-1) - basis.drift.mu) * psi
    for j in range(basis.dim):
        others = np.prod([v for k, v in enumerate(vals) if k != j], axis=0) if basis.dim > 1 else 1.0
        out = out - eps * seconds[j] * others
    return out


RHS_KINDS = ("F1", "F2", "F3", "F4")


def rhs_function(
    kind: str,
    V: PotentialSpec,
    limit: LimitPair,
    basis: HermiteBasis,
    prior: Optional[np.ndarray] = None,
):
    """Right-hand side of a correction equation as a function of points (axis last).

    ``F1 = [int (x.gradV(0)) Q^2 - x.gradV(0)] Q``
    ``F2 = sum_{|tau|=2} D^tau V(0)/tau! (int x^tau Q^2 - x^tau) Q``
    ``F3 = (int h0 Q^2 - h0) Q``
    ``F4 = (int h0 phi3 Q) Q + (int h0 Q^2 - h0) phi3`` with ``phi3`` from ``prior``.

    Integrals are closed-form moments (F1, F2) or basis quadrature (F3, F4).
    """
    if kind not in RHS_KINDS:
        raise ValueError(f"unknown right-hand side {kind!r}")
    drift, eps = limit.drift, limit.eps
    if kind in ("F1", "F2"):
        if V.local_model is None:
            field_name = "gradient_at_origin" if kind == "F1" else "hessian_at_origin"
            raise MissingLocalDataError(f"{kind} needs local data: {field_name}")
        lm = V.local_model
    if kind == "F1":
        g = lm.gradient
        mean = sum(g[i] * gaussian_moment(drift, eps, tau) for i, tau in enumerate(multi_indices(drift.dim, 1)))

        def F(x):
            x = np.asarray(x, dtype=float)
            return (mean - x @ g) * limit.Q(x)

        return F
    if kind == "F2":
        H = lm.hessian
        terms = []
        for tau in multi_indices(drift.dim, 2):
            idx = [i for i, t in enumerate(tau) for _ in range(t)]
            deriv = H[idx[0], idx[1]]
            if deriv != 0.0:
                fact = math.prod(math.factorial(t) for t in tau)
                terms.append((deriv / fact, gaussian_moment(drift, eps, tau), np.asarray(tau)))

        def F(x):
            x = np.asarray(x, dtype=float)
            acc = np.zeros(x.shape[:-1])
            for c, m, tau in terms:
                acc = acc + c * (m - np.prod(x**tau, axis=-1))
            return acc * limit.Q(x)

        return F
    hp = V.homogeneous_part
    if hp is None:
        raise MissingLocalDataError(f"{kind} needs the homogeneous part h0 of the potential")
    nodes = basis.nodes()
    Qn = limit.Q(nodes)
    h0n = hp(nodes)
    mean = basis.integrate(h0n * Qn**2)
    if kind == "F3":
        return lambda x: (mean - hp(x)) * limit.Q(x)
    if prior is None:
        raise MissingLocalDataError("F4 needs the phi3 coefficients")
    c3 = basis.integrate(h0n * basis.synthesize(prior) * Qn)

    def F(x):
        phi3 = basis.evaluate(prior, x)
        return c3 * limit.Q(x) + (mean - hp(x)) * phi3

    return F


def build_rhs(
    kind: str,
    V: PotentialSpec,
    limit: LimitPair,
    basis: HermiteBasis,
    prior: Optional[np.ndarray] = None,
) -> np.ndarray:
    """``rhs_function`` sampled at the basis nodes, with ``<F, Q> = 0`` verified by quadrature."""
    x = basis.nodes()
    F = rhs_function(kind, V, limit, basis, prior)(x)
    ip = basis.integrate(F * limit.Q(x))
    if abs(ip) > 1e-8 * max(1.0, np.sqrt(basis.integrate(F**2))):
        raise SolvabilityError(f"<F, Q> = {ip:.3e} is not zero")
    return F


@dataclass(frozen=True, eq=False)
class CorrectionSet:
    basis: HermiteBasis
    phi1: Optional[np.ndarray] = None
    phi2: Optional[np.ndarray] = None
    phi3: Optional[np.ndarray] = None
    phi4: Optional[np.ndarray] = None
    residuals: dict = field(default_factory=dict)

    def items(self):
        for name in ("phi1", "phi2", "phi3", "phi4"):
            c = getattr(self, name)
            if c is not None:
                yield name, c

    def evaluate(self, name: str, x) -> np.ndarray:
        return self.basis.evaluate(getattr(self, name), x)

    def decay_constants(self, name: str, inner_radius: Optional[float] = None, n: int = 81):
        """``(C_inner, C_box)``: sup of ``|phi| e^{|x|/2}`` on a ball and on a larger box.

        The decay bound holds on the box with the inner constant when ``C_box <= C_inner``.
        """
        sig = np.sqrt(self.basis.eps / (4 * np.abs(self.basis.drift.a)))
        r = 6 * sig.max() if inner_radius is None else inner_radius
        axes = [np.linspace(-3 * r, 3 * r, n)] * self.basis.dim
        x = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        ratio = np.abs(self.evaluate(name, x)) * np.exp(np.linalg.norm(x, axis=-1) / 2)
        inner = np.linalg.norm(x, axis=-1) <= r
        return float(ratio[inner].max()), float(ratio.max())


def solve_corrections(
    V: PotentialSpec,
    limit: LimitPair,
    basis: Optional[HermiteBasis] = None,
    which=("phi1", "phi2", "phi3", "phi4"),
) -> CorrectionSet:
    """All corrections supported by the potential's local data.

    ``phi1``/``phi2`` need the local model, ``phi3``/``phi4`` the homogeneous
    part.  Non-polynomial ``h0`` gets ``M = 80``.
    """
    hp = V.homogeneous_part
    if basis is None:
        M = DEFAULT_DEGREE
        if hp is not None and not _is_polynomial_degree(hp.degree):
            M = NONPOLYNOMIAL_DEGREE
        basis = build_hermite_basis(limit.drift, limit.eps, M)
    out = {}
    res = {}
    smooth_h = hp is None or hp.smooth

    def solve(name, kind, prior=None, smooth=True):
        try:
            sol = solve_correction(basis, build_rhs(kind, V, limit, basis, prior), smooth=smooth)
        except (SolvabilityError, TruncationError) as exc:
            raise type(exc)(f"{kind}: {exc}") from None
        out[name], res[name] = sol.coeffs, sol.truncation_residual

    if V.local_model is not None:
        for name, kind in (("phi1", "F1"), ("phi2", "F2")):
            if name in which:
                solve(name, kind)
    if hp is not None and "phi3" in which:
        solve("phi3", "F3", smooth=smooth_h)
        if "phi4" in which:
            solve("phi4", "F4", out["phi3"], smooth_h)
    return CorrectionSet(basis, residuals=res, **out)


def _is_polynomial_degree(k: float) -> bool:
    return float(k).is_integer() and int(k) % 2 == 0
