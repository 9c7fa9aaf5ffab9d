import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drift_spectra import potentials
from drift_spectra.limit import (
    MissingLocalDataError,
    SolvabilityError,
    TruncationError,
    apply_shifted_oscillator,
    apply_shifted_oscillator_pointwise,
    build_hermite_basis,
    build_rhs,
    closed_form_limit,
    gaussian_moment,
    hermite_functions,
    multi_indices,
    rhs_function,
    solve_correction,
    solve_corrections,
)
from drift_spectra.model import DriftSpec, PotentialSpec
from drift_spectra.oracles import constrained_solve_extrapolated

REF = DriftSpec((1.0, -1.0))
LIM = closed_form_limit(REF, 1.0)
rng = np.random.default_rng(7)
SAMPLE = rng.uniform(-1.5, 1.5, size=(40, 2))


def test_limit_pair_reference():
    assert LIM.mu == 4.0
    np.testing.assert_allclose(LIM.sigma, [0.5, 0.5])
    assert LIM.Q0 == pytest.approx(np.sqrt(2 / np.pi))
    assert LIM.Q([0.0, 0.0]) == pytest.approx(np.sqrt(2 / np.pi))


def test_limit_three_dimensional():
    lim = closed_form_limit(DriftSpec((3.0, -1.0, -2.0)), 0.5)
    assert lim.mu == 12.0
    np.testing.assert_allclose(lim.sigma, np.sqrt(0.5 / (4 * np.array([3.0, 1.0, 2.0]))))


def test_Q_is_normalized_and_annihilated():
    basis = build_hermite_basis(REF, 1.0, 10)
    x = basis.nodes()
    assert basis.integrate(LIM.Q(x) ** 2) == pytest.approx(1.0, rel=1e-13)
    c = basis.project(LIM.Q(x))
    assert c[0, 0] == pytest.approx(1.0, rel=1e-13)
    c[0, 0] = 0.0
    assert np.abs(c).max() < 1e-13
    np.testing.assert_allclose(apply_shifted_oscillator_pointwise(basis, (0, 0), SAMPLE), 0.0, atol=1e-12)


def test_gram_matrix_is_identity():
    basis = build_hermite_basis(DriftSpec((3.0, -1.0, -2.0)), 0.7, 60)
    for j in range(3):
        np.testing.assert_allclose(basis.gram(j), np.eye(61), atol=1e-12)


def test_hermite_function_normalization_large_degree():
    basis = build_hermite_basis(REF, 1.0, 200)
    assert np.max(np.abs(basis.gram(0) - np.eye(201))) < 1e-10
    assert np.all(np.isfinite(hermite_functions(np.linspace(-30, 30, 101), 200)))


def test_basis_degree_limits():
    with pytest.raises(ValueError, match="200"):
        build_hermite_basis(REF, 1.0, 201)
    with pytest.raises(ValueError):
        build_hermite_basis(REF, 1.0, 0)


@pytest.mark.parametrize("index", [(1, 0), (0, 3), (2, 5), (7, 4)])
def test_pointwise_spectral_identity(index):
    basis = build_hermite_basis(REF, 1.0, 8)
    lhs = apply_shifted_oscillator_pointwise(basis, index, SAMPLE)
    psi = basis.evaluate(basis.basis_function(index), SAMPLE)
    lam = 4 * sum(index)
    np.testing.assert_allclose(lhs, lam * psi, atol=1e-10 * max(1, lam))


def test_spectral_identity_anisotropic():
    drift = DriftSpec((3.0, -1.0, -2.0))
    basis = build_hermite_basis(drift, 0.4, 5)
    x = rng.uniform(-0.5, 0.5, size=(20, 3))
    idx = (2, 1, 3)
    want = 4 * (3 * 2 + 1 * 1 + 2 * 3)
    assert basis.eigenvalues()[idx] == want
    psi = basis.evaluate(basis.basis_function(idx), x)
    np.testing.assert_allclose(apply_shifted_oscillator_pointwise(basis, idx, x), want * psi, atol=1e-9 * want)
    c = basis.basis_function(idx)
    assert apply_shifted_oscillator(basis, c)[idx] == want


@settings(max_examples=40, deadline=None)
@given(
    st.tuples(st.integers(0, 4), st.integers(0, 4)).filter(lambda t: sum(t) <= 4),
    st.floats(0.2, 3.0),
    st.floats(0.3, 2.0),
)
def test_moments_match_quadrature(tau, a, eps):
    drift = DriftSpec((a, -a))
    basis = build_hermite_basis(drift, eps, 6)
    lim = closed_form_limit(drift, eps)
    x = basis.nodes()
    numeric = basis.integrate(np.prod(x ** np.array(tau), axis=-1) * lim.Q(x) ** 2)
    assert numeric == pytest.approx(gaussian_moment(drift, eps, tau), rel=1e-12, abs=1e-14)


def test_moment_order_limit():
    with pytest.raises(ValueError):
        gaussian_moment(REF, 1.0, (4, 2))


def test_multi_indices():
    assert sorted(multi_indices(2, 2)) == [(0, 2), (1, 1), (2, 0)]
    assert len(list(multi_indices(3, 2))) == 6


def test_first_correction_for_linear_potential():
    V = potentials.linear_quadratic(2, [1.0, 0.0], offset=1.0)
    cs = solve_corrections(V, LIM, which=("phi1",))
    np.testing.assert_allclose(cs.evaluate("phi1", SAMPLE), -SAMPLE[:, 0] * LIM.Q(SAMPLE) / 4, atol=1e-12)


def test_homogeneous_corrections_for_x1_squared():
    V = potentials.homogeneous_power(2, 2.0, weights=[1.0, 0.0])
    cs = solve_corrections(V, LIM, which=("phi3", "phi4"))
    x1 = SAMPLE[:, 0]
    np.testing.assert_allclose(cs.evaluate("phi3", SAMPLE), (0.25 - x1**2) * LIM.Q(SAMPLE) / 8, atol=1e-12)
    assert cs.phi3[2, 0] == pytest.approx(-np.sqrt(2) / 32, abs=1e-12)
    c = cs.phi3.copy()
    c[2, 0] = 0.0
    assert np.abs(c).max() < 1e-12
    basis = cs.basis
    x = basis.nodes()
    assert basis.integrate(x[..., 0] ** 2 * basis.synthesize(cs.phi3) * LIM.Q(x)) == pytest.approx(-1 / 64, rel=1e-10)
    # F4 is solvable and its solution is orthogonal to Q
    assert cs.phi4[0, 0] == 0.0
    assert basis.integrate(basis.synthesize(cs.phi4) * LIM.Q(x)) == pytest.approx(0.0, abs=1e-13)


def test_quadratic_potential_second_and_third_corrections_agree():
    V = potentials.quadratic(2)
    cs = solve_corrections(V, LIM, which=("phi2", "phi3"))
    np.testing.assert_allclose(cs.phi2, cs.phi3, atol=1e-13)
    basis = cs.basis
    x = basis.nodes()
    r2 = np.sum(x**2, axis=-1)
    assert basis.integrate(r2 * basis.synthesize(cs.phi3) * LIM.Q(x)) == pytest.approx(-1 / 32, rel=1e-10)


def test_correction_solves_equation_pointwise():
    V = potentials.shifted_quadratic(2, [0.2, -0.1])
    basis = build_hermite_basis(REF, 1.0, 30)
    F = build_rhs("F2", V, LIM, basis)
    sol = solve_correction(basis, F)
    x = SAMPLE[:5]
    lhs = sum(
        sol.coeffs[idx] * apply_shifted_oscillator_pointwise(basis, idx, x)
        for idx in zip(*np.nonzero(np.abs(sol.coeffs) > 1e-15))
    )
    np.testing.assert_allclose(lhs, rhs_function("F2", V, LIM, basis)(x), atol=1e-11)


def test_spectral_matches_finite_difference_oracle():
    V = potentials.homogeneous_power(2, 2.0, weights=[1.0, 0.0])
    cs = solve_corrections(V, LIM, which=("phi3",))
    rhs = lambda x: (0.25 - x[..., 0] ** 2) * LIM.Q(x)  # noqa: E731
    grid, vals = constrained_solve_extrapolated(LIM, rhs, radius=6.0, levels=(31, 63, 127))
    spectral = cs.evaluate("phi3", grid.points())
    assert np.max(np.abs(vals - spectral)) < 1e-6


def test_solvability_violation():
    basis = build_hermite_basis(REF, 1.0, 6)
    with pytest.raises(SolvabilityError):
        solve_correction(basis, LIM.Q(basis.nodes()))


def test_missing_local_data_names_field():
    V = PotentialSpec(lambda x: np.sum(np.asarray(x) ** 2, axis=-1), None, None)
    basis = build_hermite_basis(REF, 1.0, 6)
    with pytest.raises(MissingLocalDataError, match="gradient_at_origin"):
        build_rhs("F1", V, LIM, basis)
    with pytest.raises(MissingLocalDataError, match="hessian_at_origin"):
        build_rhs("F2", V, LIM, basis)


def test_nonsmooth_potential_reports_truncation():
    V = potentials.homogeneous_power(2, 1.0)
    with pytest.raises(TruncationError, match="F3"):
        solve_corrections(V, LIM, which=("phi3",))


def test_decay_constants_reference():
    V = potentials.homogeneous_power(2, 2.0, weights=[1.0, 0.0])
    cs = solve_corrections(V, LIM, which=("phi3",))
    inner, box = cs.decay_constants("phi3")
    assert box <= inner
