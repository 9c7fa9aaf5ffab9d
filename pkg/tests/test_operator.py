import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings
from hypothesis import strategies as st

from drift_spectra import potentials
from drift_spectra.eigensolver import principal_eigenpair_nonsymmetric, smallest_eigenpair
from drift_spectra.limit import closed_form_limit
from drift_spectra.model import BoxDomain, DriftSpec, Frame, Grid, GridField
from drift_spectra.operator import (
    OverflowGuardError,
    assemble_nonsymmetric,
    assemble_symmetric,
    effective_potential,
    gauge_exponent_bound,
    gauge_factor,
    negative_laplacian,
    rayleigh_quotient,
    read_coo,
    write_coo,
)

REF = DriftSpec((1.0, -1.0))


def test_symmetric_matrix_is_exactly_symmetric():
    g = Grid.uniform(BoxDomain((-1.0, -0.7), (1.3, 1.0)), (9, 13))
    op = assemble_symmetric(REF, potentials.shifted_quadratic(2, [0.2, 0.1]), g, 0.7, 3.0)
    A = op.matrix
    assert (A - A.T).nnz == 0 or np.max(np.abs((A - A.T).data)) == 0.0


def test_effective_potential_formula():
    x = np.array([[0.3, -0.4], [1.0, 2.0]])
    V = potentials.quadratic(2)
    got = effective_potential(REF, V, 0.5, 3.0, x)
    want = (4 * 9.0 / 0.5) * (x[:, 0] ** 2 + x[:, 1] ** 2) + V(x)
    np.testing.assert_allclose(got, want)


def test_five_point_stencil_on_quadratic():
    # -Lap of 1 - x^2 - y^2 is 4; the stencil is exact for quadratics away from the boundary
    g = Grid.uniform(BoxDomain.cube(1.0, 2), 15)
    f = GridField.sample(g, lambda x: 1 - x[:, 0] ** 2 - x[:, 1] ** 2).with_boundary()
    L = negative_laplacian(g) @ f[1:-1, 1:-1].ravel()
    interior = L.reshape(g.shape)[1:-1, 1:-1]
    np.testing.assert_allclose(interior, 4.0)


def test_rescaled_frame_is_physical_divided_by_alpha():
    alpha = 9.0
    n = 31
    phys = Grid.uniform(BoxDomain.cube(0.5, 2), n)
    resc = Grid.uniform(BoxDomain.cube(0.5 * np.sqrt(alpha), 2), n)
    V = potentials.shifted_quadratic(2, [0.2, 0.0], offset=0.5)
    A = assemble_symmetric(REF, V, phys, 1.0, alpha).matrix
    B = assemble_symmetric(REF, V, resc, 1.0, alpha, Frame.rescaled(alpha)).matrix
    np.testing.assert_allclose((A / alpha - B).toarray(), 0.0, atol=1e-9)


def test_rescaled_frame_alpha_mismatch():
    g = Grid.uniform(BoxDomain.cube(1.0, 2), 5)
    with pytest.raises(ValueError):
        assemble_symmetric(REF, potentials.zero(2), g, 1.0, 2.0, Frame.rescaled(3.0))


def test_overflow_guard():
    g = Grid.uniform(BoxDomain.cube(1.0, 2), 5)
    assert gauge_exponent_bound(REF, g, 1.0, 5.0) == pytest.approx(5.0)
    with pytest.raises(OverflowGuardError):
        assemble_nonsymmetric(REF, potentials.zero(2), g, 1.0, 601.0)


@pytest.mark.parametrize("alpha", [0.5, 2.0])
def test_gauge_transform_maps_eigenvectors(alpha):
    g = Grid.uniform(BoxDomain.cube(1.0, 2), 31)
    V = potentials.shifted_quadratic(2, [0.2, 0.0])
    sym = smallest_eigenpair(assemble_symmetric(REF, V, g, 1.0, alpha))
    lam, phi = principal_eigenpair_nonsymmetric(assemble_nonsymmetric(REF, V, g, 1.0, alpha))
    assert abs(lam / sym.lambda_ - 1) < 2e-3  # O(h^2) scheme difference on one grid
    u = gauge_factor(REF, g, 1.0, alpha) * phi.values
    u /= np.linalg.norm(u)
    v = sym.u.values / np.linalg.norm(sym.u.values)
    assert np.max(np.abs(u - v)) < 2e-3


def test_rayleigh_quotient_of_eigenvector():
    g = Grid.uniform(BoxDomain.cube(4.0, 2), 63)
    op = assemble_symmetric(REF, potentials.zero(2), g, 1.0, 100.0, Frame.rescaled(100.0))
    pair = smallest_eigenpair(op, tol=1e-12, max_iter=50_000)
    assert rayleigh_quotient(op, pair.u) == pytest.approx(pair.lambda_, rel=1e-12)


def test_rayleigh_quotient_of_sampled_gaussian():
    lim = closed_form_limit(REF, 1.0)
    g = Grid.uniform(BoxDomain.cube(4.0, 2), 127)
    op = assemble_symmetric(REF, potentials.zero(2), g, 1.0, 100.0, Frame.rescaled(100.0))
    q = rayleigh_quotient(op, GridField.sample(g, lim.Q, Frame.rescaled(100.0)))
    h2 = g.spacing[0] ** 2
    assert abs(q - lim.mu) <= 2 * h2  # O(h^2) and negligible tail at R = 8 sigma


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_rayleigh_quotient_bounds_smallest_eigenvalue(seed):
    g = Grid.uniform(BoxDomain.cube(1.0, 2), 15)
    op = assemble_symmetric(REF, potentials.quadratic(2), g, 1.0, 2.0)
    lam = spla.eigsh(op.matrix, k=1, sigma=0, which="LM")[0][0]
    u = GridField(g, np.random.default_rng(seed).standard_normal(g.size))
    assert rayleigh_quotient(op, u) >= lam - 1e-9 * abs(lam)


def test_rayleigh_quotient_rejects_zero_and_foreign_fields():
    g = Grid.uniform(BoxDomain.cube(1.0, 2), 7)
    op = assemble_symmetric(REF, potentials.zero(2), g, 1.0, 1.0)
    with pytest.raises(ValueError):
        rayleigh_quotient(op, GridField(g, np.zeros(g.size)))
    other = Grid.uniform(BoxDomain.cube(1.0, 2), 9)
    with pytest.raises(ValueError):
        rayleigh_quotient(op, GridField(other, np.ones(other.size)))


def test_coo_roundtrip(tmp_path):
    g = Grid.uniform(BoxDomain.cube(1.0, 2), 6)
    A = assemble_symmetric(REF, potentials.quadratic(2), g, 1.0, 1.5).matrix
    write_coo(A, tmp_path / "a.txt")
    B = read_coo(tmp_path / "a.txt", A.shape[0])
    assert abs(A - B).max() == 0.0
    first = (tmp_path / "a.txt").read_text().splitlines()[0].split()
    assert first[:2] == ["0", "0"]
