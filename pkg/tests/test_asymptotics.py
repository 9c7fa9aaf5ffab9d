import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drift_spectra import potentials
from drift_spectra.asymptotics import (
    CSV_COLUMNS,
    HOMOGENEOUS,
    SMOOTH,
    BoundaryMaximumError,
    EigenfunctionExpansion,
    EigenvalueExpansion,
    ResidualFloorError,
    SweepRecord,
    boundary_tail_mass,
    fit_residual_order,
    homogeneous_expansion,
    non_increasing,
    partial_sums,
    partial_sums_monotone,
    pohozaev_projection,
    predict_lambda,
    records_to_csv,
    rescale_eigenfunction,
    rescaled_radius,
    run_sweep,
    smooth_expansion,
    solve_rescaled,
    track_max_point,
)
from drift_spectra.eigensolver import smallest_eigenpair
from drift_spectra.limit import closed_form_limit, solve_corrections
from drift_spectra.model import BoxDomain, DriftSpec, Frame, Grid, GridField
from drift_spectra.operator import assemble_symmetric

REF = DriftSpec((1.0, -1.0))
LIM = closed_form_limit(REF, 1.0)


def record(alpha, lam, sums=(0.0,)):
    return SweepRecord(alpha, lam, tuple(sums), 0.0, (0.0, 0.0), 0.0, 1, 0.0, 0.0)


def test_predict_lambda_quadratic():
    exp = smooth_expansion(potentials.quadratic(2), LIM)
    assert predict_lambda(exp, 100.0, 1) == 400.0
    assert predict_lambda(exp, 100.0, 4) == pytest.approx(400.005, rel=1e-15)
    assert partial_sums(exp, 100.0) == [400.0, 400.0, 400.0, pytest.approx(400.005)]
    with pytest.raises(ValueError):
        predict_lambda(exp, 0.0, 1)


def test_smooth_expansion_for_linear_potential_has_zero_gradient_term():
    exp = smooth_expansion(potentials.linear_quadratic(2, [1.0, 0.0], offset=1.0), LIM)
    assert exp.coefficients == ((1.0, 4.0), (0.0, 1.0), (-0.5, 0.0), (-1.0, 0.0))


def test_homogeneous_expansion_for_x1_squared():
    exp = homogeneous_expansion(potentials.homogeneous_power(2, 2.0, weights=[1.0, 0.0]), LIM)
    assert exp.kind == HOMOGENEOUS
    (p0, c0), (p1, c1), (p2, c2) = exp.coefficients
    assert (p0, c0) == (1.0, 4.0)
    assert p1 == -1.0 and c1 == pytest.approx(0.25, rel=1e-13)
    assert p2 == -3.0 and c2 == pytest.approx(-1 / 64, rel=1e-10)


def test_expansion_invariants():
    with pytest.raises(ValueError):
        EigenvalueExpansion(SMOOTH, ((1.0, 4.0), (0.0, 1.0), (0.0, 2.0)))
    with pytest.raises(ValueError):
        EigenvalueExpansion(SMOOTH, ((0.0, 1.0),))
    with pytest.raises(ValueError):
        EigenvalueExpansion("other", ((1.0, 4.0),))


def test_eigenfunction_expansion_terms_are_orthogonal_to_Q():
    V = potentials.homogeneous_power(2, 2.0, weights=[1.0, 0.0])
    cs = solve_corrections(V, LIM, which=("phi3", "phi4"))
    ef = EigenfunctionExpansion(HOMOGENEOUS, LIM, cs, 2.0)
    basis = cs.basis
    x = basis.nodes()
    for name in ef.terms():
        assert abs(basis.integrate(cs.evaluate(name, x) * LIM.Q(x))) < 1e-13
    # corrections are small relative to Q at large alpha
    pts = np.array([[0.1, 0.2], [0.5, -0.3]])
    np.testing.assert_allclose(ef.evaluate(1e4, pts), LIM.Q(pts), rtol=1e-7)


def test_rescaled_radius_reference():
    assert rescaled_radius(REF, 1.0) == 4.0


def test_rescale_is_identity_at_alpha_one():
    g = Grid.uniform(BoxDomain.cube(2.0, 2), 21)
    u = GridField.sample(g, lambda x: np.exp(-np.sum(x**2, axis=-1)))
    w = rescale_eigenfunction(u, 1.0)
    np.testing.assert_allclose(w.values, u.values, atol=1e-14)
    assert w.frame.is_rescaled


@settings(max_examples=20, deadline=None)
@given(st.floats(1.0, 50.0))
def test_rescale_preserves_l2_norm(alpha):
    g = Grid.uniform(BoxDomain.cube(1.0, 2), 201)
    u = GridField.sample(g, lambda x: np.exp(-alpha * np.sum(x**2, axis=-1))).normalized()
    w = rescale_eigenfunction(u, alpha)
    # the image grid has spacing sqrt(alpha) h: norm preserved up to interpolation of exact nodes
    assert w.l2_norm() == pytest.approx(u.l2_norm(), rel=1e-10)


def test_rescale_rejects_bad_input():
    g = Grid.uniform(BoxDomain.cube(1.0, 2), 11)
    u = GridField.sample(g, lambda x: 1 - np.abs(x[:, 0]))
    with pytest.raises(ValueError):
        rescale_eigenfunction(u, -1.0)
    with pytest.raises(ValueError):
        rescale_eigenfunction(u, 4.0, target=Grid.uniform(BoxDomain.cube(6.0, 2), 5))


def test_physical_solution_rescales_to_Q():
    alpha = 100.0
    g = Grid.uniform(BoxDomain.cube(0.6, 2), 255)
    pair = smallest_eigenpair(assemble_symmetric(REF, potentials.zero(2), g, 1.0, alpha))
    target = Grid.uniform(BoxDomain.cube(4.0, 2), 63)
    w = rescale_eigenfunction(pair.u, alpha, target=target)
    assert np.max(np.abs(w.values - LIM.Q(target.points()))) <= 0.05


def test_track_max_point_refines_offset_gaussian():
    g = Grid.uniform(BoxDomain.cube(1.0, 2), 41)
    c = np.array([0.013, -0.021])
    u = GridField.sample(g, lambda x: np.exp(-20 * np.sum((x - c) ** 2, axis=-1)))
    d, scaled, count = track_max_point(u, 4.0)
    np.testing.assert_allclose(d, c, atol=1e-10)
    assert scaled == pytest.approx(2 * np.linalg.norm(c))
    assert count == 1


def test_track_max_point_counts_two_bumps_and_boundary():
    g = Grid.uniform(BoxDomain.cube(1.0, 2), 41)
    two = GridField.sample(
        g, lambda x: np.exp(-40 * np.sum((x - 0.4) ** 2, axis=-1)) + 0.5 * np.exp(-40 * np.sum((x + 0.4) ** 2, axis=-1))
    )
    assert track_max_point(two, 1.0)[2] == 2
    edge = GridField.sample(g, lambda x: np.exp(5 * x[:, 0]))
    with pytest.raises(BoundaryMaximumError):
        track_max_point(edge, 1.0)


def test_pohozaev_vanishes_for_sampled_Q():
    g = Grid.uniform(BoxDomain.cube(4.0, 2), 127)
    op = assemble_symmetric(REF, potentials.zero(2), g, 1.0, 50.0, Frame.rescaled(50.0))
    q = GridField.sample(g, LIM.Q, Frame.rescaled(50.0))
    h2 = g.spacing[0] ** 2
    assert abs(pohozaev_projection(op, q, LIM, 2.0)) < 2 * h2
    with pytest.raises(ValueError):
        pohozaev_projection(op, q, LIM, 5.0)


def test_boundary_tail_mass():
    g = Grid.uniform(BoxDomain.cube(4.0, 2), 63)
    q = GridField.sample(g, LIM.Q)
    # Q^2 has variance 1/4 per axis; nodes on |y_j| = 2 count as inside, so the cut sits half a cell out
    cut = 2.0 + g.spacing[0] / 2
    want = 1 - math.erf(cut * math.sqrt(2)) ** 2
    assert boundary_tail_mass(q) == pytest.approx(want, rel=0.1)
    flat = GridField(g, np.ones(g.size))
    assert boundary_tail_mass(flat) == pytest.approx(0.75, abs=0.05)


def test_fit_residual_order_recovers_slope():
    recs = [record(a, 4 * a + 1 + 3 * a**-1.5, (4 * a + 1,)) for a in (25, 50, 100, 200, 400)]
    slope, r2, used = fit_residual_order(recs, 1)
    assert slope == pytest.approx(-1.5, abs=1e-8)
    assert r2 == pytest.approx(1.0)
    assert used == (25.0, 50.0, 100.0, 200.0, 400.0)


def test_fit_residual_order_floor():
    recs = [record(a, 4 * a, (4 * a,)) for a in (25, 50, 100, 200, 400)]
    with pytest.raises(ResidualFloorError, match="solver precision"):
        fit_residual_order(recs, 1)


def test_partial_sum_monotonicity():
    good = record(100.0, 401.0, (400.0, 400.9, 401.0))
    bad = record(100.0, 401.0, (400.9, 400.0, 401.0))
    assert partial_sums_monotone(good)
    assert not partial_sums_monotone(bad)


def test_non_increasing_allows_rounding():
    assert non_increasing([1.0, 1.0 + 1e-14, 0.5])
    assert not non_increasing([1.0, 1.1])


def test_solve_rescaled_reference():
    sol = solve_rescaled(REF, potentials.zero(2), 1.0, 100.0, levels=(63, 127, 255))
    assert abs(sol.lambda_numeric - 400.0) < 1e-4
    assert sol.lambda_error < 1e-3


def test_csv_output_is_deterministic_and_formatted():
    recs = run_sweep(REF, potentials.quadratic(2), 1.0, (25.0, 50.0), levels=(15, 31))
    a, b = records_to_csv(recs), records_to_csv(run_sweep(REF, potentials.quadratic(2), 1.0, (50.0, 25.0), levels=(15, 31)))
    assert a == b
    lines = a.strip().splitlines()
    assert lines[0].split(",") == list(CSV_COLUMNS)
    first = lines[1].split(",")
    assert first[0] == "2.50000000000e+01"
    assert first[-3] == "1"
    assert all(r.converged for r in recs)
    assert not math.isnan(float(first[5]))
