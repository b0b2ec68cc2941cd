import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lipschitz_lab import fields as F
from lipschitz_lab.errors import BadVectorField, GramAssemblyBudget, HessOnP1, NonzeroTrace
from lipschitz_lab.fem import FeFunction, build_space, interpolate
from lipschitz_lab.geometry import lshape, make_sawtooth, unit_square
from lipschitz_lab.meshing import triangulate
from lipschitz_lab.norms import (GRAM_MAX_DOFS, NORM_COLUMNS, DualGradientOperator, NormReport, SobolevIndex,
                                 boundary_norms, classical_norms, dual_gradient_norm, gagliardo_seminorm, gram,
                                 h00_half_norm, mean_value, norm_report, quotient_norm, read_reports,
                                 trace_inequality_check, weighted_gradient_norm, weighted_hessian_norm,
                                 weighted_l2_norm, write_reports)


@pytest.fixture(scope="module")
def sq():
    return triangulate(unit_square(), 0.25)


@pytest.fixture(scope="module")
def coarse():
    return triangulate(lshape(), 0.5)


X = F.linear(1.0, 0.0)


def test_sobolev_index():
    assert SobolevIndex(0.5).critical
    assert not SobolevIndex(0.25).critical


def test_classical_closed_forms(sq):
    l2, g, h1 = classical_norms(X, sq)
    assert l2 == pytest.approx(1 / math.sqrt(3), rel=1e-12)
    assert g == pytest.approx(1.0, rel=1e-12)
    assert h1 == pytest.approx(math.sqrt(4 / 3), rel=1e-12)
    assert mean_value(X, sq) == pytest.approx(0.5)
    u = interpolate(build_space(sq, 1), X)
    assert classical_norms(u) == pytest.approx((l2, g, h1), rel=1e-12)


def test_gagliardo_linear_matches_double_integral(sq, oracles):
    ref = oracles["gagliardo_x_square_s05_sq"]["dblquad"]
    val = gagliardo_seminorm(X, 0.5, mesh=sq, squared=True)
    assert val == pytest.approx(ref, rel=2e-3)
    u = interpolate(build_space(sq, 1), X)
    assert gagliardo_seminorm(u, 0.5, squared=True) == pytest.approx(val, rel=1e-12)


def test_gagliardo_distance_function(oracles):
    m = triangulate(unit_square(), 0.1)
    u = interpolate(build_space(m, 2), lambda P: np.minimum.reduce([P[:, 0], 1 - P[:, 0], P[:, 1], 1 - P[:, 1]]))
    o = oracles["gagliardo_dist_square_s05_sq"]
    # the interpolant misses the ridge of the distance function, hence the looser tolerance
    assert gagliardo_seminorm(u, 0.5, squared=True) == pytest.approx(o["mc"], rel=0.02)


def test_gagliardo_gradient_part_and_range(sq):
    assert gagliardo_seminorm(X, 0.5, part="gradient", mesh=sq) == 0.0
    u = interpolate(build_space(sq, 2), F.monomial_x2())
    # grad x^2 = (2x, 0): twice the seminorm of x
    assert gagliardo_seminorm(u, 0.5, part="gradient") == pytest.approx(2 * gagliardo_seminorm(X, 0.5, mesh=sq),
                                                                        rel=1e-3)
    with pytest.raises(ValueError):
        gagliardo_seminorm(X, 1.0, mesh=sq)


def test_gagliardo_gradient_with_jumps(sq):
    w = interpolate(build_space(sq, 2), F.sinsin())
    # broken gradients: finite below s = 1/2, infinite from there on
    assert gagliardo_seminorm(w, 0.5, part="gradient") == math.inf
    assert gagliardo_seminorm(w, 0.25, part="gradient") == pytest.approx(
        gagliardo_seminorm(F.sinsin(), 0.25, part="gradient", mesh=sq), rel=0.01)


def test_weighted_closed_forms(sq, oracles):
    assert weighted_gradient_norm(X, 0.5, mesh=sq) ** 2 == pytest.approx(oracles["int_dist_square"], rel=1e-4)
    assert weighted_gradient_norm(X, 0.0, mesh=sq) ** 2 == pytest.approx(oracles["int_dist2_square"], rel=1e-4)
    assert weighted_gradient_norm(X, 1.0, mesh=sq) == pytest.approx(1.0)
    assert weighted_l2_norm(F.constant(1), 1.0, mesh=sq) ** 2 == pytest.approx(oracles["int_dist2_square"], rel=1e-4)
    assert weighted_l2_norm(F.constant(1), 2.0, mesh=sq) ** 2 == pytest.approx(oracles["int_dist4_square"], rel=1e-4)
    # |D^2 x^2|^2 = 4
    assert weighted_hessian_norm(F.monomial_x2(), 0.5, mesh=sq) ** 2 == pytest.approx(
        4 * oracles["int_dist_square"], rel=1e-4)
    reg = weighted_gradient_norm(X, 0.5, "regularized", mesh=sq)
    ex = weighted_gradient_norm(X, 0.5, mesh=sq)
    assert ex / math.sqrt(2) <= reg <= ex


def test_hessian_needs_p2(sq):
    with pytest.raises(HessOnP1):
        weighted_hessian_norm(interpolate(build_space(sq, 1), X), 0.5)


def test_quotient(sq):
    assert quotient_norm(X, 0.0, mesh=sq) == pytest.approx(1 / math.sqrt(12))
    assert quotient_norm(X, 1.0, mesh=sq) == pytest.approx(math.sqrt(1 / 12 + 1))
    u = interpolate(build_space(sq, 1), X)
    for s in (0.25, 0.75):
        assert quotient_norm(u + 3.0, s) == pytest.approx(quotient_norm(u, s), rel=1e-10)


def test_boundary_norms_and_trace(sq):
    l2, t = boundary_norms(F.constant(1.0), mesh=sq)
    assert (l2, t) == pytest.approx((2.0, 0.0))
    l2, t = boundary_norms(X, mesh=sq)
    assert l2 == pytest.approx(math.sqrt(5 / 3)) and t == pytest.approx(math.sqrt(2))
    lhs, rhs, ratio = trace_inequality_check(F.constant(1.0), mesh=sq)
    assert lhs == pytest.approx(2.0) and rhs == pytest.approx(2.0)
    with pytest.raises(BadVectorField):
        trace_inequality_check(F.constant(1.0), center=(2.0, 0.5), mesh=sq)


def test_trace_identity_fe():
    m = triangulate(make_sawtooth(2), 0.1)
    u = interpolate(build_space(m, 2), lambda P: np.cos(3 * P[:, 0]) + P[:, 1])
    lhs, rhs, ratio = trace_inequality_check(u)
    assert ratio == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("order", [1, 2])
def test_dual_at_s1_is_gradient_norm(sq, order):
    V = build_space(sq, order)
    u = FeFunction(V, np.random.default_rng(order).uniform(-1, 1, V.dof_count))
    assert dual_gradient_norm(u, 1.0) == pytest.approx(classical_norms(u)[1], abs=1e-10)


def test_dual_norm_variants(coarse):
    V = build_space(coarse, 1)
    u = FeFunction(V, np.random.default_rng(0).uniform(-1, 1, V.dof_count))
    for s in (0.0, 0.25, 0.5, 0.75):
        t, f = dual_gradient_norm(u, s), dual_gradient_norm(u, s, "full")
        assert t > 0 and f > 0
    # more test functions can only increase a sup
    assert dual_gradient_norm(u, 0.25, "full") >= dual_gradient_norm(u, 0.25, "tilde") * (1 - 1e-12)
    with pytest.raises(ValueError):
        DualGradientOperator(V, 0.5, "other")


def test_gram_budget():
    m = triangulate(unit_square(), 0.03)
    V = build_space(m, 1)
    assert V.dof_count > GRAM_MAX_DOFS
    with pytest.raises(GramAssemblyBudget):
        DualGradientOperator(V, 0.5)


def test_h00(coarse):
    V = build_space(coarse, 1)
    c = np.random.default_rng(3).uniform(-1, 1, V.dof_count)
    with pytest.raises(NonzeroTrace):
        h00_half_norm(FeFunction(V, c))
    c[V.boundary_dofs] = 0
    u = FeFunction(V, c)
    A = gram(V, 0.5)
    assert h00_half_norm(u, gram_half=A) == pytest.approx(h00_half_norm(u), rel=1e-10)
    assert h00_half_norm(u) > classical_norms(u)[0]


def test_h00_distance_function_converges():
    vals = []
    for h in (0.2, 0.1):
        m = triangulate(unit_square(), h)
        V = build_space(m, 1)
        rho = lambda P: np.minimum.reduce([P[:, 0], 1 - P[:, 0], P[:, 1], 1 - P[:, 1]])
        u = interpolate(V, rho)
        vals.append(h00_half_norm(u))
    # the finer value is closer to the Monte-Carlo based limit
    assert vals[0] < vals[1]


def test_gram_is_psd_and_kills_constants(coarse):
    V = build_space(coarse, 1)
    A = gram(V, 0.5)
    assert np.allclose(A, A.T, atol=1e-12 * np.abs(A).max())
    assert np.abs(A @ np.ones(V.dof_count)).max() < 1e-9 * np.abs(A).max()
    assert np.linalg.eigvalsh(A).min() > -1e-9 * np.abs(A).max()


# properties -------------------------------------------------------------------------

_V = {}


def _space():
    if "V" not in _V:
        V = build_space(triangulate(lshape(), 0.6), 1)
        _V["V"] = V
        _V["A"] = {s: gram(V, s) for s in (0.25, 0.5, 0.75)}
    return _V["V"], _V["A"]


coeffs = st.integers(0, 2**31).map(lambda seed: np.random.default_rng(seed))


@settings(max_examples=5)
@given(coeffs, st.lists(st.floats(-50, 50).filter(lambda a: abs(a) > 1e-3), min_size=3, max_size=3))
def test_homogeneity(rng, scales):
    V, A = _space()
    u = FeFunction(V, rng.uniform(-1, 1, V.dof_count))
    base = norm_report(u, 0.5, names=[n for n in NORM_COLUMNS if n not in ("gagliardo", "quotient")]).values
    base["gagliardo"] = math.sqrt(u.coeffs @ A[0.5] @ u.coeffs)
    for a in scales:
        v = u * a
        got = norm_report(v, 0.5, names=[n for n in NORM_COLUMNS if n not in ("gagliardo", "quotient")]).values
        got["gagliardo"] = math.sqrt(v.coeffs @ A[0.5] @ v.coeffs)
        for k, val in base.items():
            assert got[k] == pytest.approx(abs(a) * val, rel=1e-12, abs=1e-300)


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_affine_seminorm_isotropy_on_square(a, b):
    # x -> 1 - x symmetry kills the cross term, x <-> y symmetry equalizes the diagonal
    m = triangulate(unit_square(), 0.5)
    V = build_space(m, 1)
    A = gram(V, 0.5)
    P = V.dof_coords
    c = a * P[:, 0] + b * P[:, 1]
    x = P[:, 0]
    # the mesh itself is not symmetric, so only quadrature-level agreement is expected
    assert c @ A @ c == pytest.approx((a * a + b * b) * (x @ A @ x), rel=1e-3, abs=1e-12)


@given(coeffs, st.sampled_from([0.25, 0.5, 0.75]))
def test_seminorm_triangle_inequality(rng, s):
    V, A = _space()
    u, v = rng.uniform(-1, 1, (2, V.dof_count))
    n = lambda c: math.sqrt(max(c @ A[s] @ c, 0.0))
    assert n(u + v) <= n(u) + n(v) + 1e-12


@given(coeffs)
def test_quotient_sees_no_constants(rng):
    V, A = _space()
    u = FeFunction(V, rng.uniform(-1, 1, V.dof_count))
    k = float(rng.uniform(-10, 10))
    assert quotient_norm(u + k, 0.0) == pytest.approx(quotient_norm(u, 0.0), rel=1e-10)
    assert u.coeffs @ A[0.25] @ u.coeffs == pytest.approx((u + k).coeffs @ A[0.25] @ (u + k).coeffs, rel=1e-8)


# reports ---------------------------------------------------------------------------


def test_norm_report_roundtrip(coarse, tmp_path):
    V = build_space(coarse, 1)
    u = FeFunction(V, np.random.default_rng(5).uniform(-1, 1, V.dof_count))
    r = norm_report(u, 0.5, function="rand")
    assert set(r.values) == set(NORM_COLUMNS) - {"h00_half"}
    c = norm_report(interpolate(V, 2.0), 0.5, names=["l2", "grad_l2", "gagliardo"], function="const")
    assert c.flags == {"grad_l2": "constant", "gagliardo": "constant"}
    write_reports([r, c], tmp_path / "a.csv")
    write_reports([r, c], tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    back = read_reports(tmp_path / "a.csv")
    assert all(back[0][k] == v for k, v in r.values.items())
    assert math.isnan(back[1]["h1"])
    with pytest.raises(ValueError):
        NormReport({"l2": -1.0}, "f", "m", 0.5)
