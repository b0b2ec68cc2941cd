import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lipschitz_lab import fields as F
from lipschitz_lab.errors import BadOrder, HessOnP1, OutsideMesh
from lipschitz_lab.fem import (FeFunction, assemble, build_space, eval, harmonic_extension, integrate,
                               interpolate, load_vector, mass, prolong, read_function, solve_dirichlet, stiffness,
                               weak_laplacian_residual, write_function)
from lipschitz_lab.geometry import lshape, unit_square
from lipschitz_lab.meshing import refine, triangulate, write_mesh
from lipschitz_lab.norms import classical_norms


@pytest.fixture(scope="module")
def sq():
    return triangulate(unit_square(), 0.2)


@pytest.mark.parametrize("order", [1, 2])
def test_matrices(sq, order):
    V = build_space(sq, order)
    M, K = mass(V), stiffness(V)
    one = np.ones(V.dof_count)
    assert one @ M @ one == pytest.approx(1.0)
    assert np.abs(K @ one).max() < 1e-12
    assert abs(K - K.T).max() < 1e-12
    x = V.dof_coords[:, 0]
    assert x @ K @ x == pytest.approx(1.0)
    assert abs(assemble(V, "mass") - M).max() == 0


def test_bad_order(sq):
    with pytest.raises(BadOrder):
        build_space(sq, 3)


def test_interpolation_exact(sq):
    V1, V2 = build_space(sq, 1), build_space(sq, 2)
    P = np.random.default_rng(1).uniform(0.05, 0.95, (30, 2))
    lin = interpolate(V1, F.linear(2.0, -1.0, 0.5))
    quad = interpolate(V2, F.monomial_x2())
    assert np.allclose(eval(lin, P), 2 * P[:, 0] - P[:, 1] + 0.5)
    assert np.allclose(eval(quad, P), P[:, 0] ** 2)
    assert np.allclose(eval(quad, P, "grad"), np.column_stack((2 * P[:, 0], 0 * P[:, 0])))
    assert np.allclose(quad.cell_hessians()[:, 0, 0], 2.0)
    with pytest.raises(HessOnP1):
        lin.cell_hessians()


def test_eval_outside(sq):
    u = interpolate(build_space(sq, 1), 1.0)
    with pytest.raises(OutsideMesh):
        eval(u, (1.5, 0.5))


def test_p2_reproduces_quadratic_harmonic():
    m = triangulate(lshape(), 0.3)
    V = build_space(m, 2)
    g = F.harmonic_poly(2)
    u = harmonic_extension(V, g)
    assert np.abs(u.coeffs - g(V.dof_coords)).max() < 1e-11


def test_manufactured_convergence():
    f = lambda P: 2 * math.pi**2 * F.sinsin()(P)
    errs = {1: [], 2: []}
    m = triangulate(unit_square(), 0.25)
    for _ in range(3):
        for k in (1, 2):
            V = build_space(m, k)
            u = solve_dirichlet(V, f)
            e = u - interpolate(V, F.sinsin())
            errs[k].append(classical_norms(e)[0])
            assert weak_laplacian_residual(V, u, f) < 1e-10
        m = refine(m)
    r1 = math.log2(errs[1][-2] / errs[1][-1])
    r2 = math.log2(errs[2][-2] / errs[2][-1])
    assert r1 > 1.7 and r2 > 2.5


def test_load_vector_forms(sq):
    V = build_space(sq, 2)
    u = interpolate(V, F.sinsin())
    assert np.allclose(load_vector(V, u), mass(V) @ u.coeffs)
    assert load_vector(V, 1.0).sum() == pytest.approx(1.0)
    assert integrate(V, lambda P: P[:, 0] * P[:, 1]) == pytest.approx(0.25)


def test_prolong_exact_on_nested(sq):
    V = build_space(sq, 2)
    W = build_space(refine(sq), 2)
    u = FeFunction(V, np.random.default_rng(0).normal(size=V.dof_count))
    v = prolong(u, W)
    P = np.random.default_rng(2).uniform(0.01, 0.99, (50, 2))
    assert np.allclose(eval(u, P), eval(v, P))


def test_function_roundtrip(sq, tmp_path):
    write_mesh(sq, tmp_path / "m.txt")
    V = build_space(sq, 2)
    u = interpolate(V, F.sinsin())
    write_function(u, tmp_path / "u.txt", "m.txt")
    v = read_function(tmp_path / "u.txt")
    assert np.array_equal(u.coeffs, v.coeffs) and v.space.order == 2


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31))
def test_linear_algebra_of_functions(a, b, seed):
    m = triangulate(unit_square(), 0.35)
    V = build_space(m, 1)
    rng = np.random.default_rng(seed)
    u = FeFunction(V, rng.normal(size=V.dof_count))
    v = FeFunction(V, rng.normal(size=V.dof_count))
    w = u * a + v * b
    K = stiffness(V)
    assert np.allclose(w.coeffs, a * u.coeffs + b * v.coeffs)
    assert u.coeffs @ K @ u.coeffs >= -1e-12
    # Dirichlet solve is linear in the data
    s = solve_dirichlet(V, a, b)
    s1, s2 = solve_dirichlet(V, 1.0), solve_dirichlet(V, 0.0, 1.0)
    assert np.allclose(s.coeffs, a * s1.coeffs + b * s2.coeffs, atol=1e-10)


@given(st.integers(0, 2**31))
def test_discrete_maximum_principle(seed):
    m = triangulate(lshape(), 0.3)
    V = build_space(m, 1)
    rng = np.random.default_rng(seed)
    a = rng.uniform(-3, 3, 4)
    g = lambda P: np.sin(a[0] * P[:, 0] + a[1] * P[:, 1]) + a[2] * P[:, 0] * P[:, 1] + a[3]
    u = harmonic_extension(V, g)
    gb = g(V.dof_coords[V.boundary_dofs])
    assert u.coeffs.min() >= gb.min() - 1e-12 and u.coeffs.max() <= gb.max() + 1e-12


@pytest.mark.parametrize("order", [1, 2])
def test_galerkin_orthogonality(order):
    m = triangulate(lshape(), 0.2)
    V = build_space(m, order)
    f = lambda P: np.cos(P[:, 0]) + P[:, 1] ** 2
    u = solve_dirichlet(V, f, lambda P: P[:, 0] * P[:, 1])
    r = stiffness(V) @ u.coeffs - load_vector(V, f)
    assert np.abs(r[V.interior_dofs]).max() <= 1e-10


def test_energy_monotone_under_refinement():
    m = triangulate(lshape(), 0.3)
    energy = []
    for _ in range(4):
        u = solve_dirichlet(build_space(m, 1), 1.0)
        energy.append(classical_norms(u)[1])
        m = refine(m)
    assert all(b >= a for a, b in zip(energy, energy[1:]))
