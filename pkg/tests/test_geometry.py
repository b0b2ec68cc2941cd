import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lipschitz_lab.errors import DegenerateEdge, InvalidEps, SelfIntersecting, UnknownTag
from lipschitz_lab.geometry import (GAMMA_TAG, SawtoothParams, boundary_parametrization, contains,
                                    distance_to_boundary, interior_angles, lshape, make_polygon, make_sawtooth,
                                    read_polygon, regularized_distance, sector, unit_square, write_polygon)


def test_square_basics():
    d = unit_square()
    assert d.n == 4 and d.area == pytest.approx(1.0)
    assert d.boundary_length == pytest.approx(4.0)
    assert all(w == pytest.approx(math.pi / 2) for _, w in d.corner_angles)
    assert d.is_convex()
    assert np.allclose(d.centroid(), [0.5, 0.5])


def test_lshape_reentrant_corner():
    d = lshape()
    assert d.area == pytest.approx(3.0)
    assert not d.is_convex()
    big = [(i, w) for i, w in d.corner_angles if w > math.pi]
    assert len(big) == 1
    assert big[0][1] == pytest.approx(1.5 * math.pi)
    assert np.allclose(d.vertices[big[0][0]], [0, 0])
    assert sum(w for _, w in d.corner_angles) == pytest.approx((d.n - 2) * math.pi)


def test_clockwise_input_is_reversed_with_tags():
    d = make_polygon([(0, 0), (0, 1), (1, 1), (1, 0)], tags=["left", "top", "right", "bottom"])
    assert d.area > 0
    for seg in boundary_parametrization(d):
        mid = (seg.start + seg.end) / 2
        want = {"left": mid[0] == 0, "top": mid[1] == 1, "right": mid[0] == 1, "bottom": mid[1] == 0}
        assert want[seg.tag]


def test_collinear_vertices_merged():
    d = make_polygon([(0, 0), (0.5, 0), (1, 0), (1, 1), (0, 1)])
    assert d.n == 4


def test_invalid_polygons():
    with pytest.raises(DegenerateEdge):
        make_polygon([(0, 0), (0, 0), (1, 1)])
    with pytest.raises(DegenerateEdge):
        make_polygon([(0, 0), (1, 0)])
    with pytest.raises(SelfIntersecting):
        make_polygon([(0, 0), (1, 1), (1, 0), (0, 1)])


def test_sawtooth_layout():
    p = SawtoothParams(2)
    assert p.eps == pytest.approx(1 / 8)
    d = make_sawtooth(p)
    eps = p.eps
    v = d.vertices
    for j in range(2 * p.k + 1):
        x = j * eps
        y = eps if j % 2 else 0.0
        assert np.any(np.all(np.isclose(v, [x, y]), axis=1)), (x, y)
    assert d.tags.count(GAMMA_TAG) == 2 * p.k
    teeth = boundary_parametrization(d, GAMMA_TAG)
    assert sum(s.length for s in teeth) == pytest.approx(0.5 * math.sqrt(2))


def test_sawtooth_params_errors():
    for bad in (0, -1, 1.5, True):
        with pytest.raises(InvalidEps):
            SawtoothParams(bad)
    assert SawtoothParams.from_eps(1 / 16).k == 4
    with pytest.raises(InvalidEps):
        SawtoothParams.from_eps(0.3)


def test_unknown_tag():
    with pytest.raises(UnknownTag):
        boundary_parametrization(unit_square(), "nope")


def test_parametrization_normals_outward():
    d = lshape()
    segs = boundary_parametrization(d)
    assert sum(s.length for s in segs) == pytest.approx(d.boundary_length)
    for s in segs:
        mid = (s.start + s.end) / 2
        assert contains(d, mid - 1e-6 * s.normal)
        assert not contains(d, mid + 1e-6 * s.normal)


def test_polygon_roundtrip(tmp_path):
    d = make_sawtooth(3)
    write_polygon(d, tmp_path / "p.txt")
    e = read_polygon(tmp_path / "p.txt")
    assert np.array_equal(d.vertices, e.vertices)
    assert d.tags == e.tags


def test_sector_angle():
    d = sector(1.5 * math.pi, n_arc=40)
    assert dict(d.corner_angles)[0] == pytest.approx(1.5 * math.pi)
    assert [w for _, w in interior_angles(d)][-1] == pytest.approx(1.5 * math.pi)


pts = st.tuples(st.floats(0.001, 0.999), st.floats(0.001, 0.999))


@given(pts)
def test_square_distance_closed_form(p):
    x, y = p
    assert distance_to_boundary(unit_square(), p) == pytest.approx(min(x, 1 - x, y, 1 - y), abs=1e-14)


@given(st.lists(pts, min_size=1, max_size=20))
def test_regularized_distance_sandwich(P):
    for d in (unit_square(), make_sawtooth(2)):
        P = np.array(P) * [1, 0.5] if d.n > 4 else np.array(P)
        rho = distance_to_boundary(d, P)
        sig = regularized_distance(d, P)
        assert np.all(sig <= rho + 1e-15)
        assert np.all(sig >= rho / 2 - 1e-15)


def test_distance_outside_is_zero():
    assert distance_to_boundary(lshape(), (0.5, -0.5)) == 0.0
    assert distance_to_boundary(unit_square(), (0.0, 0.3)) == 0.0


@given(st.integers(3, 12), st.floats(0.1, 3.0), st.floats(-5, 5), st.floats(-5, 5))
def test_regular_polygon_properties(n, r, cx, cy):
    th = 2 * np.pi * np.arange(n) / n
    d = make_polygon(np.column_stack((cx + r * np.cos(th), cy + r * np.sin(th))))
    assert d.is_convex()
    assert d.area == pytest.approx(0.5 * n * r * r * math.sin(2 * math.pi / n))
    assert np.allclose(d.centroid(), [cx, cy], atol=1e-9 * max(1, r))
    assert sum(w for _, w in d.corner_angles) == pytest.approx((n - 2) * math.pi)


@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=2, max_size=30))
def test_distance_is_one_lipschitz(P):
    P = np.array(P)
    r = distance_to_boundary(lshape(), P)
    D = np.hypot(*(P[:, None] - P[None]).transpose(2, 0, 1))
    assert np.all(np.abs(r[:, None] - r[None]) <= D + 1e-12)


@pytest.mark.parametrize("dom", [unit_square, lshape, lambda: make_sawtooth(3), lambda: sector(4.0, 20)])
def test_regularized_distance_on_grid(dom):
    d = dom()
    lo, hi = d.vertices.min(0), d.vertices.max(0)
    g = np.stack(np.meshgrid(*[np.linspace(a, b, 61) for a, b in zip(lo, hi)]), -1).reshape(-1, 2)
    g = g[contains(d, g)]
    rho, sig = distance_to_boundary(d, g), regularized_distance(d, g)
    ok = rho > 0
    assert np.all(sig[ok] >= 0.5 * rho[ok]) and np.all(sig[ok] <= 1.5 * rho[ok])


@pytest.mark.parametrize("k", [1, 2, 5, 16])
def test_sawtooth_hausdorff_to_axis(k):
    d = make_sawtooth(k)
    eps = SawtoothParams(k).eps
    t = np.linspace(0, 1, 101)
    pts = np.concatenate([s.start + t[:, None] * (s.end - s.start) for s in boundary_parametrization(d, GAMMA_TAG)])
    # farthest tooth point from the axis, and farthest axis point from the teeth
    far1 = pts[:, 1].max()
    axis = np.column_stack((np.linspace(0, 0.5, 401), np.zeros(401)))
    far2 = np.min(np.hypot(*(axis[:, None] - pts[None]).transpose(2, 0, 1)), axis=1).max()
    assert max(far1, far2) == pytest.approx(eps, abs=1e-12)


@pytest.mark.parametrize("dom", [unit_square, lshape, lambda: make_sawtooth(4), lambda: sector(5.5, 30)])
def test_exterior_angles_sum(dom):
    assert sum(math.pi - w for _, w in dom().corner_angles) == pytest.approx(2 * math.pi)
