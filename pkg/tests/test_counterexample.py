import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lipschitz_lab import counterexample as cx
from lipschitz_lab.errors import InvalidEps, OutOfRange
from lipschitz_lab.geometry import SawtoothParams


def test_vy_examples():
    assert cx.necas_eval((0.3, 0.5), "grad")[1] == pytest.approx(0.0, abs=1e-15)
    assert cx.necas_eval((0.3, 0.1), "grad")[1] == pytest.approx(1.2005, abs=1e-4)
    assert cx.necas_eval((0.3, 0.1), "grad")[0] == 0.0


def test_vyy_example_and_sign():
    H = cx.necas_eval((0.2, 0.1), "hess")
    assert H[1, 1] == pytest.approx(-4.3429, abs=1e-4)
    assert H[0, 0] == H[0, 1] == H[1, 0] == 0.0
    h = 1e-6
    fd = (cx.necas_eval((0, 0.1 + h), "grad")[1] - cx.necas_eval((0, 0.1 - h), "grad")[1]) / (2 * h)
    assert H[1, 1] == pytest.approx(fd, rel=1e-7)
    assert cx.laplacian_v(np.array([[0.2, 0.1]]))[0] == pytest.approx(H[1, 1])


def test_value_is_antiderivative():
    y = np.linspace(0.01, 0.9, 40)
    P = np.column_stack((np.zeros_like(y), y))
    h = 1e-6
    fd = (cx.necas_eval(P + [0, h]) - cx.necas_eval(P - [0, h])) / (2 * h)
    assert np.allclose(fd, cx.necas_eval(P, "grad")[:, 1], atol=1e-7)
    assert cx.necas_eval((0.4, 0.0)) == 0.0


def test_out_of_range():
    with pytest.raises(OutOfRange):
        cx.necas_eval((0.1, -0.1))
    with pytest.raises(OutOfRange):
        cx.necas_eval((0.1, 1.0))
    with pytest.raises(OutOfRange):
        cx.necas_eval((0.1, 0.0), "grad")


def test_vy_against_frozen_quadrature(oracles):
    for y, ref in oracles["necas_vy"].items():
        y = float(y)
        assert cx.necas_eval((0, y), "grad")[1] == pytest.approx(ref, abs=1e-8)
        assert cx.vy_by_quadrature(y) == pytest.approx(ref, abs=1e-8)


@given(st.floats(1e-4, 0.49))
def test_vy_paths_agree(y):
    assert cx.necas_eval((0, y), "grad")[1] == pytest.approx(cx.vy_by_quadrature(y), abs=1e-8)


def test_field_wrapper():
    f = cx.necas_field()
    P = np.array([[0.1, 0.2], [0.3, 0.05]])
    assert np.allclose(f(P), cx.necas_eval(P))
    assert np.allclose(f.grad(P), cx.necas_eval(P, "grad"))


def test_i_eps_examples(oracles):
    q, b = cx.i_eps(1 / 16)
    assert b == pytest.approx(0.0325, abs=1e-4) and q >= b
    q, b = cx.i_eps(1 / 64)
    assert b == pytest.approx(0.01587, abs=1e-5) and q >= b
    for k, ref in oracles["i_eps"].items():
        eps = 1 / (4 * int(k))
        if eps < 0.1:
            assert cx.i_eps(eps)[0] == pytest.approx(ref, rel=1e-9)
    with pytest.raises(InvalidEps):
        cx.i_eps(0.25)
    with pytest.raises(InvalidEps):
        cx.i_eps(0.0)


@given(st.floats(1e-8, 0.0999))
def test_i_eps_dominates_bound(eps):
    q, b = cx.i_eps(eps)
    assert 0 < b <= q


def test_trace_lower_bound_example():
    assert cx.trace_lower_bound(1 / 16) == pytest.approx(0.3606, abs=1e-4)


@pytest.mark.parametrize("k", [1, 2, 4, 16, 64])
def test_trace_norm_paths_agree(k):
    a = cx.tangential_trace_norm(k)
    q = cx.tangential_trace_norm(SawtoothParams(k), "quadrature")
    assert a == pytest.approx(q, rel=5e-3)
    assert a >= cx.trace_lower_bound(SawtoothParams(k).eps)


def test_trace_norm_growth():
    v = [cx.tangential_trace_norm(k) for k in (2, 4, 16)]
    assert v[0] < v[1] < v[2]


def test_weighted_hessian_of_v_is_finite():
    vals = [cx.necas_weighted_hessian_sq(lev) for lev in (3, 4, 5, 6)]
    diffs = np.abs(np.diff(vals)) / vals[-1]
    assert np.all(diffs < 0.01)
    assert np.isfinite(vals[-1])


@pytest.fixture(scope="module")
def report2():
    return cx.corrected_harmonic(2)


def test_corrected_harmonic_report(report2):
    r = report2
    assert r.k == 2 and r.eps == 1 / 8
    # boundary identity: u vanishes on the teeth
    assert r.boundary_h1_w == pytest.approx(cx.tangential_trace_norm(2), rel=0.01)
    assert r.residual_w <= 10 * r.consistency
    assert 0 < r.l2_w < r.l2_v
    assert r.poincare < 0.5
    assert r.boundary_h1_w >= cx.trace_lower_bound(r.eps)


def test_mesh_resolves_teeth():
    from lipschitz_lab.geometry import GAMMA_TAG
    from lipschitz_lab.meshing import boundary_edges

    p = SawtoothParams(4)
    m = cx.sawtooth_mesh(p)
    be = boundary_edges(m, GAMMA_TAG)
    # 2k tooth sides, each split into at least 8 pieces
    assert len(be.lengths) >= 8 * 2 * p.k
    assert be.lengths.max() <= p.eps * math.sqrt(2) / 8 * (1 + 1e-9)


def test_blowup_study_inputs():
    with pytest.raises(InvalidEps):
        cx.blowup_study([0])
    with pytest.raises(InvalidEps):
        cx.blowup_study([4, 2])


def test_series_csv_deterministic(tmp_path):
    s1 = cx.blowup_study([1, 2])
    s2 = cx.blowup_study([1, 2])
    cx.write_series(s1, tmp_path / "a.csv", tmp_path / "a.svg")
    cx.write_series(s2, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    text = (tmp_path / "a.csv").read_text().splitlines()
    assert text[0] == ",".join(cx.CSV_COLUMNS)
    assert text[1].endswith(",")  # runtime_s left blank unless timing is requested
    assert "<polyline" in (tmp_path / "a.svg").read_text()
    rows = s1.rows
    assert rows[0]["bnorm_h1_gamma"] < rows[1]["bnorm_h1_gamma"]
    assert all(r["bound"] <= r["bnorm_h1_gamma"] for r in rows)
