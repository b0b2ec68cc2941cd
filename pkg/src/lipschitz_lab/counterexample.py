"""The y-only function with a log-log trace singularity and the sawtooth family.

    v(x, y) = int_0^y ds int_{1/2}^s dt / (t ln t)

has v_y = ln(-ln y) - ln(ln 2) and v_yy = 1 / (y ln y).  In closed form

    v(y) = y ln(-ln y) + E1(-ln y) - y ln(ln 2),

with E1 the exponential integral.  On the sawtooth domains the tangential
derivative of v on the teeth blows up in L2 as eps -> 0, while the
harmonic correction w = v - u (u the zero-trace solution of
Delta u = Delta v) stays bounded in the weighted-Hessian surrogate for H^(3/2).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate
from scipy.linalg import eigh
from scipy.special import exp1

from .errors import InvalidEps, OutOfRange
from .fem import FeFunction, FeSpace, build_space, interpolate, mass, solve_dirichlet, stiffness, weak_laplacian_residual
from .fields import Field
from .geometry import GAMMA_TAG, SawtoothParams, boundary_parametrization, distance_to_boundary, make_sawtooth
from .meshing import Mesh, boundary_edges, mesh_domain, triangulate
from .norms.core import _cell_integral
from .quadrature import gauss_interval

LN_LN2 = math.log(math.log(2.0))
BOUND_CONST = 1 / (2 * math.sqrt(2))


# the function ----------------------------------------------------------------


def _vy(y):
    return np.log(-np.log(y)) - LN_LN2


def _v(y):
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    pos = y > 0
    yp = y[pos]
    L = -np.log(yp)
    out[pos] = yp * np.log(L) + exp1(L) - yp * LN_LN2
    return out


def _check_y(y, deriv):
    y = np.asarray(y, dtype=float)
    lo_bad = (y <= 0) if deriv != "value" else (y < 0)
    if np.any(lo_bad | (y >= 1)):
        raise OutOfRange(f"y outside the admissible range for {deriv!r}")
    return y


def necas_eval(p, deriv: str = "value"):
    """Value, gradient (0, v_y) or Hessian diag(0, v_yy) at a point or (n, 2) array."""
    P = np.asarray(p, dtype=float)
    single = P.ndim == 1
    P = np.atleast_2d(P)
    y = _check_y(P[:, 1], deriv)
    if deriv == "value":
        out = _v(y)
    elif deriv == "grad":
        out = np.column_stack((np.zeros(len(y)), _vy(y)))
    elif deriv == "hess":
        out = np.zeros((len(y), 2, 2))
        out[:, 1, 1] = 1.0 / (y * np.log(y))
    else:
        raise ValueError(f"unknown derivative {deriv!r}")
    return out[0] if single else out


def necas_field() -> Field:
    """v as a Field; derivatives at y = 0 (tooth valleys) are not evaluated by any rule used here."""
    return Field(
        lambda P: necas_eval(P, "value"),
        lambda P: necas_eval(P, "grad"),
        lambda P: necas_eval(P, "hess"),
        "necas_v",
    )


def laplacian_v(P):
    return 1.0 / (P[:, 1] * np.log(P[:, 1]))


def vy_by_quadrature(y: float) -> float:
    """int_y^{1/2} dt / (t |ln t|) by adaptive quadrature in s = ln t."""
    if not 0 < y < 1:
        raise OutOfRange("y must lie in (0, 1)")
    val, _ = integrate.quad(lambda s: -1.0 / s, math.log(y), -math.log(2.0), epsabs=1e-13, epsrel=1e-13)
    return val


# the trace blow-up ------------------------------------------------------------


def _params(params) -> SawtoothParams:
    if isinstance(params, SawtoothParams):
        return params
    if isinstance(params, (int, np.integer)):
        return SawtoothParams(int(params))
    raise InvalidEps(f"expected SawtoothParams or k, got {params!r}")


def i_eps(eps: float):
    """(int_0^eps (ln(-ln x) - ln ln 2)^2 dx, (eps/2) ln(-ln eps)^2)."""
    if not 0 < eps < 0.1:
        raise InvalidEps(f"eps must lie in (0, 0.1), got {eps}")
    return _i_eps(eps), eps / 2 * math.log(-math.log(eps)) ** 2


def _i_eps(eps: float) -> float:
    # x = eps e^{-u} moves the endpoint singularity to infinity
    f = lambda u: eps * math.exp(-u) * (math.log(-math.log(eps) + u) - LN_LN2) ** 2
    val, _ = integrate.quad(f, 0.0, math.inf, epsabs=1e-14, epsrel=1e-12, limit=200)
    return val


def trace_lower_bound(eps: float) -> float:
    return BOUND_CONST * math.log(-math.log(eps))


def _graded_rule(n: int = 8, levels: int = 50):
    """Rule on [0, 1] geometrically graded toward 0."""
    t, w = gauss_interval(n)
    pts, wts = [], []
    for j in range(levels):
        a, b = 2.0 ** -(j + 1), 2.0**-j
        pts.append(a + (b - a) * t)
        wts.append((b - a) * w)
    return np.concatenate(pts), np.concatenate(wts)


def tangential_trace_norm(params, method: str = "analytic") -> float:
    """||d_tau v||_{L2(Gamma_eps)} on the teeth.

    ``analytic``: each tooth side has arc length sqrt(2) eps and
    d_tau v = +-v_y / sqrt(2), so the squared norm is sqrt(2) k I_eps.
    ``quadrature``: edge-by-edge Gauss rules graded toward the valleys.
    """
    p = _params(params)
    eps = p.eps
    if method == "analytic":
        return math.sqrt(math.sqrt(2) * p.k * _i_eps(eps))
    if method == "quadrature":
        return _trace_by_edges(p)
    raise ValueError(f"unknown method {method!r}")


def _trace_by_edges(p: SawtoothParams) -> float:
    d = make_sawtooth(p)
    t, w = _graded_rule()
    total = 0.0
    for seg in boundary_parametrization(d, GAMMA_TAG):
        # parametrize from the valley end, where v_y is singular
        a, b = (seg.start, seg.end) if seg.start[1] < seg.end[1] else (seg.end, seg.start)
        P = a + t[:, None] * (b - a)
        g = necas_eval(P, "grad") @ seg.tangent
        total += float((g**2) @ w) * seg.length
    return math.sqrt(total)


# weighted Hessian of v on the square ]0, 1/2[^2 -----------------------------


def necas_weighted_hessian_sq(levels: int, n: int = 8) -> float:
    """int over ]0,1/2[^2 of rho |D^2 v|^2 with 2^levels composite Gauss panels per direction.

    In the variable u = -1/ln y one has du = dy / (y ln^2 y), so
    rho v_yy^2 dy = (rho / y) du with a bounded integrand on u in (0, 1/ln 2).
    """
    t, w = gauss_interval(n)
    m = 2**levels
    edges = np.linspace(0.0, 1.0, m + 1)
    s = (edges[:-1, None] + np.diff(edges)[:, None] * t[None, :]).ravel()
    ws = np.repeat(np.diff(edges), n) * np.tile(w, m)
    umax = 1 / math.log(2.0)
    u, wu = s * umax, ws * umax
    y = np.exp(-1.0 / u)
    x, wx = s * 0.5, ws * 0.5
    X, Y = np.meshgrid(x, y, indexing="ij")
    # rho / y, with y underflowing to 0 near u = 0 where the ratio is 1
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.minimum(np.minimum(X, 0.5 - X) / Y, np.minimum(1.0, (0.5 - Y) / Y))
    return float(wx @ r @ wu)


# the harmonic correction -----------------------------------------------------


@dataclass(frozen=True)
class MeshConfig:
    """Tooth-resolving mesh: at least ``per_edge`` elements on every tooth side."""

    per_edge: int = 8
    h: float = 0.05
    growth: float = 0.5
    order: int = 2


def sawtooth_mesh(params, cfg: MeshConfig = MeshConfig()) -> Mesh:
    p = _params(params)
    d = make_sawtooth(p)
    seg = p.eps * math.sqrt(2) / cfg.per_edge
    tags = d.tags
    size = lambda P: seg + cfg.growth * np.maximum(P[:, 1] - p.eps, 0.0)
    return triangulate(d, cfg.h, size_fn=size, segment_h=lambda i: seg if tags[i] == GAMMA_TAG else cfg.h)


class CorrectionReport(NamedTuple):
    k: int
    eps: float
    l2_w: float
    wh2_w: float
    boundary_l2_w: float
    boundary_h1_w: float
    l2_v: float
    residual_w: float
    consistency: float
    poincare: float
    dofs: int
    h_max: float


def _v_minus(u: FeFunction):
    """Element-wise evaluators of w = v - u at reference points."""

    def val(cells, X, P):
        return _v(P[..., 1]) - u.cell_values(X, cells)

    def hess(cells, X, P):
        H = -u.cell_hessians(cells)[:, None]
        Hv = np.zeros(P.shape + (2,))
        y = P[..., 1]
        Hv[..., 1, 1] = 1.0 / (y * np.log(y))
        return Hv + H

    return val, hess


def discrete_poincare(space: FeSpace) -> float:
    """sqrt(1 / lambda_min) for the zero-trace generalized eigenproblem K x = lambda M x."""
    from scipy.sparse.linalg import eigsh

    I = space.interior_dofs
    K = stiffness(space)[I][:, I].tocsc()
    M = mass(space)[I][:, I].tocsc()
    if len(I) < 400:
        lam = eigh(K.toarray(), M.toarray(), eigvals_only=True, subset_by_index=[0, 0])[0]
    else:
        lam = eigsh(K, k=1, M=M, sigma=0.0, which="LM", return_eigenvectors=False)[0]
    return 1.0 / math.sqrt(lam)


def corrected_harmonic(params, cfg: MeshConfig = MeshConfig(), levels: int = 2,
                       boundary_levels: int = 4) -> CorrectionReport:
    """Solve Delta u = Delta v with u = 0 on the boundary and measure w = v - u."""
    p = _params(params)
    m = sawtooth_mesh(p, cfg)
    V = build_space(m, cfg.order)
    f = lambda P: -laplacian_v(P)
    u = solve_dirichlet(V, f, 0.0, boundary_levels=boundary_levels)
    d = mesh_domain(m)
    val, hess = _v_minus(u)
    l2_w = _cell_integral(V, lambda c, X, P: val(c, X, P) ** 2, 6, levels, boundary_levels)
    l2_v = _cell_integral(V, lambda c, X, P: _v(P[..., 1]) ** 2, 6, levels, boundary_levels)

    def wh(c, X, P):
        rho = distance_to_boundary(d, P.reshape(-1, 2)).reshape(P.shape[:-1])
        return rho * (hess(c, X, P) ** 2).sum((-1, -2))

    wh2 = _cell_integral(V, wh, 6, levels, boundary_levels)
    # u vanishes on the boundary, so the traces of w and v coincide there
    bl2, bh1 = _gamma_norms(u, m)
    # discrete harmonicity of w_h = I_h v - u against the consistency of I_h v
    Iv = interpolate(V, lambda P: _v(P[:, 1]))
    consistency = weak_laplacian_residual(V, Iv, f, boundary_levels=boundary_levels)
    residual = weak_laplacian_residual(V, Iv - u, 0.0)
    return CorrectionReport(
        p.k, p.eps, math.sqrt(l2_w), math.sqrt(wh2), bl2, bh1, math.sqrt(l2_v),
        residual, consistency, discrete_poincare(build_space(m, 1)), V.dof_count, m.h_max,
    )


def _gamma_norms(u: FeFunction, m: Mesh):
    """(||w||_{L2(Gamma)}, ||d_tau w||_{L2(Gamma)}) for w = v - u on the teeth.

    u is a zero-trace FE function, identically zero on boundary edges, so
    only v contributes."""
    be = boundary_edges(m, GAMMA_TAG)
    t, w = _graded_rule(8, 40)
    l2 = h1 = 0.0
    for a, b, tau, L in zip(be.a, be.b, be.tangents, be.lengths):
        lo, hi = (a, b) if a[1] <= b[1] else (b, a)
        P = lo + t[:, None] * (hi - lo)
        l2 += float(_v(P[:, 1]) ** 2 @ w) * L
        h1 += float((necas_eval(P, "grad") @ tau) ** 2 @ w) * L
    return math.sqrt(l2), math.sqrt(h1)


# the family -------------------------------------------------------------------

CSV_COLUMNS = ("k", "eps", "bnorm_h1_gamma", "bound", "l2_w", "wh2_w", "l2_v", "mesh_dofs", "runtime_s")


class BlowupSeries(NamedTuple):
    rows: list          # dicts keyed by CSV_COLUMNS
    reports: list       # CorrectionReport per k


def blowup_study(ks, cfg: MeshConfig = MeshConfig(), record_timing: bool = False, parallel: bool = False,
                 **kw) -> BlowupSeries:
    ks = list(ks)
    if not ks or any(int(k) != k or k < 1 for k in ks):
        raise InvalidEps(f"k values must be positive integers, got {ks}")
    if ks != sorted(set(ks)):
        raise InvalidEps("k values must be strictly ascending")

    def one(k):
        t0 = time.perf_counter()
        rep = corrected_harmonic(int(k), cfg, **kw)
        return rep, time.perf_counter() - t0

    if parallel and len(ks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor() as ex:
            out = list(ex.map(_run_one, [(int(k), cfg, kw) for k in ks]))
    else:
        out = [one(k) for k in ks]
    rows = []
    for rep, dt in out:
        rows.append({
            "k": rep.k, "eps": rep.eps, "bnorm_h1_gamma": rep.boundary_h1_w,
            "bound": trace_lower_bound(rep.eps), "l2_w": rep.l2_w, "wh2_w": rep.wh2_w,
            "l2_v": rep.l2_v, "mesh_dofs": rep.dofs, "runtime_s": dt if record_timing else None,
        })
    return BlowupSeries(rows, [r for r, _ in out])


def _run_one(args):
    k, cfg, kw = args
    t0 = time.perf_counter()
    rep = corrected_harmonic(k, cfg, **kw)
    return rep, time.perf_counter() - t0


def write_series(series: BlowupSeries, csv_path, svg_path=None) -> None:
    from .lab.report import svg_line_plot, write_csv

    write_csv(csv_path, CSV_COLUMNS, series.rows)
    if svg_path is not None:
        xs = [math.log(-math.log(r["eps"])) for r in series.rows]
        svg_line_plot(
            svg_path,
            {"|w|_H1(Gamma)": (xs, [r["bnorm_h1_gamma"] for r in series.rows]),
             "lower bound": (xs, [r["bound"] for r in series.rows])},
            xlabel="ln(-ln eps)", ylabel="boundary norm", title="tangential trace blow-up",
        )


def fit_slope(series: BlowupSeries) -> float:
    x = np.array([math.log(-math.log(r["eps"])) for r in series.rows])
    y = np.array([r["bnorm_h1_gamma"] for r in series.rows])
    return float(np.polyfit(x, y, 1)[0])
