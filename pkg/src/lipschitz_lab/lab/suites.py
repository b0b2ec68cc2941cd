"""Experiment suites: each check yields exactly one verdict (pass, fail or skipped)."""

from __future__ import annotations

import math
import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .. import counterexample as cx
from .. import fields as F
from ..errors import BadVectorField, LabError
from ..fem import (FeFunction, build_space, harmonic_extension, interpolate, mass, prolong,
                   solve_dirichlet, stiffness, weighted_mass)
from ..geometry import Domain, make_polygon
from ..meshing import Mesh, mesh_id, refine, triangulate
from ..norms import core, gagliardo
from ..norms.report import NORM_COLUMNS, META_COLUMNS, norm_report
from ..singular import (CornerFrame, critical_p, kernel_dimension, kernel_function, nu_s, radial_divergence,
                        w1p_membership)
from .config import ExperimentConfig

DRIFT_TOL = 0.20          # relative change of an empirical constant over one refinement
IDENTITY_TOL = 1e-3
NECAS_BOUND = 10.0
PAIR_TOL = 0.50
IDENTITY_H = 1 / 64

log = logging.getLogger("lipschitz_lab")


@dataclass
class Check:
    name: str
    verdict: str
    detail: str = ""
    values: dict = field(default_factory=dict)


@dataclass
class RunResult:
    name: str
    config: dict
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)   # name -> (columns, rows)
    plots: dict = field(default_factory=dict)    # name -> svg_line_plot kwargs
    artifacts: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.verdict != "fail" for c in self.checks)

    def verdict(self, name: str) -> str:
        return next(c.verdict for c in self.checks if c.name == name)


def _run(res: RunResult, name: str, fn, wanted):
    """Run one check; errors become a failing verdict instead of propagating."""
    if wanted is not None and name not in wanted:
        return
    log.info("%s: running", name)
    try:
        out = fn()
    except LabError as e:
        out = Check(name, "fail", f"{type(e).__name__}: {e}")
    except Exception as e:  # numerical breakdowns are recorded, not raised
        log.exception("check %s raised", name)
        out = Check(name, "fail", f"{type(e).__name__}: {e}")
    res.checks.append(out)


def _verdict(ok: bool) -> str:
    return "pass" if ok else "fail"


def _drift(a: float, b: float) -> float:
    return abs(b / a - 1.0) if a else math.inf


# shared pieces ----------------------------------------------------------------------


def _is_unit_square(d: Domain) -> bool:
    v = d.vertices
    return d.n == 4 and np.allclose(sorted(map(tuple, v.tolist())), [(0, 0), (0, 1), (1, 0), (1, 1)])


def _edge_data(u: FeFunction, n: int = 6):
    be, P, w, vals, g = core._edge_samples(u, u.space.mesh, None, n)
    return be, w, vals, g


def _broken_laplacian(u: FeFunction) -> np.ndarray:
    H = u.cell_hessians()
    return H[:, 0, 0] + H[:, 1, 1]


def _sinsin_problem(d: Domain, h: float):
    m = triangulate(d, h)
    V = build_space(m, 2)
    ss = F.sinsin()
    f = lambda P: 2 * math.pi**2 * ss(P)
    return V, solve_dirichlet(V, f), f


def rellich_sides(v: FeFunction, center):
    """(int_Gamma h.n (d_n v)^2, int [2 (h.grad v) Lap v + 2 |grad v|^2 - div h |grad v|^2]) for h = x - c."""
    V = v.space
    c = np.asarray(center, float)
    be, w, vals, g = _edge_data(v)
    hn = np.einsum("ei,ei->e", (be.a + be.b) / 2 - c, be.normals)
    dn = np.einsum("eqi,ei->eq", g, be.normals)
    lhs = float((hn[:, None] * dn**2) @ w @ be.lengths)
    lap = _broken_laplacian(v)

    def fn(cells, X, P):
        gv = v.cell_grads(X, cells)
        hg = np.einsum("tqi,tqi->tq", gv, P - c)
        g2 = (gv**2).sum(-1)
        # d_k h = e_k and div h = 2 for h = x - c
        return 2 * hg * lap[cells][:, None] + 2 * g2 - 2 * g2

    rhs = core._cell_integral(V, fn, 2 * V.order + 2)
    return lhs, rhs


def green_sides(phi: FeFunction, v: float = 1.0):
    """(int v Lap phi, int_Gamma v d_n phi) for constant v."""
    V = phi.space
    lap = _broken_laplacian(phi)
    lhs = v * float((lap * np.abs(V.det) / 2).sum())
    be, w, vals, g = _edge_data(phi)
    dn = np.einsum("eqi,ei->eq", g, be.normals)
    rhs = v * float((dn @ w * be.lengths).sum())
    return lhs, rhs


def _nested(d: Domain, h: float):
    """Function mesh and its first two red refinements (the evaluation meshes)."""
    m0 = triangulate(d, h)
    m1 = refine(m0)
    return m0, [m1, refine(m1)]


def _random_functions(space, n, seed, zero_mean=False, zero_trace=False):
    rng = np.random.default_rng(seed)
    C = rng.uniform(-1.0, 1.0, (n, space.dof_count))
    if zero_trace:
        C[:, space.boundary_dofs] = 0.0
    out = [FeFunction(space, c) for c in C]
    if zero_mean:
        out = [u - core.mean_value(u) for u in out]
    return out


class _GramCache:
    def __init__(self, space):
        self.space, self._g = space, {}

    def __call__(self, s):
        if s not in self._g:
            self._g[s] = gagliardo.gram(self.space, s)
        return self._g[s]


def _dual_factor(space, s, grams, M):
    """Cholesky factor and load matrices of the zero-trace dual test space."""
    I = space.interior_dofs
    G = grams(1 - s)[np.ix_(I, I)] + M[I][:, I].toarray()
    if abs(s - 0.5) < 1e-12:
        rho = core.distance_weight(space.mesh)
        G = G + weighted_mass(space, lambda P: 1.0 / np.maximum(rho(P), 1e-300))[I][:, I].toarray()
    return sla.cho_factor(G), core._load_matrices(space, I)


def _dual(u, cf, B):
    return math.sqrt(max(sum(float((b @ u.coeffs) @ sla.cho_solve(cf, b @ u.coeffs)) for b in B), 0.0))


# inequality suite -----------------------------------------------------------------


def run_inequality_suite(cfg: ExperimentConfig) -> RunResult:
    res = RunResult("inequalities", cfg.echo())
    d = cfg.build_domain()
    want = set(cfg.checks) if cfg.checks else None
    square = _is_unit_square(d)
    state = {}

    def sinsin():
        if "sinsin" not in state:
            state["sinsin"] = _sinsin_problem(d, IDENTITY_H)
        return state["sinsin"]

    def rellich():
        if not square:
            return Check("rellich", "skipped", "closed-form data and target are set on the unit square")
        t0 = time.perf_counter()
        V, v, f = sinsin()
        lhs, rhs = rellich_sides(v, (0.5, 0.5))
        target = math.pi**2
        errs = (abs(lhs - target) / target, abs(rhs - target) / target, abs(lhs - rhs) / abs(lhs))
        return Check("rellich", _verdict(max(errs) <= IDENTITY_TOL),
                     f"lhs={lhs:.6f} rhs={rhs:.6f} target={target:.6f}",
                     dict(lhs=lhs, rhs=rhs, target=target, max_rel_err=max(errs), seconds=time.perf_counter() - t0))

    def green():
        if not square:
            return Check("green", "skipped", "closed-form data and target are set on the unit square")
        V, phi, f = sinsin()
        lhs, rhs = green_sides(phi)
        errs = (abs(lhs + 8) / 8, abs(rhs + 8) / 8)
        return Check("green", _verdict(max(errs) <= IDENTITY_TOL), f"lhs={lhs:.6f} rhs={rhs:.6f} target=-8",
                     dict(lhs=lhs, rhs=rhs, target=-8.0, max_rel_err=max(errs)))

    def trace():
        m = triangulate(d, cfg.h)
        V = build_space(m, 2)
        u = interpolate(V, lambda P: F.sinsin()(P) + P[:, 0] + 1.0)
        try:
            lhs, rhs, ratio = core.trace_inequality_check(u)
        except BadVectorField as e:
            return Check("trace", "skipped", f"domain not star-shaped about its centroid: {e}")
        l2 = core.classical_norms(u)
        bl2 = core.boundary_norms(u)[0]
        const = bl2**2 / (l2[0] * l2[2])
        err = abs(lhs - rhs) / abs(lhs)
        return Check("trace", _verdict(err <= IDENTITY_TOL),
                     f"lhs={lhs:.6g} rhs={rhs:.6g} |L2(Gamma)|^2/(|L2| |H1|)={const:.4g}",
                     dict(lhs=lhs, rhs=rhs, rel_err=err, trace_constant=const))

    def sandwich():
        m0, levels = _nested(d, cfg.h)
        V0 = build_space(m0, 1)
        base = _random_functions(V0, cfg.n_random, cfg.seed, zero_mean=True)
        rows, consts = [], {}
        for lev, m in enumerate(levels, start=1):
            V = build_space(m, 1)
            us = [prolong(u, V) for u in base]
            M = mass(V)
            grams = _GramCache(V)
            for s in cfg.s_values:
                if not 0 < s < 1:
                    continue
                cf, B = _dual_factor(V, s, grams, M)
                Kw = core.weighted_stiffness(V, 2 * (1 - s))
                A = grams(s)
                q = np.array([math.sqrt(u.coeffs @ (M @ u.coeffs) + u.coeffs @ A @ u.coeffs) for u in us])
                du = np.array([_dual(u, cf, B) for u in us])
                w = np.array([math.sqrt(u.coeffs @ (Kw @ u.coeffs)) for u in us])
                C1 = float((q / du).max())
                C2 = float((C1 * du / w).max())
                ordered = bool(np.all(q <= C1 * du * (1 + 1e-12)) and np.all(C1 * du <= C2 * w * (1 + 1e-12)))
                consts[(lev, s)] = (C1, C2, ordered)
                for i in range(len(us)):
                    rows.append(dict(level=lev, mesh=mesh_id(m), s=float(s), function=i,
                                     quotient=float(q[i]), dual=float(du[i]), weighted=float(w[i]), C1=C1, C2=C2))
        res.tables["sandwich"] = (("level", "mesh", "s", "function", "quotient", "dual", "weighted", "C1", "C2"), rows)
        ok, parts = True, []
        for s in sorted({s for _, s in consts}):
            (a1, a2, o1), (b1, b2, o2) = consts[(1, s)], consts[(2, s)]
            d1, d2 = _drift(a1, b1), _drift(a2, b2)
            ok &= o1 and o2 and d1 < DRIFT_TOL and d2 < DRIFT_TOL
            parts.append(f"s={s:g}: C1 {a1:.4g}->{b1:.4g} ({d1:.1%}), C2 {a2:.4g}->{b2:.4g} ({d2:.1%})")
        return Check("sandwich", _verdict(ok), "; ".join(parts),
                     {f"C1_s{s:g}_L{lev}": v[0] for (lev, s), v in consts.items()}
                     | {f"C2_s{s:g}_L{lev}": v[1] for (lev, s), v in consts.items()})

    def hardy():
        m0, levels = _nested(d, cfg.h)
        out, parts, ok = {}, [], True
        for s in (0.25, 0.75):
            cs = []
            for m in levels:
                V = build_space(m, 1)
                I = V.interior_dofs
                rho = core.distance_weight(m)
                W = weighted_mass(V, lambda P: np.maximum(rho(P), 1e-300) ** (-2 * s))[I][:, I].toarray()
                Hs = gagliardo.gram(V, s)[np.ix_(I, I)] + mass(V)[I][:, I].toarray()
                lam = sla.eigh(W, Hs, eigvals_only=True, subset_by_index=[len(I) - 1, len(I) - 1])[0]
                cs.append(math.sqrt(lam))
            dr = _drift(cs[0], cs[1])
            ok &= dr < DRIFT_TOL
            out[f"C_s{s:g}"] = cs
            parts.append(f"s={s:g}: C {cs[0]:.4g}->{cs[1]:.4g} ({dr:.1%})")
        return Check("hardy", _verdict(ok), "; ".join(parts), out)

    def h00():
        m0, levels = _nested(d, cfg.h)
        V0 = build_space(m0, 1)
        base = _random_functions(V0, cfg.n_random, cfg.seed + 1, zero_trace=True)
        base = [u for u in base if np.any(u.coeffs)]
        if not base:
            return Check("h00_equivalence", "skipped", "function mesh has no interior nodes")
        lo, hi = [], []
        for m in levels:
            V = build_space(m, 1)
            us = [prolong(u, V) for u in base]
            M = mass(V)
            grams = _GramCache(V)
            cf, B = _dual_factor(V, 0.5, grams, M)
            rho = core.distance_weight(m)
            Wm = weighted_mass(V, lambda P: 1.0 / np.maximum(rho(P), 1e-300))
            A = grams(0.5)
            r = np.array([math.sqrt(float(u.coeffs @ A @ u.coeffs + u.coeffs @ ((M + Wm) @ u.coeffs))) / _dual(u, cf, B)
                          for u in us])
            lo.append(float(r.min()))
            hi.append(float(r.max()))
        dl, dh = _drift(lo[0], lo[1]), _drift(hi[0], hi[1])
        return Check("h00_equivalence", _verdict(dl < DRIFT_TOL and dh < DRIFT_TOL),
                     f"ratio range [{lo[0]:.4g}, {hi[0]:.4g}] -> [{lo[1]:.4g}, {hi[1]:.4g}]",
                     dict(min=lo, max=hi))

    def necas():
        m = triangulate(d, cfg.h / 2)
        c = d.centroid()
        rows, worst = [], 0.0
        for n in range(1, 6):
            base = F.harmonic_poly(n)
            u = F.Field(lambda P, b=base: b.value(P - c), lambda P, b=base: b.grad(P - c), None, base.name)
            be, P, w, vals, g = core._edge_samples(u, m, None, 8)
            L = be.lengths
            mean = float((vals @ w * L).sum() / L.sum())
            l2 = float(((vals - mean) ** 2 @ w * L).sum())
            dt = float((np.einsum("eqi,ei->eq", g, be.tangents) ** 2 @ w * L).sum())
            dn = float((np.einsum("eqi,ei->eq", g, be.normals) ** 2 @ w * L).sum())
            r1 = math.sqrt(dn / (l2 + dt))
            r2 = 1 / r1
            worst = max(worst, r1, r2)
            rows.append(dict(n=n, normal=math.sqrt(dn), h1_gamma_mod_const=math.sqrt(l2 + dt), ratio=r1))
        res.tables["necas_ratios"] = (("n", "normal", "h1_gamma_mod_const", "ratio"), rows)
        return Check("necas_ratios", _verdict(worst <= NECAS_BOUND),
                     f"max(ratio, 1/ratio) = {worst:.4g} over Re z^n, n=1..5", dict(worst=worst))

    for name, fn in (("rellich", rellich), ("green", green), ("trace", trace), ("sandwich", sandwich),
                     ("hardy", hardy), ("h00_equivalence", h00), ("necas_ratios", necas)):
        _run(res, name, fn, want)
    return res


# kernel suite ---------------------------------------------------------------------


W1P_ALPHAS = np.linspace(0.51, 0.99, 10)
W1P_PS = np.linspace(1.01, 1.99, 10)


def w1p_grid():
    rows = []
    for a in W1P_ALPHAS:
        for p in W1P_PS:
            mem = w1p_membership(float(a), float(p))
            div = radial_divergence(float(a), float(p))
            rows.append(dict(alpha=float(a), p=float(p), member=mem.member, margin=mem.margin,
                             divergent=div, agree=mem.member != div))
    return rows


def _annular_sector(omega: float, r0: float = 0.05, n_arc: int = 64) -> Domain:
    th = np.linspace(0.0, omega, n_arc)
    outer = [(math.cos(t), math.sin(t)) for t in th]
    inner = [(r0 * math.cos(t), r0 * math.sin(t)) for t in th[::-1]]
    return make_polygon(outer + inner)


def run_kernel_suite(cfg: ExperimentConfig) -> RunResult:
    res = RunResult("kernel", cfg.echo())
    d = cfg.build_domain()
    want = set(cfg.checks) if cfg.checks else None
    angles = [w for _, w in d.corner_angles]
    n_reentrant = sum(w > math.pi + 1e-12 for w in angles)

    def table():
        rows = []
        ok = True
        for s in cfg.s_values:
            kd = kernel_dimension(d, s)
            rows.append(dict(s=float(s), dim=kd.dim, applicable=kd.applicable, reason=kd.reason, nu_sum=kd.nu_sum))
            if -0.5 <= s <= 0:
                ok &= kd.dim == n_reentrant
        res.tables["kernel_dimension"] = (("s", "dim", "applicable", "reason", "nu_sum"), rows)
        return Check("dimension_count", _verdict(ok),
                     f"{n_reentrant} reentrant corner(s); dims " + ", ".join(f"s={r['s']:g}:{r['dim']}" for r in rows))

    def convexity():
        dim0 = kernel_dimension(d, 0).dim
        ok = (dim0 == 0) == d.is_convex()
        return Check("convexity_criterion", _verdict(ok), f"dim at s=0 is {dim0}, convex={d.is_convex()}")

    def monotone():
        ss = np.linspace(-0.5, 3.0, 36)
        ws = np.linspace(0.05, 2 * math.pi - 0.05, 60)
        tab = np.array([[nu_s(float(w), float(s)) for s in ss] for w in ws])
        ok = bool((np.diff(tab, axis=0) >= 0).all() and (np.diff(tab, axis=1) >= 0).all())
        return Check("nu_monotone", _verdict(ok), "nu_s non-decreasing in s and omega on a 60x36 grid")

    def crit():
        p = critical_p(d)
        wmax = max(angles)
        if wmax <= math.pi + 1e-12:
            return Check("critical_p", _verdict(p is None), "convex polygon: no finite threshold", dict(value=None))
        ref = 2 / (math.pi / wmax + 1)
        return Check("critical_p", _verdict(p is not None and abs(p - ref) < 1e-12), f"p0 = {p!r}",
                     dict(value=p, reference=ref))

    def grid():
        rows = w1p_grid()
        res.tables["w1p_grid"] = (("alpha", "p", "member", "margin", "divergent", "agree"), rows)
        bad = [r for r in rows if not r["agree"] and abs(r["margin"]) >= 1e-3]
        return Check("w1p_grid", _verdict(not bad),
                     f"{sum(not r['agree'] for r in rows)} disagreement(s), {len(bad)} outside the 1e-3 band")

    def grisvard():
        if not d.is_convex():
            return Check("grisvard", "skipped", "H2 bound is stated for convex polygons")
        m0 = triangulate(d, cfg.h)
        V0 = build_space(m0, 1)
        data = _random_functions(V0, min(cfg.n_random, 10), cfg.seed)
        cs = []
        for m in (m0, refine(m0)):
            V = build_space(m, 2)
            K, M = stiffness(V), mass(V)
            I = V.interior_dofs
            MI = sla.cho_factor(M[I][:, I].toarray())
            worst = 0.0
            for fdat in data:
                f = prolong(fdat, V)
                v = solve_dirichlet(V, f)
                r = (K @ v.coeffs)[I]
                lap = math.sqrt(float(r @ sla.cho_solve(MI, r)))
                H = v.cell_hessians()
                h2 = float(((H**2).sum((1, 2)) * np.abs(V.det) / 2).sum())
                h1 = core.classical_norms(v)[2] ** 2
                worst = max(worst, math.sqrt(h2 + h1) / lap)
            cs.append(worst)
        dr = _drift(cs[0], cs[1])
        return Check("grisvard", _verdict(dr < DRIFT_TOL), f"C {cs[0]:.4g}->{cs[1]:.4g} ({dr:.1%})", dict(C=cs))

    def kernel_fem():
        omega = max(angles)
        frame = CornerFrame((0.0, 0.0), 0.0, omega)
        z = kernel_function(frame, math.pi / omega)
        ann = _annular_sector(omega)
        errs = []
        for h in (0.2, 0.1):
            m = triangulate(ann, h, size_fn=lambda P, h=h: h * np.hypot(P[:, 0], P[:, 1]))
            V = build_space(m, 1)
            u = harmonic_extension(V, z)

            def fn(c, X, P, k):
                gz = z.grad(P.reshape(-1, 2)).reshape(P.shape)
                return ((u.cell_grads(X, c) - gz * k) ** 2).sum(-1)

            e = core._cell_integral(V, lambda c, X, P: fn(c, X, P, 1), 4)
            n = core._cell_integral(V, lambda c, X, P: fn(c, X, P, 0), 4)
            errs.append(math.sqrt(e / n))
        return Check("kernel_function_fem", _verdict(errs[1] < errs[0] and errs[1] < 0.1),
                     f"relative H1 error of the harmonic extension of z: {errs[0]:.3e} -> {errs[1]:.3e}",
                     dict(errors=errs))

    for name, fn in (("dimension_count", table), ("convexity_criterion", convexity), ("nu_monotone", monotone),
                     ("critical_p", crit), ("w1p_grid", grid), ("grisvard", grisvard),
                     ("kernel_function_fem", kernel_fem)):
        _run(res, name, fn, want)
    return res


# counterexample ---------------------------------------------------------------------


def pair_variation(reports) -> float:
    """max / min - 1 of the harmonic-equivalent norm (||w||^2 + ||sqrt(rho) D^2 w||^2)^(1/2)."""
    n = [math.hypot(r.l2_w, r.wh2_w) for r in reports]
    return max(n) / min(n) - 1.0


def run_counterexample(cfg: ExperimentConfig) -> RunResult:
    res = RunResult("counterexample", cfg.echo())
    want = set(cfg.checks) if cfg.checks else None
    series = cx.blowup_study(cfg.k_list, record_timing=cfg.record_timing, parallel=cfg.parallel)
    rows, reps = series.rows, series.reports
    res.tables["blowup"] = (cx.CSV_COLUMNS, rows)
    xs = [math.log(-math.log(r["eps"])) for r in rows]
    res.plots["blowup"] = dict(
        series={"|w|_H1(Gamma)": (xs, [r["bnorm_h1_gamma"] for r in rows]),
                "lower bound": (xs, [r["bound"] for r in rows])},
        xlabel="ln(-ln eps)", ylabel="boundary norm", title="tangential trace blow-up")
    detail_rows = [dict(k=r.k, eps=r.eps, boundary_l2_w=r.boundary_l2_w, residual_w=r.residual_w,
                        consistency=r.consistency, poincare=r.poincare, h_max=r.h_max) for r in reps]
    res.tables["blowup_diagnostics"] = (("k", "eps", "boundary_l2_w", "residual_w", "consistency", "poincare", "h_max"),
                                        detail_rows)
    few = len(rows) < 2

    def lower():
        ok = all(r["bnorm_h1_gamma"] >= r["bound"] for r in rows)
        return Check("lower_bound", _verdict(ok), ", ".join(f"k={r['k']}: {r['bnorm_h1_gamma']:.4f}>={r['bound']:.4f}"
                                                             for r in rows))

    def growth():
        if few:
            return Check("growth", "skipped", "insufficient data: one k value")
        b = [r["bnorm_h1_gamma"] for r in rows]
        return Check("growth", _verdict(all(y > x for x, y in zip(b, b[1:]))), " < ".join(f"{x:.4f}" for x in b))

    def bounded():
        if few:
            return Check("bounded_pair", "skipped", "insufficient data: one k value")
        var = pair_variation(reps)
        l2 = [r.l2_w for r in reps]
        wh = [r.wh2_w for r in reps]
        comp = max(max(l2) / min(l2), max(wh) / min(wh)) - 1
        return Check("bounded_pair", _verdict(var < PAIR_TOL),
                     f"variation {var:.1%} (per component up to {comp:.1%})",
                     dict(variation=var, component_variation=comp))

    def identity():
        errs = [abs(r.boundary_h1_w / cx.tangential_trace_norm(r.k) - 1) for r in reps]
        return Check("boundary_identity", _verdict(max(errs) <= 0.01), f"max rel. difference {max(errs):.2e}")

    def harmonic():
        ok = all(r.residual_w <= 10 * r.consistency for r in reps)
        return Check("harmonicity", _verdict(ok), ", ".join(f"k={r.k}: {r.residual_w:.2e}/{r.consistency:.2e}"
                                                            for r in reps))

    def slope():
        if few:
            return Check("slope", "skipped", "insufficient data: one k value")
        sl = cx.fit_slope(series)
        return Check("slope", _verdict(0.3 <= sl <= 3.0), f"slope {sl:.4f}", dict(slope=sl))

    for name, fn in (("lower_bound", lower), ("growth", growth), ("bounded_pair", bounded),
                     ("boundary_identity", identity), ("harmonicity", harmonic), ("slope", slope)):
        _run(res, name, fn, want)
    return res


# plain tasks -------------------------------------------------------------------------


def _mesh_for(cfg: ExperimentConfig) -> Mesh:
    return triangulate(cfg.build_domain(), cfg.h, cfg.grading)


def run_mesh(cfg: ExperimentConfig) -> RunResult:
    res = RunResult("mesh", cfg.echo())
    m = _mesh_for(cfg)
    res.tables["mesh_stats"] = (("mesh", "nodes", "triangles", "h_max", "min_area"),
                                [dict(mesh=mesh_id(m), nodes=m.n_nodes, triangles=m.n_triangles,
                                      h_max=m.h_max, min_area=float(m.areas.min()))])
    res.checks.append(Check("mesh", "pass", f"{m.n_triangles} triangles"))
    res.mesh = m
    return res


def run_solve(cfg: ExperimentConfig) -> RunResult:
    res = RunResult("solve", cfg.echo())
    m = _mesh_for(cfg)
    V = build_space(m, cfg.order)
    f = 1.0 if cfg.rhs == "one" else (lambda P: 2 * math.pi**2 * F.sinsin()(P))
    u = solve_dirichlet(V, f)
    from ..fem import weak_laplacian_residual

    r = weak_laplacian_residual(V, u, f)
    l2, g, h1 = core.classical_norms(u)
    res.tables["solution"] = (("mesh", "order", "dofs", "l2", "grad_l2", "residual"),
                              [dict(mesh=mesh_id(m), order=cfg.order, dofs=V.dof_count, l2=l2, grad_l2=g, residual=r)])
    res.checks.append(Check("solve", _verdict(r < 1e-8), f"weak residual {r:.2e}"))
    res.mesh, res.solution = m, u
    return res


def run_norms(cfg: ExperimentConfig) -> RunResult:
    res = RunResult("norms", cfg.echo())
    m = _mesh_for(cfg)
    V = build_space(m, cfg.order)
    us = _random_functions(V, cfg.n_random, cfg.seed)
    reports = []
    for i, u in enumerate(us):
        for s in cfg.s_values:
            reports.append(norm_report(u, s, function=f"random{i}", quad_level=cfg.quad_levels))
    res.tables["norms"] = (META_COLUMNS + NORM_COLUMNS, [r.row() for r in reports])
    ok = all(all(v >= 0 for v in r.values.values()) for r in reports)
    res.checks.append(Check("norms", _verdict(ok), f"{len(reports)} reports"))
    return res


SUITES = {
    "inequalities": run_inequality_suite,
    "kernel": run_kernel_suite,
    "counterexample": run_counterexample,
    "mesh": run_mesh,
    "solve": run_solve,
    "norms": run_norms,
}
