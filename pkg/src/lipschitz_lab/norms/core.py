"""Integer, fractional, weighted, dual and boundary norms.

Functions accept a :class:`~lipschitz_lab.fem.FeFunction` or a closed-form
:class:`~lipschitz_lab.fields.Field`; closed forms need a ``mesh`` that
serves as the quadrature domain.  Distances to the boundary are taken with
respect to the polygon the mesh was generated from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from ..errors import BadVectorField, GramAssemblyBudget, HessOnP1, NonzeroTrace
from ..fem import FeFunction, FeSpace, basis, basis_grad, build_space, mass, stiffness, weighted_mass
from ..geometry import distance_to_boundary, regularized_distance
from ..meshing import Mesh, boundary_edges, mesh_domain
from ..quadrature import gauss_interval, subdivided_rule
from . import gagliardo as G

GRAM_MAX_DOFS = 3000
TRACE_TOL = 1e-12
_REF = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass(frozen=True)
class SobolevIndex:
    s: float

    def __post_init__(self):
        if not 0 <= self.s <= 2:
            raise ValueError(f"s must lie in [0, 2], got {self.s}")

    @property
    def critical(self) -> bool:
        return abs(self.s - 0.5) < 1e-12 or abs(self.s - 1.5) < 1e-12


# evaluation helpers -------------------------------------------------------------


def _space(u, mesh: Mesh | None) -> FeSpace:
    if isinstance(u, FeFunction):
        return u.space
    if mesh is None:
        raise ValueError("closed-form functions need a mesh as quadrature domain")
    return _p1(mesh)


@lru_cache(maxsize=8)
def _p1(mesh: Mesh) -> FeSpace:
    return build_space(mesh, 1)


def _values(u, space, X, cells):
    if isinstance(u, FeFunction):
        return u.cell_values(X, cells)
    P = space.map_points(X, cells)
    return np.asarray(u.value(P.reshape(-1, 2))).reshape(P.shape[:-1])


def _grads(u, space, X, cells):
    if isinstance(u, FeFunction):
        return u.cell_grads(X, cells)
    P = space.map_points(X, cells)
    return np.asarray(u.grad(P.reshape(-1, 2))).reshape(P.shape)


def _hessians(u, space, X, cells):
    if isinstance(u, FeFunction):
        H = u.cell_hessians(cells)  # constant per element
        return np.broadcast_to(H[:, None], (len(H), len(X), 2, 2))
    if u.hess is None:
        raise HessOnP1("closed-form function has no Hessian")
    P = space.map_points(X, cells)
    return np.asarray(u.hess(P.reshape(-1, 2))).reshape(P.shape + (2,))


def _cell_integral(space, fn, degree, levels=0, boundary_levels=0) -> float:
    """sum over elements of int fn(cells, X, P); boundary elements may be subdivided more."""
    from ..fem import boundary_touching_cells

    T = space.mesh.n_triangles
    groups = [(np.arange(T), levels)]
    if boundary_levels > levels:
        bt = boundary_touching_cells(space.mesh)
        groups = [(np.flatnonzero(~bt), levels), (np.flatnonzero(bt), boundary_levels)]
    total = 0.0
    for cells, lev in groups:
        if len(cells) == 0:
            continue
        X, W = subdivided_rule(degree, lev)
        P = space.map_points(X, cells)
        total += float((fn(cells, X, P) @ W * np.abs(space.det[cells])).sum())
    return total


def _degree(u, space):
    return 2 * space.order + 2 if isinstance(u, FeFunction) else 8


def distance_weight(mesh: Mesh, kind: str = "exact"):
    d = mesh_domain(mesh)
    if kind == "exact":
        return lambda P: distance_to_boundary(d, P)
    if kind == "regularized":
        return lambda P: regularized_distance(d, P)
    raise ValueError(f"unknown weight {kind!r}")


# integer order ---------------------------------------------------------------------


def classical_norms(u, mesh: Mesh | None = None, levels: int = 0):
    """(||u||_L2, ||grad u||_L2, ||u||_H1)."""
    V = _space(u, mesh)
    deg = _degree(u, V)
    l2 = _cell_integral(V, lambda c, X, P: _values(u, V, X, c) ** 2, deg, levels)
    g2 = _cell_integral(V, lambda c, X, P: (_grads(u, V, X, c) ** 2).sum(-1), deg, levels)
    l2, g2 = max(l2, 0.0), max(g2, 0.0)
    return math.sqrt(l2), math.sqrt(g2), math.sqrt(l2 + g2)


def mean_value(u, mesh: Mesh | None = None) -> float:
    V = _space(u, mesh)
    area = float(np.abs(V.det).sum() / 2)
    return _cell_integral(V, lambda c, X, P: _values(u, V, X, c), _degree(u, V)) / area


# fractional order -----------------------------------------------------------------


def _elementwise_grad(u: FeFunction, k: int):
    """Element-wise evaluator of the k-th gradient component of a FE function."""
    V = u.space

    def f(cells, Xref, P):
        Gr = basis_grad(V.order, Xref.reshape(-1, 2)).reshape(Xref.shape[:-1] + (-1, 2))
        c = u.coeffs[V.cell_dofs[cells]]
        g = np.einsum("pk,pqkj->pqj", c, Gr)
        return np.einsum("pj,pqj->pq", V.inv_t[cells, k], g)

    f.elementwise = True
    return f


def _gradient_jumps(u: FeFunction, rtol: float = 1e-10) -> bool:
    """True if element gradients disagree at a shared node (P1/P2 gradients are
    affine along edges, so node agreement means a continuous gradient)."""
    V = u.space
    m = V.mesh
    G_ = np.einsum("tk,tqki->tqi", u.coeffs[V.cell_dofs], V.phys_grads(_REF))
    nodes = m.triangles.ravel()
    G_ = G_.reshape(-1, 2)
    acc = np.zeros((m.n_nodes, 2))
    np.add.at(acc, nodes, G_)
    cnt = np.bincount(nodes, minlength=m.n_nodes)[:, None]
    dev = np.abs(G_ - (acc / cnt)[nodes]).max()
    return bool(dev > rtol * max(np.abs(G_).max(), 1.0))


def gagliardo_seminorm(u, s: float, part: str = "whole", mesh: Mesh | None = None,
                       squared: bool = False, **plan_kw) -> float:
    """Double-integral seminorm of order s in (0, 1).

    ``part="gradient"`` applies it to both gradient components and sums the
    squares, the fractional part of an H^(1+s) seminorm.
    """
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    V = _space(u, mesh)
    if part == "whole":
        f = u if isinstance(u, FeFunction) else u.value
        val = G.seminorm_squared(f, V, s, **plan_kw)
    elif part == "gradient":
        if isinstance(u, FeFunction):
            # gradients of FE functions may jump across element edges; a jump
            # makes the seminorm infinite from s = 1/2 on
            jump = _gradient_jumps(u)
            if jump and s >= 0.5:
                return math.inf
            plan = G.PairPlan(V.mesh, s, jump=jump, **plan_kw)
            comps = [_elementwise_grad(u, k) for k in range(2)]
        else:
            plan = G.PairPlan(V.mesh, s, **plan_kw)
            comps = [(lambda P, k=k: u.grad(P)[:, k]) for k in range(2)]
        val = sum(G.seminorm_squared(c, V, s, plan=plan) for c in comps)
    else:
        raise ValueError(f"unknown part {part!r}")
    val = max(val, 0.0)
    return val if squared else math.sqrt(val)


# weighted ---------------------------------------------------------------------


def weighted_l2_norm(u, exponent: float, mesh: Mesh | None = None, weight: str = "exact",
                     boundary_levels: int = 3) -> float:
    """(int w^(2 a) u^2)^(1/2) with w the (regularized) boundary distance."""
    V = _space(u, mesh)
    w = distance_weight(V.mesh, weight)

    def fn(c, X, P):
        r = w(P.reshape(-1, 2)).reshape(P.shape[:-1])
        with np.errstate(divide="ignore", invalid="ignore"):
            rw = np.where(r > 0, r ** (2 * exponent), 0.0 if exponent > 0 else np.inf)
        u2 = _values(u, V, X, c) ** 2
        return np.where(u2 == 0, 0.0, rw * u2)

    return math.sqrt(max(_cell_integral(V, fn, _degree(u, V), 1, boundary_levels), 0.0))


def weighted_gradient_norm(u, s: float, weight: str = "exact", mesh: Mesh | None = None,
                           boundary_levels: int = 3) -> float:
    """(int w^(2(1-s)) |grad u|^2)^(1/2), w = exact or regularized distance."""
    if not 0 <= s <= 1:
        raise ValueError("s must lie in [0, 1]")
    V = _space(u, mesh)
    if s == 1:
        return classical_norms(u, mesh)[1]
    w = distance_weight(V.mesh, weight)

    def fn(c, X, P):
        r = w(P.reshape(-1, 2)).reshape(P.shape[:-1])
        return r ** (2 * (1 - s)) * (_grads(u, V, X, c) ** 2).sum(-1)

    return math.sqrt(max(_cell_integral(V, fn, _degree(u, V), 1, boundary_levels), 0.0))


def weighted_hessian_norm(u, beta: float, mesh: Mesh | None = None, levels: int = 1,
                          boundary_levels: int = 3, weight: str = "exact") -> float:
    """(int rho^(2 beta) |D^2 u|^2)^(1/2); element Hessians for P2 functions."""
    if isinstance(u, FeFunction) and u.space.order != 2:
        raise HessOnP1("weighted Hessian norm needs a P2 function or a closed form")
    V = _space(u, mesh)
    w = distance_weight(V.mesh, weight)

    def fn(c, X, P):
        r = w(P.reshape(-1, 2)).reshape(P.shape[:-1])
        H = _hessians(u, V, X, c)
        return r ** (2 * beta) * (H**2).sum((-1, -2))

    return math.sqrt(max(_cell_integral(V, fn, _degree(u, V), levels, boundary_levels), 0.0))


def quotient_norm(u, s: float, mesh: Mesh | None = None, **plan_kw) -> float:
    """inf over constants K of ||u + K||_{H^s}; the mean minimizes the L2 part
    and the seminorm does not see constants."""
    if not 0 <= s <= 1:
        raise ValueError("s must lie in [0, 1]")
    c = mean_value(u, mesh)
    if isinstance(u, FeFunction):
        v = u - c
    else:
        v = u.shifted(-c)
    l2 = classical_norms(v, mesh)[0] ** 2
    if s == 0:
        semi = 0.0
    elif s == 1:
        semi = classical_norms(u, mesh)[1] ** 2
    else:
        semi = gagliardo_seminorm(u, s, mesh=mesh, squared=True, **plan_kw)
    return math.sqrt(l2 + semi)


# dual norm of the gradient ----------------------------------------------------------


def _broken_space_gram(space: FeSpace):
    """Load matrices and Gram of the broken P(k-1) test space (s = 1)."""
    V = space
    k = V.order - 1
    T = V.mesh.n_triangles
    X, W = subdivided_rule(2 * V.order, 0)
    adet = np.abs(V.det)
    if k == 0:
        psi = np.ones((len(X), 1))
    else:
        psi = basis(1, X)
    nl = psi.shape[1]
    Mloc = np.einsum("q,qa,qb->ab", W, psi, psi)
    gram = sp.block_diag([Mloc * a for a in adet], format="csr")
    grads = V.phys_grads(X)  # (T, q, nloc, 2)
    rows = (np.arange(T)[:, None] * nl + np.arange(nl)[None, :])
    Bs = []
    for comp in range(2):
        loc = np.einsum("q,qa,tqb,t->tab", W, psi, grads[..., comp], adet)
        r = np.repeat(rows, V.cell_dofs.shape[1], axis=1).ravel()
        c = np.tile(V.cell_dofs, (1, nl)).ravel()
        Bs.append(sp.csr_matrix((loc.ravel(), (r, c)), shape=(T * nl, V.dof_count)))
    return Bs, gram


def _load_matrices(space: FeSpace, test: np.ndarray):
    """B_k[i, j] = int d_k phi_j phi_i over the test rows."""
    V = space
    X, W = subdivided_rule(2 * V.order, 0)
    B = basis(V.order, X)
    grads = V.phys_grads(X)
    adet = np.abs(V.det)
    n = V.cell_dofs.shape[1]
    r = np.repeat(V.cell_dofs, n, axis=1).ravel()
    c = np.tile(V.cell_dofs, (1, n)).ravel()
    out = []
    for comp in range(2):
        loc = np.einsum("q,qa,tqb,t->tab", W, B, grads[..., comp], adet)
        M = sp.csr_matrix((loc.ravel(), (r, c)), shape=(V.dof_count, V.dof_count))
        out.append(M[test])
    return out


class DualGradientOperator:
    """Factorized discrete dual norm of grad u against H^(1-s) test functions.

    variant "tilde" tests with zero-trace functions (with the extra
    int |phi|^2 / rho term at s = 1/2); variant "full" uses all dofs and
    the plain H^(1-s) inner product.  The value is a lower bound of the
    continuous dual norm that grows as the test space is refined.
    """

    def __init__(self, space: FeSpace, s: float, variant: str = "tilde", **plan_kw):
        if not 0 <= s <= 1:
            raise ValueError("s must lie in [0, 1]")
        if variant not in ("tilde", "full"):
            raise ValueError(f"unknown variant {variant!r}")
        self.space, self.s, self.variant = space, float(s), variant
        V = space
        if s == 1:
            self.B, gram = _broken_space_gram(V)
            self._solve = _sparse_chol(gram)
            return
        test = V.interior_dofs if variant == "tilde" else np.arange(V.dof_count)
        M = mass(V)
        if s == 0:
            gram = (M + stiffness(V))[test][:, test].toarray()
        else:
            if V.dof_count > GRAM_MAX_DOFS:
                raise GramAssemblyBudget(f"{V.dof_count} dofs exceed the dense Gram cap {GRAM_MAX_DOFS}")
            gram = G.gram(V, 1 - s, **plan_kw)[np.ix_(test, test)] + M[test][:, test].toarray()
            if variant == "tilde" and abs(s - 0.5) < 1e-12:
                rho = distance_weight(V.mesh, "exact")
                inv = lambda P: 1.0 / np.maximum(rho(P), 1e-300)
                gram = gram + weighted_mass(V, inv)[test][:, test].toarray()
        self.B = _load_matrices(V, test)
        cf = sla.cho_factor(gram)
        self._solve = lambda b: sla.cho_solve(cf, b)

    def __call__(self, u: FeFunction) -> float:
        if u.space is not self.space:
            raise ValueError("function lives on a different space")
        tot = 0.0
        for Bk in self.B:
            F = Bk @ u.coeffs
            tot += float(F @ self._solve(F))
        return math.sqrt(max(tot, 0.0))


def _sparse_chol(gram):
    from scipy.sparse.linalg import factorized

    return factorized(gram.tocsc())


def dual_gradient_norm(u: FeFunction, s: float, variant: str = "tilde",
                       operator: DualGradientOperator | None = None, **plan_kw) -> float:
    op = operator or DualGradientOperator(u.space, s, variant, **plan_kw)
    return op(u)


# H^{1/2}_{00} -------------------------------------------------------------------------


def h00_half_norm(u: FeFunction, gram_half: np.ndarray | None = None, **plan_kw) -> float:
    """(||u||_{H^1/2}^2 + ||u / sqrt(rho)||_L2^2)^(1/2) for zero-trace FE functions."""
    V = u.space
    b = u.coeffs[V.boundary_dofs]
    if b.size and np.abs(b).max() > TRACE_TOL:
        raise NonzeroTrace(f"boundary values up to {np.abs(b).max():.3e}")
    if not np.any(u.coeffs):
        return 0.0
    l2 = classical_norms(u)[0] ** 2
    if gram_half is not None:
        semi = float(u.coeffs @ gram_half @ u.coeffs)
    else:
        semi = gagliardo_seminorm(u, 0.5, squared=True, **plan_kw)
    hardy = weighted_l2_norm(u, -0.5) ** 2
    return math.sqrt(max(l2 + semi + hardy, 0.0))


# boundary -----------------------------------------------------------------------------


def _edge_samples(u, mesh, tag, n):
    be = boundary_edges(mesh, tag)
    t, w = gauss_interval(n)
    P = be.a[:, None, :] + t[None, :, None] * (be.b - be.a)[:, None, :]
    if isinstance(u, FeFunction):
        V = u.space
        A = _REF[be.local]
        Bv = _REF[(be.local + 1) % 3]
        X = A[:, None, :] + t[None, :, None] * (Bv - A)[:, None, :]
        Gr = basis_grad(V.order, X.reshape(-1, 2)).reshape(X.shape[:-1] + (-1, 2))
        c = u.coeffs[V.cell_dofs[be.tri]]
        vals = np.einsum("ek,eqk->eq", c, basis(V.order, X.reshape(-1, 2)).reshape(X.shape[:-1] + (-1,)))
        g = np.einsum("eij,eqj->eqi", V.inv_t[be.tri], np.einsum("ek,eqkj->eqj", c, Gr))
    else:
        vals = np.asarray(u.value(P.reshape(-1, 2))).reshape(P.shape[:-1])
        g = np.asarray(u.grad(P.reshape(-1, 2))).reshape(P.shape)
    return be, P, w, vals, g


def boundary_norms(u, tag: str | None = None, mesh: Mesh | None = None, n: int = 6):
    """(||u||_{L2(Gamma)}, ||d_tau u||_{L2(Gamma)}) by Gauss rules on boundary edges."""
    m = u.space.mesh if isinstance(u, FeFunction) else mesh
    if m is None:
        raise ValueError("closed-form functions need a mesh")
    be, P, w, vals, g = _edge_samples(u, m, tag, n)
    dt = np.einsum("eqi,ei->eq", g, be.tangents)
    l2 = float(((vals**2) @ w * be.lengths).sum())
    h1 = float(((dt**2) @ w * be.lengths).sum())
    return math.sqrt(l2), math.sqrt(h1)


def trace_inequality_check(u, center=None, mesh: Mesh | None = None, n: int = 6):
    """Both sides of int_Gamma h.n u^2 = 2 int u grad u . h + int u^2 div h
    for h = x - center (default the polygon centroid)."""
    m = u.space.mesh if isinstance(u, FeFunction) else mesh
    c = mesh_domain(m).centroid() if center is None else np.asarray(center, float)
    be, P, w, vals, g = _edge_samples(u, m, None, n)
    hn = np.einsum("ei,ei->e", (be.a + be.b) / 2 - c, be.normals)
    if hn.min() <= 1e-12:
        raise BadVectorField(f"h.n = {hn.min():.3e} <= 0 on a boundary edge")
    lhs = float((hn[:, None] * vals**2) @ w @ be.lengths)
    V = _space(u, m)

    def fn(cells, X, P):
        uv = _values(u, V, X, cells)
        gv = _grads(u, V, X, cells)
        return 2 * uv * np.einsum("tqi,tqi->tq", gv, P - c) + 2 * uv**2

    rhs = _cell_integral(V, fn, _degree(u, V) + 1)
    ratio = 0.0 if lhs == 0 and rhs == 0 else lhs / rhs
    return lhs, rhs, ratio


def weighted_stiffness(space: FeSpace, exponent: float, weight: str = "exact", levels: int = 1,
                       boundary_levels: int = 3) -> sp.csr_matrix:
    """Matrix of int w^exponent grad phi_i . grad phi_j; u^T A u = ||w^(exponent/2) grad u||^2."""
    from ..fem import _scatter, boundary_touching_cells

    V = space
    w = distance_weight(V.mesh, weight)
    bt = boundary_touching_cells(V.mesh)
    out = sp.csr_matrix((V.dof_count, V.dof_count))
    for cells, lev in ((np.flatnonzero(~bt), levels), (np.flatnonzero(bt), boundary_levels)):
        if len(cells) == 0:
            continue
        X, W = subdivided_rule(2 * V.order, lev)
        P = V.map_points(X, cells)
        r = w(P.reshape(-1, 2)).reshape(P.shape[:-1]) ** exponent
        Gr = V.phys_grads(X, cells)
        loc = np.einsum("q,tq,tqai,tqbi,t->tab", W, r, Gr, Gr, np.abs(V.det[cells]))
        out = out + _scatter(V, loc, cells)
    return out.tocsr()
