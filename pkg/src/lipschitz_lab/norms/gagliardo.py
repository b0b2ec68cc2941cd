"""Double-integral quadrature for the Gagliardo seminorm

    |u|_s^2 = int_O int_O (u(x) - u(y))^2 / |x - y|^(2 + 2s) dx dy

over a triangulated polygon.

Element pairs are split into three groups:

* touching pairs (same element, shared edge, shared vertex) use
  Sauter-Schwab style Duffy splittings of T x T into 6 / 5 / 2 four-cubes;
  the variables that carry the algebraic singularity are integrated with
  Gauss-Jacobi rules matched to the exponent;
* close pairs use tensor products of subdivided triangle rules;
* all remaining pairs use a per-element rule, evaluated in dense blocks.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.special import roots_jacobi

from ..errors import QuadratureBudgetExceeded
from ..fem import FeFunction, FeSpace, basis
from ..meshing import Mesh
from ..quadrature import gauss_interval, subdivided_rule, triangle_rule

MAX_POINTS = 4e9      # far-field kernel evaluations
CLOSE_FACTOR = 1.5    # centroid distance / max diameter below which a pair is "close"


# one-dimensional rules -------------------------------------------------------


@lru_cache(maxsize=None)
def _rule_1d(n: int, e: float):
    """Rule on [0, 1] exact for t^e * p(t), p of degree 2n-1, returned as an
    ordinary rule (weights divided by t^e)."""
    if abs(e) < 1e-14:
        return gauss_interval(n)
    x, w = roots_jacobi(n, 0.0, e)
    t = (1 + x) / 2
    return t, w * 2.0 ** (-e - 1) / t**e


def _tensor(rules):
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    pts = [g.ravel() for g in grids]
    w = np.prod([g.ravel() for g in wgrids], axis=0)
    return pts, w


@lru_cache(maxsize=None)
def duffy_rule(kind: str, n: int, sigma: float, jump: bool = False):
    """Points on two reference triangles and weights for a touching pair.

    Conventions: the two elements share local vertex 0 (vertex pairs) or
    local vertices 0, 1 in the same order (edge pairs).  With ``jump`` the
    integrand difference does not vanish on the contact set.
    """
    # inside one element the integrand always vanishes on the diagonal
    m = 0.0 if jump and kind != "coincident" else 2.0
    p = 2 + 2 * sigma - m  # effective singular power of |x - y|
    ex = 3 - p
    if kind == "coincident":
        (xi, e1, e2, e3), w = _tensor([_rule_1d(n, ex), _rule_1d(n, 2 - p), _rule_1d(n, 1 - p), _rule_1d(n, 0)])
        w = w * xi**3 * e1**2 * e2
        e12, e123 = e1 * e2, e1 * e2 * e3
        regions = [
            ((xi, xi * (1 - e1 + e12)), (xi * (1 - e123), xi * (1 - e1))),
            ((xi * (1 - e123), xi * (1 - e1)), (xi, xi * (1 - e1 + e12))),
            ((xi, xi * (e1 - e12 + e123)), (xi * (1 - e12), xi * (e1 - e12))),
            ((xi * (1 - e12), xi * (e1 - e12)), (xi, xi * (e1 - e12 + e123))),
            ((xi * (1 - e123), xi * (e1 - e123)), (xi, xi * (e1 - e12))),
            ((xi, xi * (e1 - e12)), (xi * (1 - e123), xi * (e1 - e123))),
        ]
        weights = [w] * 6
    elif kind == "edge":
        (xi, e1, e2, e3), w = _tensor([_rule_1d(n, ex), _rule_1d(n, 2 - p), _rule_1d(n, 0), _rule_1d(n, 0)])
        w = w * xi**3 * e1**2
        e12, e123 = e1 * e2, e1 * e2 * e3
        regions = [
            ((xi, xi * e1 * e3), (xi * (1 - e12), xi * e1 * (1 - e2))),
            ((xi, xi * e1), (xi * (1 - e123), xi * e12 * (1 - e3))),
            ((xi * (1 - e12), xi * e1 * (1 - e2)), (xi, xi * e123)),
            ((xi * (1 - e123), xi * e12 * (1 - e3)), (xi, xi * e1)),
            ((xi * (1 - e123), xi * e1 * (1 - e2 * e3)), (xi, xi * e12)),
        ]
        weights = [w] + [w * e2] * 4
    elif kind == "vertex":
        (xi, e1, e2, e3), w = _tensor([_rule_1d(n, ex), _rule_1d(n, 0), _rule_1d(n, 0), _rule_1d(n, 0)])
        w = w * xi**3 * e2
        regions = [
            ((xi, xi * e1), (xi * e2, xi * e2 * e3)),
            ((xi * e2, xi * e2 * e3), (xi, xi * e1)),
        ]
        weights = [w, w]
    else:
        raise ValueError(kind)
    X = np.concatenate([np.column_stack(r[0]) for r in regions])
    Y = np.concatenate([np.column_stack(r[1]) for r in regions])
    W = np.concatenate(weights)
    # the splitting lives on {0 <= b <= a <= 1}; map to the standard triangle
    X[:, 0] -= X[:, 1]
    Y[:, 0] -= Y[:, 1]
    return X, Y, W


# pair classification -----------------------------------------------------------


def _to_original(Xp: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Reference coords w.r.t. permuted vertices (npairs-broadcast) -> original."""
    lam_p = np.stack((1 - Xp[..., 0] - Xp[..., 1], Xp[..., 0], Xp[..., 1]), -1)
    lam = np.empty_like(lam_p)
    idx = np.broadcast_to(perm[:, None, :], lam_p.shape)
    np.put_along_axis(lam, idx, lam_p, axis=-1)
    return lam[..., 1:]


def touching_pairs(m: Mesh):
    """Unordered pairs of distinct elements sharing a vertex or an edge.

    Returns dict kind -> (i, j, perm_i, perm_j) with vertex permutations that
    put the shared vertex (or edge) first, in matching order.
    """
    indptr, tris_of = m.tri_neighbors_of_node
    T = m.triangles
    rows, cols = [], []
    for v in range(m.n_nodes):
        ts = tris_of[indptr[v]:indptr[v + 1]]
        a, b = np.meshgrid(ts, ts, indexing="ij")
        sel = a < b
        rows.append(a[sel])
        cols.append(b[sel])
    I = np.concatenate(rows)
    J = np.concatenate(cols)
    key = np.unique(I.astype(np.int64) * m.n_triangles + J)
    I, J = key // m.n_triangles, key % m.n_triangles
    Ti, Tj = T[I], T[J]
    eq = Ti[:, :, None] == Tj[:, None, :]  # (P, 3, 3)
    nshared = eq.sum((1, 2))
    out = {}
    for kind, ns in (("edge", 2), ("vertex", 1)):
        sel = nshared == ns
        e = eq[sel]
        pi = np.empty((sel.sum(), 3), dtype=np.int64)
        pj = np.empty_like(pi)
        for r in range(len(e)):
            ii, jj = np.nonzero(e[r])
            oi = [k for k in range(3) if k not in ii]
            oj = [k for k in range(3) if k not in jj]
            pi[r] = list(ii) + oi
            pj[r] = list(jj) + oj
        out[kind] = (I[sel], J[sel], pi, pj)
    return out


def close_pairs(m: Mesh, factor: float = CLOSE_FACTOR):
    """Unordered non-touching pairs whose centroids are within factor * max diameter."""
    from scipy.spatial import cKDTree

    c = m.centroids
    dmax = m.diameters.max()
    tree = cKDTree(c)
    pairs = tree.query_pairs(factor * dmax, output_type="ndarray")
    if len(pairs) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    i, j = pairs[:, 0], pairs[:, 1]
    dist = np.linalg.norm(c[i] - c[j], axis=1)
    keep = dist < factor * np.maximum(m.diameters[i], m.diameters[j])
    shared = (m.triangles[i][:, :, None] == m.triangles[j][:, None, :]).any((1, 2))
    keep &= ~shared
    p = np.sort(np.column_stack((i[keep], j[keep])), axis=1)
    return p[np.lexsort((p[:, 1], p[:, 0]))]


class PairPlan:
    """Quadrature plan for all element pairs of a mesh and order s."""

    def __init__(self, m: Mesh, sigma: float, order: int = 4, far_degree: int = 4,
                 close_levels: int = 0, close_factor: float = CLOSE_FACTOR, jump: bool = False,
                 coincident_order: int | None = None):
        if not 0 < sigma < 1:
            raise ValueError("s must lie in (0, 1)")
        self.mesh, self.sigma, self.jump = m, float(sigma), jump
        self.order = order
        # the coincident rule converges slowest on stretched elements and is
        # only needed once per element, so it gets extra points
        self.coincident_order = coincident_order or order + 2
        self.touch = touching_pairs(m)
        self.close = close_pairs(m, close_factor)
        self.far_rule = triangle_rule(far_degree)
        self.close_rule = subdivided_rule(far_degree, close_levels)
        nq = len(self.far_rule[1])
        if (m.n_triangles * nq) ** 2 > MAX_POINTS:
            raise QuadratureBudgetExceeded(
                f"{m.n_triangles} elements need {(m.n_triangles * nq) ** 2:.2e} far-field evaluations"
            )
        # element adjacency used to mask the dense far field
        T = m.n_triangles
        ii = [np.arange(T)]
        jj = [np.arange(T)]
        for kind in ("edge", "vertex"):
            a, b = self.touch[kind][:2]
            ii += [a, b]
            jj += [b, a]
        ii += [self.close[:, 0], self.close[:, 1]]
        jj += [self.close[:, 1], self.close[:, 0]]
        ii, jj = np.concatenate(ii), np.concatenate(jj)
        self.near = sp.csr_matrix((np.ones(len(ii), dtype=bool), (ii, jj)), shape=(T, T))

    def kernel(self, d2):
        return d2 ** (-(1.0 + self.sigma))

    def near_batches(self, chunk_points: int = 2_000_000):
        """Yield (i, j, Xi, Xj, w, mult) where Xi, Xj are original reference
        coordinates of shape (npairs, npts, 2) and mult the symmetry factor."""
        m = self.mesh
        T = m.n_triangles
        X, Y, W = duffy_rule("coincident", self.coincident_order, self.sigma, False)
        idt = np.tile(np.arange(3), (T, 1))
        yield from self._chunks(np.arange(T), np.arange(T), idt, idt, X, Y, W, 1.0, chunk_points)
        for kind in ("edge", "vertex"):
            X, Y, W = duffy_rule(kind, self.order, self.sigma, self.jump)
            i, j, pi, pj = self.touch[kind]
            yield from self._chunks(i, j, pi, pj, X, Y, W, 2.0, chunk_points)
        if len(self.close):
            Xc, Wc = self.close_rule
            nq = len(Wc)
            X = np.repeat(Xc, nq, axis=0)
            Y = np.tile(Xc, (nq, 1))
            W = np.repeat(Wc, nq) * np.tile(Wc, nq)
            i, j = self.close[:, 0], self.close[:, 1]
            yield from self._chunks(i, j, None, None, X, Y, W, 2.0, chunk_points)

    def _chunks(self, i, j, pi, pj, X, Y, W, mult, chunk_points):
        step = max(1, int(chunk_points // len(W)))
        for s in range(0, len(i), step):
            sl = slice(s, s + step)
            if pi is None:
                Xi = np.broadcast_to(X, (len(i[sl]),) + X.shape)
                Xj = np.broadcast_to(Y, (len(i[sl]),) + Y.shape)
            else:
                Xi = _to_original(np.broadcast_to(X, (len(i[sl]),) + X.shape), pi[sl])
                Xj = _to_original(np.broadcast_to(Y, (len(i[sl]),) + Y.shape), pj[sl])
            yield i[sl], j[sl], Xi, Xj, W, mult


def _phys(space: FeSpace, cells, Xref):
    J = space.jacobians[cells]
    v0 = space.mesh.nodes[space.mesh.triangles[cells, 0]]
    x = v0[:, None, 0:1] + J[:, None, 0, :1] * Xref[..., :1] + J[:, None, 0, 1:] * Xref[..., 1:]
    y = v0[:, None, 1:2] + J[:, None, 1, :1] * Xref[..., :1] + J[:, None, 1, 1:] * Xref[..., 1:]
    return np.concatenate((x, y), axis=-1)


# seminorm of a function ------------------------------------------------------


def _values(func, space, cells, Xref, P):
    """Function values at pair points; func is a FeFunction or a callable (or
    an element-wise evaluator taking (cells, Xref, P))."""
    if isinstance(func, FeFunction):
        B = basis(func.space.order, Xref.reshape(-1, 2)).reshape(Xref.shape[:-1] + (-1,))
        return np.einsum("pqk,pk->pq", B, func.coeffs[func.space.cell_dofs[cells]])
    if getattr(func, "elementwise", False):
        return func(cells, Xref, P)
    return np.asarray(func(P.reshape(-1, 2)), dtype=float).reshape(P.shape[:-1])


def seminorm_squared(func, space: FeSpace, s: float, plan: PairPlan | None = None, **kw) -> float:
    """Squared Gagliardo seminorm of order s in (0, 1) of one scalar function."""
    plan = plan or PairPlan(space.mesh, s, **kw)
    total = 0.0
    for i, j, Xi, Xj, W, mult in plan.near_batches():
        Pi, Pj = _phys(space, i, Xi), _phys(space, j, Xj)
        ui = _values(func, space, i, Xi, Pi)
        uj = _values(func, space, j, Xj, Pj)
        d2 = ((Pi - Pj) ** 2).sum(-1)
        det = np.abs(space.det[i] * space.det[j])
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(d2 > 0, (ui - uj) ** 2 * plan.kernel(d2), 0.0)
        total += mult * float((g @ W * det).sum())
    total += _far_seminorm(func, space, plan)
    return total


def _far_points(space: FeSpace, plan: PairPlan):
    Xf, Wf = plan.far_rule
    T = space.mesh.n_triangles
    cells = np.arange(T)
    P = space.map_points(Xf)
    w = (np.abs(space.det)[:, None] * Wf[None, :])
    return cells, Xf, P, w


def _far_blocks(plan: PairPlan, P, w, block=256):
    """Yield (element slice, masked kernel * column weights) blocks."""
    T, nq = w.shape
    Pf = P.reshape(-1, 2)
    wf = w.ravel()
    for s in range(0, T, block):
        e = min(T, s + block)
        Pb = P[s:e].reshape(-1, 2)
        d2 = ((Pb[:, None, :] - Pf[None, :, :]) ** 2).sum(-1)
        mask = plan.near[s:e].toarray()
        mask = np.repeat(np.repeat(mask, nq, axis=0), nq, axis=1)
        d2[mask] = 1.0
        K = plan.kernel(d2)
        K[mask] = 0.0
        yield s, e, K * wf[None, :]


def _far_seminorm(func, space, plan):
    cells, Xf, P, w = _far_points(space, plan)
    Xr = np.broadcast_to(Xf, (len(cells),) + Xf.shape)
    U = _values(func, space, cells, Xr, P)
    Uf = U.ravel()
    wf = w.ravel()
    nq = w.shape[1]
    total = 0.0
    for s, e, KW in _far_blocks(plan, P, w):
        ub = Uf[s * nq:e * nq]
        wb = wf[s * nq:e * nq]
        # sum_qr w_q w_r k (u_q - u_r)^2
        total += float(wb @ (ub**2 * KW.sum(1)) - 2 * (wb * ub) @ (KW @ Uf) + wb @ (KW @ Uf**2))
    return total


# Gram matrix on a finite element space -------------------------------------------


def gram(space: FeSpace, s: float, plan: PairPlan | None = None, **kw) -> np.ndarray:
    """Dense matrix A with u^T A u = |u|_s^2 for all u in the space."""
    plan = plan or PairPlan(space.mesh, s, **kw)
    n = space.dof_count
    A = np.zeros((n, n))
    order = space.order
    for i, j, Xi, Xj, W, mult in plan.near_batches():
        Pi, Pj = _phys(space, i, Xi), _phys(space, j, Xj)
        Bi = basis(order, Xi.reshape(-1, 2)).reshape(Xi.shape[:-1] + (-1,))
        Bj = basis(order, Xj.reshape(-1, 2)).reshape(Xj.shape[:-1] + (-1,))
        psi = np.concatenate((Bi, -Bj), axis=-1)  # (p, q, 2 nloc)
        d2 = ((Pi - Pj) ** 2).sum(-1)
        with np.errstate(divide="ignore"):
            k = np.where(d2 > 0, plan.kernel(d2), 0.0)
        wk = k * W[None, :] * (mult * np.abs(space.det[i] * space.det[j]))[:, None]
        L = np.matmul(np.swapaxes(psi * wk[..., None], 1, 2), psi)
        dofs = np.concatenate((space.cell_dofs[i], space.cell_dofs[j]), axis=1)
        nl = dofs.shape[1]
        r = np.repeat(dofs, nl, axis=1).ravel()
        c = np.tile(dofs, (1, nl)).ravel()
        np.add.at(A, (r, c), L.ravel())
    cells, Xf, P, w = _far_points(space, plan)
    T, nq = w.shape
    B = basis(order, Xf)  # (nq, nloc)
    rows = np.repeat(np.arange(T * nq), B.shape[1])
    cols = np.repeat(space.cell_dofs, nq, axis=0).ravel()
    Phi = sp.csr_matrix((np.tile(B, (T, 1)).ravel(), (rows, cols)), shape=(T * nq, n))
    PhiT = Phi.T.tocsr()
    wf = w.ravel()
    diag = np.zeros(T * nq)
    for s_, e, KW in _far_blocks(plan, P, w):
        wb = wf[s_ * nq:e * nq]
        diag[s_ * nq:e * nq] = wb * KW.sum(1)
        M = (PhiT @ (wb[:, None] * KW).T).T  # (block, n): rows of W K W Phi
        A -= 2 * (Phi[s_ * nq:e * nq].T @ M)
    A += 2 * (PhiT @ sp.diags(diag) @ Phi).toarray()
    return (A + A.T) / 2
