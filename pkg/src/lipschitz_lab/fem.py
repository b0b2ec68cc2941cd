"""P1 / P2 Lagrange finite elements on triangular meshes."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree

from .errors import BadOrder, HessOnP1, OutsideMesh, QuadratureFailure, SolverFailure
from .fields import Field
from .meshing import Mesh
from .quadrature import subdivided_rule, triangle_rule

# reference basis ------------------------------------------------------------


def basis(order: int, X: np.ndarray) -> np.ndarray:
    """Shape function values (nq, nloc) at reference points X (nq, 2)."""
    x, y = X[:, 0], X[:, 1]
    l0, l1, l2 = 1 - x - y, x, y
    if order == 1:
        return np.column_stack((l0, l1, l2))
    return np.column_stack(
        (l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), 4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0)
    )


def basis_grad(order: int, X: np.ndarray) -> np.ndarray:
    """Reference gradients (nq, nloc, 2)."""
    nq = len(X)
    if order == 1:
        g = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        return np.broadcast_to(g, (nq, 3, 2)).copy()
    x, y = X[:, 0], X[:, 1]
    l0, l1, l2 = 1 - x - y, x, y
    dl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    lam = np.column_stack((l0, l1, l2))
    G = np.empty((nq, 6, 2))
    for i in range(3):
        G[:, i, :] = (4 * lam[:, i] - 1)[:, None] * dl[i]
    for k, (i, j) in enumerate(((0, 1), (1, 2), (2, 0))):
        G[:, 3 + k, :] = 4 * (lam[:, i, None] * dl[j] + lam[:, j, None] * dl[i])
    return G


def basis_hess_p2() -> np.ndarray:
    """Constant reference Hessians (6, 2, 2) of the P2 shape functions."""
    dl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    H = np.empty((6, 2, 2))
    for i in range(3):
        H[i] = 4 * np.outer(dl[i], dl[i])
    for k, (i, j) in enumerate(((0, 1), (1, 2), (2, 0))):
        H[3 + k] = 4 * (np.outer(dl[i], dl[j]) + np.outer(dl[j], dl[i]))
    return H


def nloc(order: int) -> int:
    return 3 if order == 1 else 6


# spaces ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FeSpace:
    mesh: Mesh
    order: int

    def __post_init__(self):
        if self.order not in (1, 2):
            raise BadOrder(f"order must be 1 or 2, got {self.order!r}")

    @cached_property
    def cell_dofs(self) -> np.ndarray:
        m = self.mesh
        if self.order == 1:
            return np.asarray(m.triangles)
        return np.hstack((m.triangles, m.tri_edges + m.n_nodes))

    @property
    def dof_count(self) -> int:
        m = self.mesh
        return m.n_nodes + (len(m.edges) if self.order == 2 else 0)

    @cached_property
    def dof_coords(self) -> np.ndarray:
        m = self.mesh
        if self.order == 1:
            return np.asarray(m.nodes)
        mid = m.nodes[m.edges].mean(1)
        return np.vstack((m.nodes, mid))

    @cached_property
    def boundary_dofs(self) -> np.ndarray:
        m = self.mesh
        b = m.boundary_nodes
        if self.order == 2:
            E = m.edges
            key = {tuple(e): i for i, e in enumerate(E.tolist())}
            eid = [key[(min(p, q), max(p, q))] for p, q in m.boundary_edges.tolist()]
            b = np.concatenate((b, np.array(eid, dtype=np.int64) + m.n_nodes))
        return np.unique(b)

    @cached_property
    def interior_dofs(self) -> np.ndarray:
        mask = np.ones(self.dof_count, dtype=bool)
        mask[self.boundary_dofs] = False
        return np.flatnonzero(mask)

    # affine element maps
    @cached_property
    def jacobians(self) -> np.ndarray:
        p = self.mesh.nodes[self.mesh.triangles]
        return np.stack((p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=2)  # columns

    @cached_property
    def det(self) -> np.ndarray:
        J = self.jacobians
        return J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]

    @cached_property
    def inv_t(self) -> np.ndarray:
        """J^{-T} per element."""
        return np.transpose(np.linalg.inv(self.jacobians), (0, 2, 1))

    def map_points(self, X: np.ndarray, cells=None) -> np.ndarray:
        """Physical points (T, nq, 2) of reference points X."""
        J = self.jacobians if cells is None else self.jacobians[cells]
        v0 = self.mesh.nodes[self.mesh.triangles[:, 0] if cells is None else self.mesh.triangles[cells, 0]]
        return v0[:, None, :] + np.einsum("tij,qj->tqi", J, X)

    def phys_grads(self, X: np.ndarray, cells=None) -> np.ndarray:
        """Physical shape gradients (T, nq, nloc, 2)."""
        G = basis_grad(self.order, X)
        A = self.inv_t if cells is None else self.inv_t[cells]
        return np.einsum("tij,qkj->tqki", A, G)

    @cached_property
    def phys_hess(self) -> np.ndarray:
        """Physical shape Hessians (T, 6, 2, 2) for P2."""
        if self.order != 2:
            raise HessOnP1("Hessians need a P2 space")
        A = self.inv_t
        return np.einsum("tia,kab,tjb->tkij", A, basis_hess_p2(), A)

    @cached_property
    def _locator(self):
        return cKDTree(self.mesh.centroids)


def build_space(m: Mesh, order: int) -> FeSpace:
    return FeSpace(m, order)


@dataclass(frozen=True, eq=False)
class FeFunction:
    space: FeSpace
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (self.space.dof_count,):
            raise ValueError(f"expected {self.space.dof_count} coefficients, got {c.shape}")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __mul__(self, a: float) -> "FeFunction":
        return FeFunction(self.space, self.coeffs * a)

    __rmul__ = __mul__

    def __add__(self, other) -> "FeFunction":
        if isinstance(other, FeFunction):
            return FeFunction(self.space, self.coeffs + other.coeffs)
        return FeFunction(self.space, self.coeffs + float(other))

    def __sub__(self, other) -> "FeFunction":
        return self + (other * -1.0 if isinstance(other, FeFunction) else -float(other))

    # element-wise evaluation at reference points
    def cell_values(self, X: np.ndarray, cells=None) -> np.ndarray:
        dofs = self.space.cell_dofs if cells is None else self.space.cell_dofs[cells]
        return self.coeffs[dofs] @ basis(self.space.order, X).T

    def cell_grads(self, X: np.ndarray, cells=None) -> np.ndarray:
        dofs = self.space.cell_dofs if cells is None else self.space.cell_dofs[cells]
        return np.einsum("tk,tqki->tqi", self.coeffs[dofs], self.space.phys_grads(X, cells))

    def cell_hessians(self, cells=None) -> np.ndarray:
        if self.space.order != 2:
            raise HessOnP1("Hessian of a P1 function is not defined element-wise")
        dofs = self.space.cell_dofs if cells is None else self.space.cell_dofs[cells]
        H = self.space.phys_hess if cells is None else self.space.phys_hess[cells]
        return np.einsum("tk,tkij->tij", self.coeffs[dofs], H)


Func = Union[Callable, Field, FeFunction, np.ndarray, float, int]


def interpolate(space: FeSpace, f) -> FeFunction:
    if isinstance(f, (int, float)):
        return FeFunction(space, np.full(space.dof_count, float(f)))
    return FeFunction(space, np.asarray(f(space.dof_coords), dtype=float))


# quadrature helpers -----------------------------------------------------------


def _rule(space: FeSpace, degree=None):
    return triangle_rule(degree if degree is not None else 2 * space.order + 2)


def boundary_touching_cells(m: Mesh) -> np.ndarray:
    on_b = np.zeros(m.n_nodes, dtype=bool)
    on_b[m.boundary_nodes] = True
    return on_b[m.triangles].any(1)


def _sample(f, P: np.ndarray) -> np.ndarray:
    """Evaluate a callable on (T, nq, 2) points."""
    shp = P.shape[:-1]
    v = np.asarray(f(P.reshape(-1, 2)), dtype=float)
    return v.reshape(shp + v.shape[1:])


def integrate(space: FeSpace, f, degree: int = 6, levels: int = 0, boundary_levels: int = 0) -> float:
    """Integral of a callable over the mesh, optional subdivision near the boundary."""
    m = space.mesh
    total = 0.0
    groups = [(np.arange(m.n_triangles), levels)]
    if boundary_levels > levels:
        bt = boundary_touching_cells(m)
        groups = [(np.flatnonzero(~bt), levels), (np.flatnonzero(bt), boundary_levels)]
    for cells, lev in groups:
        if len(cells) == 0:
            continue
        X, W = subdivided_rule(degree, lev)
        P = space.map_points(X, cells)
        total += float((_sample(f, P) @ W * space.det[cells]).sum())
    return total


# assembly -------------------------------------------------------------------


def _scatter(space: FeSpace, local: np.ndarray, cells=None) -> sp.csr_matrix:
    dofs = space.cell_dofs if cells is None else space.cell_dofs[cells]
    n = dofs.shape[1]
    rows = np.repeat(dofs, n, axis=1).ravel()
    cols = np.tile(dofs, (1, n)).ravel()
    N = space.dof_count
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(N, N)).tocsr()


def stiffness(space: FeSpace) -> sp.csr_matrix:
    X, W = _rule(space, 2 * space.order - 2 if space.order > 1 else 1)
    G = space.phys_grads(X)
    loc = np.einsum("q,tqai,tqbi,t->tab", W, G, G, np.abs(space.det))
    return _scatter(space, loc)


def mass(space: FeSpace) -> sp.csr_matrix:
    X, W = _rule(space, 2 * space.order)
    B = basis(space.order, X)
    loc = np.einsum("q,qa,qb,t->tab", W, B, B, np.abs(space.det))
    return _scatter(space, loc)


def weighted_mass(space: FeSpace, weight: Callable, degree: int = 4, levels: int = 1,
                  boundary_levels: int = 3) -> sp.csr_matrix:
    """Mass matrix with weight, subdividing boundary-adjacent elements further."""
    m = space.mesh
    bt = boundary_touching_cells(m)
    out = sp.csr_matrix((space.dof_count, space.dof_count))
    for cells, lev in ((np.flatnonzero(~bt), levels), (np.flatnonzero(bt), boundary_levels)):
        if len(cells) == 0:
            continue
        X, W = subdivided_rule(degree, lev)
        B = basis(space.order, X)
        w = _sample(weight, space.map_points(X, cells))
        if not np.isfinite(w).all():
            raise QuadratureFailure("weight is not finite at a quadrature point")
        loc = np.einsum("q,tq,qa,qb,t->tab", W, w, B, B, np.abs(space.det[cells]))
        out = out + _scatter(space, loc, cells)
    return out.tocsr()


def assemble(space: FeSpace, kind: str, weight: Callable | None = None, **kw) -> sp.csr_matrix:
    if kind == "stiffness":
        return stiffness(space)
    if kind == "mass":
        return mass(space)
    if kind == "weighted_mass":
        if weight is None:
            raise ValueError("weighted_mass needs a weight")
        return weighted_mass(space, weight, **kw)
    raise ValueError(f"unknown operator kind {kind!r}")


def load_vector(space: FeSpace, f, degree: int | None = None, boundary_levels: int = 0) -> np.ndarray:
    """Vector of integrals of f times each shape function.

    ``f`` may be a callable, a FeFunction on the same space, a constant, or
    an already assembled load vector.
    """
    N = space.dof_count
    if isinstance(f, np.ndarray) and f.shape == (N,):
        return f.astype(float)
    if isinstance(f, FeFunction):
        if f.space is not space:
            raise ValueError("FeFunction load must live on the same space")
        return mass(space) @ f.coeffs
    if isinstance(f, (int, float)):
        c = float(f)
        f = lambda P: np.full(len(P), c)
    deg = degree if degree is not None else 2 * space.order + 2
    m = space.mesh
    b = np.zeros(N)
    groups = [(np.arange(m.n_triangles), 0)]
    if boundary_levels > 0:
        bt = boundary_touching_cells(m)
        groups = [(np.flatnonzero(~bt), 0), (np.flatnonzero(bt), boundary_levels)]
    for cells, lev in groups:
        if len(cells) == 0:
            continue
        X, W = subdivided_rule(deg, lev)
        B = basis(space.order, X)
        fv = _sample(f, space.map_points(X, cells))
        loc = np.einsum("q,tq,qa,t->ta", W, fv, B, np.abs(space.det[cells]))
        np.add.at(b, space.cell_dofs[cells], loc)
    return b


# solving --------------------------------------------------------------------


@dataclass
class LinearSystem:
    operator: sp.csr_matrix
    rhs: np.ndarray
    constrained: np.ndarray


def _spd_solve(A: sp.csr_matrix, b: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    nb = np.linalg.norm(b)
    if nb == 0:
        return np.zeros_like(b)
    diag = {}
    try:
        x = spla.splu(A.tocsc(), permc_spec="COLAMD").solve(b)
        res = np.linalg.norm(A @ x - b) / nb
        diag["direct_residual"] = res
        if res <= tol:
            return x
    except RuntimeError as exc:
        diag["direct_error"] = str(exc)
        x = None
    its = []
    x, info = spla.cg(A, b, x0=x, rtol=tol * 0.1, maxiter=20 * A.shape[0], callback=lambda xk: its.append(1))
    res = np.linalg.norm(A @ x - b) / nb
    diag.update(cg_info=info, cg_iterations=len(its), cg_residual=res)
    if res > tol:
        raise SolverFailure(f"relative residual {res:.3e} above {tol:.1e}", diag)
    return x


def dirichlet_system(space: FeSpace, f, g, **load_kw) -> tuple[LinearSystem, np.ndarray]:
    K = stiffness(space)
    b = load_vector(space, f, **load_kw)
    bd = space.boundary_dofs
    u = np.zeros(space.dof_count)
    if g is None:
        pass
    elif isinstance(g, (int, float)):
        u[bd] = float(g)
    else:
        u[bd] = np.asarray(g(space.dof_coords[bd]), dtype=float)
    return LinearSystem(K, b, bd), u


def solve_dirichlet(space: FeSpace, f, g=0.0, **load_kw) -> FeFunction:
    """Discrete solution of -Lap u = f, u = g on the boundary (dof interpolation)."""
    sysm, u = dirichlet_system(space, f, g, **load_kw)
    I = space.interior_dofs
    K = sysm.operator
    rhs = sysm.rhs[I] - K[I][:, sysm.constrained] @ u[sysm.constrained]
    u[I] = _spd_solve(K[I][:, I].tocsr(), rhs)
    return FeFunction(space, u)


def harmonic_extension(space: FeSpace, g) -> FeFunction:
    return solve_dirichlet(space, 0.0, g)


def weak_laplacian_residual(space: FeSpace, u: FeFunction, f, **load_kw) -> float:
    """Discrete H^{-1} norm of K u - b(f) over interior dofs.

    The norm of a residual functional r is sqrt(r^T K_II^{-1} r), the dual
    of the discrete H^1_0 seminorm.
    """
    K = stiffness(space)
    r = K @ u.coeffs - load_vector(space, f, **load_kw)
    I = space.interior_dofs
    rI = r[I]
    if not np.any(rI):
        return 0.0
    z = _spd_solve(K[I][:, I].tocsr(), rI, tol=1e-12)
    return float(np.sqrt(max(rI @ z, 0.0)))


# point evaluation -------------------------------------------------------------


def locate(space: FeSpace, P: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Containing cell and reference coordinates for each point."""
    m = space.mesh
    P = np.atleast_2d(np.asarray(P, dtype=float))
    k = min(12, m.n_triangles)
    _, cand = space._locator.query(P, k=k)
    cand = np.atleast_2d(cand).reshape(len(P), k)
    cells = np.full(len(P), -1)
    ref = np.zeros((len(P), 2))
    Jinv = np.transpose(space.inv_t, (0, 2, 1))
    v0 = m.nodes[m.triangles[:, 0]]

    def bary(c, p):
        X = np.einsum("...ij,...j->...i", Jinv[c], p - v0[c])
        return X, np.minimum(np.minimum(X[..., 0], X[..., 1]), 1 - X[..., 0] - X[..., 1])

    X, mn = bary(cand, P[:, None, :])
    ok = mn >= -tol
    hit = ok.any(1)
    first = ok.argmax(1)
    idx = np.flatnonzero(hit)
    cells[idx] = cand[idx, first[idx]]
    ref[idx] = X[idx, first[idx]]
    for i in np.flatnonzero(~hit):
        Xa, mna = bary(np.arange(m.n_triangles), P[i][None, :])
        j = int(np.argmax(mna))
        if mna[j] < -tol:
            raise OutsideMesh(f"point {P[i].tolist()} is outside the mesh")
        cells[i], ref[i] = j, Xa[j]
    return cells, ref


def eval(u: FeFunction, p, deriv: str = "value"):
    """Value, gradient or (P2 only) element Hessian at one point or an (n, 2) array."""
    P = np.asarray(p, dtype=float)
    single = P.ndim == 1
    P = np.atleast_2d(P)
    if deriv == "hess" and u.space.order != 2:
        raise HessOnP1("hess requires a P2 function")
    cells, X = locate(u.space, P)
    dofs = u.space.cell_dofs[cells]
    c = u.coeffs[dofs]
    if deriv == "value":
        out = (c * basis(u.space.order, X)).sum(1)
    elif deriv == "grad":
        G = basis_grad(u.space.order, X)
        out = np.einsum("nk,nij,nkj->ni", c, u.space.inv_t[cells], G)
    elif deriv == "hess":
        out = np.einsum("nk,nkij->nij", c, u.space.phys_hess[cells])
    else:
        raise ValueError(f"unknown derivative {deriv!r}")
    return out[0] if single else out


def prolong(u: FeFunction, fine: FeSpace) -> FeFunction:
    """Interpolate onto a nested finer space (exact for nested meshes)."""
    return FeFunction(fine, eval(u, fine.dof_coords, "value"))


# io -------------------------------------------------------------------------


def write_function(u: FeFunction, path, mesh_path) -> None:
    lines = [f"mesh {mesh_path}", f"order {u.space.order}", f"dofs {u.space.dof_count}"]
    lines += [repr(float(c)) for c in u.coeffs]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_function(path, mesh: Mesh | None = None) -> FeFunction:
    from .meshing import read_mesh
    from pathlib import Path

    with open(path) as fh:
        mesh_ref = fh.readline().split(maxsplit=1)[1].strip()
        order = int(fh.readline().split()[1])
        n = int(fh.readline().split()[1])
        coeffs = np.array([float(x) for x in fh.read().split()])
    if mesh is None:
        mp = Path(mesh_ref)
        if not mp.is_absolute():
            mp = Path(path).parent / mp
        mesh = read_mesh(mp)
    if len(coeffs) != n:
        raise ValueError("coefficient count mismatch")
    return FeFunction(FeSpace(mesh, order), coeffs)
