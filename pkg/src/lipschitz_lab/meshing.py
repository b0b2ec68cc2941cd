"""Conforming triangulations of polygonal domains.

Triangle (Shewchuk) generates quality meshes; grading toward reentrant
corners is imposed through per-element area bounds in its refinement mode.
Red refinement produces nested meshes.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np
import triangle as tr

from .errors import BadParam, MeshFailure, UnknownTag
from .geometry import Domain

MIN_ANGLE = 20.0


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray          # (N, 2)
    triangles: np.ndarray      # (T, 3), counter-clockwise
    boundary_edges: np.ndarray  # (B, 2)
    boundary_tags: tuple       # B entries, str or None
    corner_nodes: tuple        # (node index, omega) per domain vertex

    def __post_init__(self):
        for a in (self.nodes, self.triangles, self.boundary_edges):
            a.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def diameters(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        L = np.stack([np.linalg.norm(p[:, i] - p[:, (i + 1) % 3], axis=1) for i in range(3)], 1)
        return L.max(1)

    @cached_property
    def h_max(self) -> float:
        return float(self.diameters.max())

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(1)

    @cached_property
    def _edge_data(self):
        t = self.triangles
        loc = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        srt = np.sort(loc, axis=1)
        edges, inv = np.unique(srt, axis=0, return_inverse=True)
        return edges, inv.reshape(3, -1).T

    @property
    def edges(self) -> np.ndarray:
        """Unique undirected edges (E, 2), sorted node pairs."""
        return self._edge_data[0]

    @property
    def tri_edges(self) -> np.ndarray:
        """(T, 3) edge ids; local edge i joins local vertices i and i+1."""
        return self._edge_data[1]

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    @cached_property
    def tri_neighbors_of_node(self):
        """CSR-style node -> triangles incidence (indptr, indices)."""
        T = self.n_triangles
        rows = self.triangles.ravel()
        cols = np.repeat(np.arange(T), 3)
        order = np.argsort(rows, kind="stable")
        indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        return np.cumsum(indptr), cols[order]


class BoundaryEdges(NamedTuple):
    nodes: np.ndarray     # (B, 2) oriented with the interior on the left
    a: np.ndarray
    b: np.ndarray
    lengths: np.ndarray
    tangents: np.ndarray
    normals: np.ndarray   # outward unit normals
    tags: tuple
    tri: np.ndarray       # owning triangle
    local: np.ndarray     # local edge index in the owning triangle

    @property
    def total_length(self) -> float:
        return float(self.lengths.sum())


def _reentrant(d: Domain) -> np.ndarray:
    idx = [i for i, w in d.corner_angles if w > math.pi + 1e-9]
    return d.vertices[idx]


def grading_size(d: Domain, h: float, grading: float, radius: float | None = None) -> Callable:
    """Local mesh size h * min(1, r/R)^(1-grading), r = distance to the nearest reentrant corner.

    The size is floored at R (h/R)^(1/grading), the usual graded-mesh corner size.
    """
    corners = _reentrant(d)
    R = radius if radius is not None else min(1.0, d.diameter / 2)
    mu = 1.0 - grading
    if grading >= 1.0 or len(corners) == 0:
        return lambda P: np.full(len(P), h)
    hmin = R * (min(h, R) / R) ** (1.0 / grading)

    def size(P):
        r = np.sqrt(((P[:, None, :] - corners[None]) ** 2).sum(-1)).min(1)
        return np.maximum(h * np.minimum(1.0, r / R) ** mu, hmin)

    return size


def _split_segments(d: Domain, seg_h):
    """Pre-split domain edges; seg_h maps edge index -> max segment length (or None)."""
    verts = [tuple(p) for p in d.vertices.tolist()]
    segs, marks = [], []
    n = d.n
    for i in range(n):
        a, b = d.vertices[i], d.vertices[(i + 1) % n]
        hi = seg_h(i) if seg_h is not None else None
        m = 1 if hi is None else max(1, int(math.ceil(np.linalg.norm(b - a) / hi - 1e-9)))
        prev = i
        for j in range(1, m):
            verts.append(tuple((a + (b - a) * (j / m)).tolist()))
            segs.append((prev, len(verts) - 1))
            marks.append(i + 1)
            prev = len(verts) - 1
        segs.append((prev, (i + 1) % n))
        marks.append(i + 1)
    return np.array(verts), np.array(segs), np.array(marks)


def triangulate(
    d: Domain,
    h: float,
    grading: float = 1.0,
    *,
    size_fn: Callable | None = None,
    segment_h: Callable | None = None,
    grading_radius: float | None = None,
    max_iter: int = 40,
) -> Mesh:
    """Quality mesh (minimum angle 20 degrees) with element diameter bounded by the local size.

    Parameters
    ----------
    h : float
        Maximum element diameter away from reentrant corners.
    grading : float
        1 gives a quasi-uniform mesh; gamma < 1 shrinks elements like
        h * r^(1-gamma) toward corners with interior angle above pi.
    size_fn : callable, optional
        Extra local size bound evaluated on (n, 2) arrays of points.
    segment_h : callable, optional
        Maps a domain edge index to the maximum length of its boundary segments.
    """
    if not (h > 0 and math.isfinite(h)):
        raise BadParam(f"mesh size must be positive, got {h!r}")
    if not 0.0 < grading <= 1.0:
        raise BadParam(f"grading must lie in (0, 1], got {grading!r}")
    gsize = grading_size(d, h, grading, grading_radius)
    if size_fn is None:
        size = gsize
    else:
        size = lambda P: np.minimum(gsize(P), size_fn(P))

    verts, segs, marks = _split_segments(d, segment_h)
    area0 = math.sqrt(3) / 4 * h * h * 0.5
    opts = f"pq{MIN_ANGLE:g}Q"
    cur = tr.triangulate(dict(vertices=verts, segments=segs, segment_markers=marks), opts + f"a{area0:.17g}")
    for _ in range(max_iter):
        P = cur["vertices"]
        T = cur["triangles"]
        p = P[T]
        L = np.stack([np.linalg.norm(p[:, i] - p[:, (i + 1) % 3], axis=1) for i in range(3)], 1).max(1)
        # size evaluated at the vertex closest to any corner (conservative)
        target = size(p.reshape(-1, 2)).reshape(-1, 3).min(1)
        bad = L > target * (1 + 1e-12)
        if not bad.any():
            break
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        amax = np.where(bad, np.minimum(area * 0.5, math.sqrt(3) / 4 * target**2 * 0.7), area * 4 + 1.0)
        cur = dict(cur)
        cur["triangle_max_area"] = amax
        cur = tr.triangulate(cur, "r" + opts + "a")
    else:
        raise MeshFailure("size constraints not met within the iteration budget")
    return _from_triangle(d, cur)


def _from_triangle(d: Domain, out) -> Mesh:
    nodes = np.ascontiguousarray(out["vertices"], dtype=float)
    tris = np.ascontiguousarray(out["triangles"], dtype=np.int64)
    p = nodes[tris]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    neg = (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]) < 0
    tris[neg] = tris[neg][:, [0, 2, 1]]
    segs = np.asarray(out["segments"], dtype=np.int64)
    marks = np.asarray(out["segment_markers"]).ravel()
    if (marks < 1).any():
        raise MeshFailure("boundary segment lost its domain edge marker")
    corner = tuple((i, w) for i, w in d.corner_angles)
    if not np.allclose(nodes[: d.n], d.vertices, rtol=0, atol=0):
        raise MeshFailure("domain vertices were not kept as leading mesh nodes")
    tags = tuple(d.tags[m - 1] for m in marks)
    return _orient_boundary(Mesh(nodes, tris, segs, tags, corner))


def _orient_boundary(m: Mesh) -> Mesh:
    """Orient boundary edges as in their owning triangle (interior on the left)."""
    t = m.triangles
    loc = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    lookup = {(int(a), int(b)) for a, b in loc}
    be = m.boundary_edges.copy()
    for i, (a, b) in enumerate(be):
        if (int(a), int(b)) not in lookup:
            if (int(b), int(a)) not in lookup:
                raise MeshFailure(f"boundary edge {a}-{b} not in any triangle")
            be[i] = (b, a)
    order = np.lexsort((be[:, 1], be[:, 0]))
    return Mesh(m.nodes, m.triangles, be[order], tuple(m.boundary_tags[i] for i in order), m.corner_nodes)


def refine(m: Mesh) -> Mesh:
    """Red refinement: every triangle into four similar children."""
    N = m.n_nodes
    E = m.edges
    mid = (m.nodes[E[:, 0]] + m.nodes[E[:, 1]]) / 2
    nodes = np.vstack((m.nodes, mid))
    te = m.tri_edges + N
    a, b, c = m.triangles.T
    ab, bc, ca = te.T
    tris = np.concatenate(
        [np.column_stack(x) for x in ((a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca))]
    )
    # children stay grouped by parent: child j of parent t is row j*T + t
    key = {tuple(e): i for i, e in enumerate(E.tolist())}
    bnew, tnew = [], []
    for (p, q), tag in zip(m.boundary_edges.tolist(), m.boundary_tags):
        mnode = key[(min(p, q), max(p, q))] + N
        bnew += [(p, mnode), (mnode, q)]
        tnew += [tag, tag]
    out = Mesh(nodes, tris, np.array(bnew, dtype=np.int64), tuple(tnew), m.corner_nodes)
    return out


def boundary_edges(m: Mesh, tag: str | None = None) -> BoundaryEdges:
    if tag is not None and tag not in set(m.boundary_tags):
        raise UnknownTag(f"unknown boundary tag {tag!r}")
    sel = np.array([tag is None or t == tag for t in m.boundary_tags], dtype=bool)
    be = m.boundary_edges[sel]
    a, b = m.nodes[be[:, 0]], m.nodes[be[:, 1]]
    v = b - a
    L = np.hypot(v[:, 0], v[:, 1])
    t = v / L[:, None]
    n = np.column_stack((t[:, 1], -t[:, 0]))
    tri, local = _owner(m, be)
    tags = tuple(x for x, s in zip(m.boundary_tags, sel) if s)
    return BoundaryEdges(be, a, b, L, t, n, tags, tri, local)


def _owner(m: Mesh, be: np.ndarray):
    t = m.triangles
    key = {}
    for j, (i0, i1) in enumerate(((0, 1), (1, 2), (2, 0))):
        for k, (p, q) in enumerate(zip(t[:, i0].tolist(), t[:, i1].tolist())):
            key[(p, q)] = (k, j)
    res = np.array([key[(int(p), int(q))] for p, q in be], dtype=np.int64).reshape(-1, 2)
    return res[:, 0], res[:, 1]


def write_mesh(m: Mesh, path) -> None:
    out = [f"nodes {m.n_nodes} / tris {m.n_triangles}"]
    out += [f"n {x!r} {y!r}" for x, y in m.nodes.tolist()]
    out += [f"t {i} {j} {k}" for i, j, k in m.triangles.tolist()]
    out += [f"b {i} {j} {'-' if t is None else t}" for (i, j), t in zip(m.boundary_edges.tolist(), m.boundary_tags)]
    out += [f"c {i} {w!r}" for i, w in m.corner_nodes]
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def read_mesh(path) -> Mesh:
    nodes, tris, bnd, tags, corners = [], [], [], [], []
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 5 or header[0] != "nodes" or header[3] != "tris":
            raise ValueError("bad mesh header")
        for line in fh:
            f = line.split()
            if not f:
                continue
            if f[0] == "n":
                nodes.append((float(f[1]), float(f[2])))
            elif f[0] == "t":
                tris.append((int(f[1]), int(f[2]), int(f[3])))
            elif f[0] == "b":
                bnd.append((int(f[1]), int(f[2])))
                tags.append(None if f[3] == "-" else f[3])
            elif f[0] == "c":
                corners.append((int(f[1]), float(f[2])))
            else:
                raise ValueError(f"bad mesh line: {line.strip()}")
    if len(nodes) != int(header[1]) or len(tris) != int(header[4]):
        raise ValueError("mesh counts do not match header")
    return Mesh(
        np.array(nodes, dtype=float).reshape(-1, 2),
        np.array(tris, dtype=np.int64).reshape(-1, 3),
        np.array(bnd, dtype=np.int64).reshape(-1, 2),
        tuple(tags),
        tuple(corners),
    )


def mesh_domain(m: Mesh) -> Domain:
    """The polygon a mesh was generated from (its vertices lead the node list)."""
    n = len(m.corner_nodes)
    v = np.array(m.nodes[:n])
    start = {int(a): t for (a, _), t in zip(m.boundary_edges.tolist(), m.boundary_tags)}
    return Domain(v, tuple(start.get(i) for i in range(n)))


def mesh_id(m: Mesh) -> str:
    """Short content hash, stable across runs."""
    h = hashlib.sha1(np.ascontiguousarray(m.nodes).tobytes())
    h.update(np.ascontiguousarray(m.triangles).tobytes())
    return h.hexdigest()[:12]
