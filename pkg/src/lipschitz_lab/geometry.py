"""Planar polygonal domains, sawtooth family, distance functions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegenerateEdge, InvalidEps, SelfIntersecting, UnknownTag

ANGLE_TOL = 1e-9
GAMMA_TAG = "gamma_eps"


class Point2(NamedTuple):
    x: float
    y: float


class Segment(NamedTuple):
    start: np.ndarray
    end: np.ndarray
    length: float
    tangent: np.ndarray
    normal: np.ndarray
    s0: float
    tag: str | None
    index: int


@dataclass(frozen=True, eq=False)
class Domain:
    """Simple polygon, counter-clockwise.

    ``tags[i]`` labels the edge from vertex i to vertex i+1.
    """

    vertices: np.ndarray
    tags: tuple
    corner_angles: tuple = field(init=False)
    diameter: float = field(init=False)
    boundary_length: float = field(init=False)
    area: float = field(init=False)

    def __post_init__(self):
        v = self.vertices
        v.setflags(write=False)
        object.__setattr__(self, "corner_angles", tuple((i, float(w)) for i, w in enumerate(_angles(v))))
        diff = v[:, None, :] - v[None, :, :]
        object.__setattr__(self, "diameter", float(np.sqrt((diff**2).sum(-1)).max()))
        e = np.roll(v, -1, axis=0) - v
        object.__setattr__(self, "boundary_length", float(np.hypot(e[:, 0], e[:, 1]).sum()))
        object.__setattr__(self, "area", _signed_area(v))

    @property
    def n(self) -> int:
        return len(self.vertices)

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    def known_tags(self) -> set:
        return {t for t in self.tags if t is not None}

    def centroid(self) -> np.ndarray:
        a, b = self.edges()
        cr = a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1]
        A = cr.sum() / 2
        cx = ((a[:, 0] + b[:, 0]) * cr).sum() / (6 * A)
        cy = ((a[:, 1] + b[:, 1]) * cr).sum() / (6 * A)
        return np.array([cx, cy])

    def is_convex(self) -> bool:
        return all(w < math.pi - ANGLE_TOL for _, w in self.corner_angles)


@dataclass(frozen=True)
class SawtoothParams:
    k: int

    def __post_init__(self):
        if not isinstance(self.k, (int, np.integer)) or isinstance(self.k, bool) or self.k < 1:
            raise InvalidEps(f"sawtooth needs a positive integer k, got {self.k!r}")

    @property
    def eps(self) -> float:
        return 1.0 / (4 * self.k)

    @classmethod
    def from_eps(cls, eps) -> "SawtoothParams":
        inv = Fraction(eps).limit_denominator(10**9) if not isinstance(eps, Fraction) else eps
        if inv <= 0 or abs(float(inv) - float(eps)) > 1e-15 or inv.numerator != 1 or inv.denominator % 4:
            raise InvalidEps(f"eps must equal 1/(4k), got {eps!r}")
        return cls(inv.denominator // 4)


def _signed_area(v: np.ndarray) -> float:
    w = np.roll(v, -1, axis=0)
    return float((v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]).sum() / 2)


def _angles(v: np.ndarray) -> np.ndarray:
    # interior angle = pi minus the signed turning angle (ccw polygon)
    e_in = v - np.roll(v, 1, axis=0)
    e_out = np.roll(v, -1, axis=0) - v
    cr = e_in[:, 0] * e_out[:, 1] - e_in[:, 1] * e_out[:, 0]
    dt = (e_in * e_out).sum(1)
    return math.pi - np.arctan2(cr, dt)


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    scale = max(np.abs(np.concatenate([p1, p2, q1, q2])).max(), 1.0)
    tol = 1e-14 * scale * scale
    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    if ((d1 > tol and d2 < -tol) or (d1 < -tol and d2 > tol)) and (
        (d3 > tol and d4 < -tol) or (d3 < -tol and d4 > tol)
    ):
        return True

    def on_seg(a, b, c, d):
        return abs(d) <= tol and min(a[0], b[0]) - 1e-14 <= c[0] <= max(a[0], b[0]) + 1e-14 and \
            min(a[1], b[1]) - 1e-14 <= c[1] <= max(a[1], b[1]) + 1e-14

    return on_seg(q1, q2, p1, d1) or on_seg(q1, q2, p2, d2) or on_seg(p1, p2, q1, d3) or on_seg(p1, p2, q2, d4)


def _check_simple(v: np.ndarray):
    n = len(v)
    a, b = v, np.roll(v, -1, axis=0)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if (lo[i] > hi[j] + 1e-14).any() or (lo[j] > hi[i] + 1e-14).any():
                continue
            if _segments_cross(a[i], b[i], a[j], b[j]):
                raise SelfIntersecting(f"edges {i} and {j} intersect")


def make_polygon(vertices: Sequence, tags: Sequence | None = None) -> Domain:
    """Build a validated counter-clockwise polygon.

    Collinear vertices between edges with the same tag are merged.
    Clockwise input is reversed (tags follow their edges).
    """
    v = np.array([[float(p[0]), float(p[1])] for p in vertices], dtype=float)
    if len(v) < 3:
        raise DegenerateEdge("a polygon needs at least 3 vertices")
    if not np.isfinite(v).all():
        raise ValueError("non-finite vertex coordinate")
    tags = list(tags) if tags is not None else [None] * len(v)
    if len(tags) != len(v):
        raise ValueError("one tag per edge expected")
    e = np.roll(v, -1, axis=0) - v
    lengths = np.hypot(e[:, 0], e[:, 1])
    if (lengths <= 1e-14 * max(1.0, np.abs(v).max())).any():
        raise DegenerateEdge(f"zero-length edge at vertex {int(np.argmin(lengths))}")
    if _signed_area(v) < 0:
        # edge i (v_i -> v_i+1) becomes edge n-2-i after reversal
        v = v[::-1].copy()
        tags = tags[::-1]
        tags = tags[1:] + tags[:1]
    changed = True
    while changed and len(v) > 3:
        changed = False
        ang = _angles(v)
        for i in range(len(v)):
            if abs(ang[i] - math.pi) < ANGLE_TOL and tags[i - 1] == tags[i]:
                v = np.delete(v, i, axis=0)
                del tags[i]
                changed = True
                break
    _check_simple(v)
    if _signed_area(v) <= 0:
        raise SelfIntersecting("polygon has non-positive area")
    return Domain(v, tuple(tags))


def unit_square() -> Domain:
    return make_polygon([(0, 0), (1, 0), (1, 1), (0, 1)])


def lshape() -> Domain:
    return make_polygon([(0, 0), (1, 0), (1, 1), (-1, 1), (-1, -1), (0, -1)])


def sector(omega: float, n_arc: int = 64, radius: float = 1.0) -> Domain:
    """Polygonal sector {0<r<radius, 0<theta<omega}, arc sampled at n_arc points."""
    th = np.linspace(0.0, omega, n_arc)
    pts = [(0.0, 0.0)] + [(radius * math.cos(t), radius * math.sin(t)) for t in th]
    return make_polygon(pts)


def make_sawtooth(params: SawtoothParams | int) -> Domain:
    if not isinstance(params, SawtoothParams):
        params = SawtoothParams(params)
    k, eps = params.k, params.eps
    # 2k segments over [0, 1/2]
    bottom = [(j * eps, eps if j % 2 else 0.0) for j in range(2 * k + 1)]
    pts = bottom + [(0.5, 0.5), (0.0, 0.5)]
    tags = [GAMMA_TAG] * (2 * k) + ["box"] * 3
    return make_polygon(pts, tags)


def interior_angles(d: Domain) -> list:
    return sorted(d.corner_angles, key=lambda t: (t[1], t[0]))


def _as_points(p) -> tuple[np.ndarray, bool]:
    a = np.asarray(p, dtype=float)
    if a.ndim == 1:
        return a[None, :], True
    return a, False


def edge_distances(d: Domain, pts: np.ndarray) -> np.ndarray:
    """Distances (n_points, n_edges) from points to each closed edge."""
    a, b = d.edges()
    ab = b - a
    L2 = (ab**2).sum(1)
    ap = pts[:, None, :] - a[None, :, :]
    t = np.clip((ap * ab[None]).sum(-1) / L2[None], 0.0, 1.0)
    q = ap - t[..., None] * ab[None]
    return np.sqrt((q**2).sum(-1))


def contains(d: Domain, pts) -> np.ndarray:
    """Crossing-number point-in-polygon test (boundary points unspecified)."""
    P, single = _as_points(pts)
    a, b = d.edges()
    x, y = P[:, 0:1], P[:, 1:2]
    ya, yb = a[None, :, 1], b[None, :, 1]
    cond = (ya > y) != (yb > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = a[None, :, 0] + (y - ya) * (b[None, :, 0] - a[None, :, 0]) / (yb - ya)
    inside = (np.where(cond, x < xc, False).sum(1) % 2) == 1
    return inside[0] if single else inside


def _chunked(fn, P, chunk=20000):
    if len(P) <= chunk:
        return fn(P)
    return np.concatenate([fn(P[i:i + chunk]) for i in range(0, len(P), chunk)])


def distance_to_boundary(d: Domain, p):
    """Exact distance to the boundary; 0 for points on or outside the polygon."""
    P, single = _as_points(p)

    def f(Q):
        r = edge_distances(d, Q).min(1)
        r[r <= 1e-12] = 0.0
        return np.where(contains(d, Q), r, 0.0)

    r = _chunked(f, P)
    return float(r[0]) if single else r


def softmin_power(n_edges: int) -> float:
    # n^{-1/p} >= 1/2 keeps sigma within [rho/2, rho]
    return max(8.0, math.ceil(math.log(n_edges) / math.log(2.0)))


def regularized_distance(d: Domain, p):
    """Smooth surrogate for the boundary distance.

    Power-mean soft-min ``(sum_i d_i^{-q})^{-1/q}`` of the edge distances.
    It is scale invariant, so the sharpness follows the local distance, and
    ``n^{-1/q} rho <= sigma <= rho``.
    """
    P, single = _as_points(p)
    q = softmin_power(d.n)

    def f(Q):
        D = edge_distances(d, Q)
        m = D.min(1)
        out = np.zeros(len(Q))
        ok = (m > 1e-12) & contains(d, Q)
        ratio = m[ok, None] / D[ok]
        out[ok] = m[ok] * (ratio**q).sum(1) ** (-1.0 / q)
        return out

    r = _chunked(f, P)
    return float(r[0]) if single else r


def boundary_parametrization(d: Domain, tag: str | None = None) -> list[Segment]:
    if tag is not None and tag not in d.known_tags():
        raise UnknownTag(f"unknown boundary tag {tag!r}")
    a, b = d.edges()
    out = []
    s = 0.0
    for i in range(d.n):
        e = b[i] - a[i]
        L = float(math.hypot(e[0], e[1]))
        t = e / L
        if tag is None or d.tags[i] == tag:
            out.append(Segment(a[i].copy(), b[i].copy(), L, t, np.array([t[1], -t[0]]), s, d.tags[i], i))
        s += L
    return out


def write_polygon(d: Domain, path) -> None:
    lines = ["# polygon: v x y per vertex, tag i name per tagged edge"]
    lines += [f"v {x!r} {y!r}" for x, y in d.vertices.tolist()]
    lines += [f"tag {i} {t}" for i, t in enumerate(d.tags) if t is not None]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_polygon(path) -> Domain:
    verts, tagmap = [], {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].split()
            if not line:
                continue
            if line[0] == "v":
                verts.append((float(line[1]), float(line[2])))
            elif line[0] == "tag":
                tagmap[int(line[1])] = line[2]
            else:
                raise ValueError(f"bad polygon line: {raw.strip()}")
    return make_polygon(verts, [tagmap.get(i) for i in range(len(verts))])
