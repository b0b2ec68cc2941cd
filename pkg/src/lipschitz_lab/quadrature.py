"""Quadrature rules on the reference triangle {(x, y): x, y >= 0, x + y <= 1}
and on [0, 1].  Triangle weights sum to the reference area 1/2."""

from functools import lru_cache

import numpy as np


def gauss_interval(n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1) / 2, w / 2


def _sym(entries):
    pts, wts = [], []
    for kind, w, *c in entries:
        if kind == 1:
            pts.append((1 / 3, 1 / 3, 1 / 3))
            wts.append(w)
        elif kind == 3:
            a = c[0]
            b = 1 - 2 * a
            for p in ((a, a, b), (a, b, a), (b, a, a)):
                pts.append(p)
                wts.append(w)
    bary = np.array(pts)
    return bary[:, 1:], np.array(wts) / 2


# symmetric Strang-Fix / Dunavant rules, degree -> (points, weights)
_DUNAVANT = {
    1: [(1, 1.0)],
    2: [(3, 1 / 3, 1 / 6)],
    4: [
        (3, 0.223381589678011, 0.445948490915965),
        (3, 0.109951743655322, 0.091576213509771),
    ],
    5: [
        (1, 0.225),
        (3, 0.132394152788506, 0.470142064105115),
        (3, 0.125939180544827, 0.101286507323456),
    ],
}


@lru_cache(maxsize=None)
def collapsed_gauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Conical (Duffy-collapsed) tensor Gauss rule with n*n points, exact to degree 2n-2."""
    t, w = gauss_interval(n)
    u, v = np.meshgrid(t, t, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    x = u.ravel()
    y = (v * (1 - u)).ravel()
    return np.column_stack((x, y)), (wu * wv * (1 - u)).ravel()


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Points and weights exact for polynomials of the given total degree."""
    for d in sorted(_DUNAVANT):
        if d >= degree:
            return _sym(_DUNAVANT[d])
    return collapsed_gauss((degree + 3) // 2)


@lru_cache(maxsize=None)
def subdivided_rule(degree: int, levels: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite rule on 4**levels red subtriangles of the reference triangle."""
    X, W = triangle_rule(degree)
    tris = [np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])]
    for _ in range(levels):
        nxt = []
        for a, b, c in tris:
            ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
            nxt += [np.array(t) for t in ((a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca))]
        tris = nxt
    pts, wts = [], []
    scale = 4.0**-levels
    for a, b, c in tris:
        J = np.column_stack((b - a, c - a))
        pts.append(a + X @ J.T)
        wts.append(W * scale)
    return np.vstack(pts), np.concatenate(wts)
