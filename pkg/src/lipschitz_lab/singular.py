"""Corner singular functions, kernel-dimension arithmetic and W^{1,p} thresholds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from scipy import integrate

from .errors import CutoffTooLarge
from .fields import Field
from .geometry import Domain, edge_distances

INT_GUARD = 1e-12


@dataclass(frozen=True)
class SingularExponent:
    omega: float

    def __post_init__(self):
        if not 0 < self.omega < 2 * math.pi:
            raise ValueError("omega must lie in (0, 2 pi)")

    @property
    def alpha(self) -> float:
        return math.pi / self.omega


@dataclass(frozen=True)
class CornerFrame:
    """Polar frame at a polygon vertex: theta = 0 along the outgoing edge,
    theta = omega along the incoming edge, increasing into the domain."""

    vertex: tuple
    theta0: float          # direction angle of the theta = 0 edge
    omega: float
    max_radius: float = math.inf

    def polar(self, P: np.ndarray):
        d = np.atleast_2d(P) - np.asarray(self.vertex)
        r = np.hypot(d[:, 0], d[:, 1])
        raw = np.arctan2(d[:, 1], d[:, 0]) - self.theta0
        # branch cut opposite the bisector keeps both edges on the right side
        th = self.omega / 2 + (raw - self.omega / 2 + math.pi) % (2 * math.pi) - math.pi
        return r, th


def corner_frame(d: Domain, index: int) -> CornerFrame:
    v = d.vertices
    n = d.n
    p = v[index]
    out = v[(index + 1) % n] - p
    omega = dict(d.corner_angles)[index]
    # largest disc around the vertex meeting only the two corner edges
    others = [i for i in range(n) if i not in (index, (index - 1) % n)]
    far = edge_distances(d, p[None, :])[0, others].min() if others else math.inf
    lens = (np.linalg.norm(out), np.linalg.norm(v[index - 1] - p))
    return CornerFrame(tuple(p.tolist()), math.atan2(out[1], out[0]), float(omega), float(min(far, *lens)))


def reentrant_frames(d: Domain) -> list[CornerFrame]:
    return [corner_frame(d, i) for i, w in d.corner_angles if w > math.pi + 1e-9]


def _polar_to_cartesian(frame, r, th, f, fr, ft, frr, frt, ftt, need_hess):
    c, s = np.cos(th), np.sin(th)
    gx = c * fr - s / r * ft
    gy = s * fr + c / r * ft
    R = np.array([[math.cos(frame.theta0), -math.sin(frame.theta0)], [math.sin(frame.theta0), math.cos(frame.theta0)]])
    g = np.column_stack((gx, gy)) @ R.T
    if not need_hess:
        return g, None
    hxx = c * c * frr - 2 * s * c / r * frt + s * s / r**2 * ftt + s * s / r * fr + 2 * s * c / r**2 * ft
    hyy = s * s * frr + 2 * s * c / r * frt + c * c / r**2 * ftt + c * c / r * fr - 2 * s * c / r**2 * ft
    hxy = s * c * frr + (c * c - s * s) / r * frt - s * c / r**2 * ftt - s * c / r * fr - (c * c - s * s) / r**2 * ft
    H = np.empty((len(r), 2, 2))
    H[:, 0, 0], H[:, 1, 1] = hxx, hyy
    H[:, 0, 1] = H[:, 1, 0] = hxy
    return g, R @ H @ R.T


def _smoothstep(r, a):
    """Quintic cutoff: 1 on [0, a/2], 0 on [a, inf), C^2; returns value and two derivatives."""
    t = np.clip((r - a / 2) / (a / 2), 0.0, 1.0)
    inside = (r > a / 2) & (r < a)
    q = 6 * t**5 - 15 * t**4 + 10 * t**3
    dq = (30 * t**4 - 60 * t**3 + 30 * t**2) * inside
    ddq = (120 * t**3 - 180 * t**2 + 60 * t) * inside
    k = 2 / a
    return 1 - q, -dq * k, -ddq * k * k


def singular_function(frame: CornerFrame, alpha: float, a: float | None = None) -> Field:
    """r^alpha sin(alpha theta) eta(r); ``a=None`` drops the cutoff."""
    if a is not None and (a <= 0 or a > frame.max_radius * (1 + 1e-12)):
        raise CutoffTooLarge(f"cutoff radius {a} exceeds {frame.max_radius}")

    def parts(P, need_hess):
        r, th = frame.polar(P)
        r_safe = np.where(r > 0, r, 1.0)
        sn, cs = np.sin(alpha * th), np.cos(alpha * th)
        R0 = r_safe**alpha
        R1 = alpha * r_safe ** (alpha - 1)
        R2 = alpha * (alpha - 1) * r_safe ** (alpha - 2)
        if a is not None:
            e0, e1, e2 = _smoothstep(r_safe, a)
            R0, R1, R2 = R0 * e0, R1 * e0 + R0 * e1, R2 * e0 + 2 * R1 * e1 + R0 * e2
        f = R0 * sn
        g, H = _polar_to_cartesian(frame, r_safe, th, f, R1 * sn, alpha * R0 * cs,
                                   R2 * sn, alpha * R1 * cs, -alpha * alpha * R0 * sn, need_hess)
        zero = r == 0
        f = np.where(zero, 0.0, f)
        return f, g, H, zero

    def value(P):
        return parts(P, False)[0]

    def grad(P):
        f, g, _, zero = parts(P, False)
        g[zero] = np.nan if alpha < 1 else 0.0
        return g

    def hess(P):
        f, g, H, zero = parts(P, True)
        H[zero] = np.nan
        return H

    return Field(value, grad, hess, f"S(alpha={alpha:.6g})")


def kernel_function(frame: CornerFrame, alpha: float) -> Field:
    """z = (r^-alpha - r^alpha) sin(alpha theta), harmonic, zero on r = 1 and on both edges."""

    def parts(P, need_hess):
        r, th = frame.polar(P)
        sn, cs = np.sin(alpha * th), np.cos(alpha * th)
        R0 = r**-alpha - r**alpha
        R1 = -alpha * r ** (-alpha - 1) - alpha * r ** (alpha - 1)
        R2 = alpha * (alpha + 1) * r ** (-alpha - 2) - alpha * (alpha - 1) * r ** (alpha - 2)
        f = R0 * sn
        g, H = _polar_to_cartesian(frame, r, th, f, R1 * sn, alpha * R0 * cs,
                                   R2 * sn, alpha * R1 * cs, -alpha * alpha * R0 * sn, need_hess)
        return f, g, H

    return Field(lambda P: parts(P, False)[0], lambda P: parts(P, False)[1],
                 lambda P: parts(P, True)[2], f"z(alpha={alpha:.6g})")


# kernel dimension arithmetic ----------------------------------------------------


def rational_angle(omega: float, max_den: int = 1000) -> Fraction | None:
    """omega / pi as an exact fraction when omega is a rational multiple of pi."""
    q = Fraction(omega / math.pi).limit_denominator(max_den)
    return q if abs(float(q) * math.pi - omega) < 1e-12 else None


def _largest_below(x) -> int:
    if isinstance(x, Fraction):
        return math.ceil(x) - 1
    return math.ceil(x - INT_GUARD) - 1


def nu_s(omega: float, s) -> int:
    """Largest integer strictly below (1 + s) / alpha = (1 + s) omega / pi."""
    q = rational_angle(omega)
    s_exact = Fraction(s).limit_denominator(10**6) if not isinstance(s, Fraction) else s
    if q is not None and abs(float(s_exact) - float(s)) < 1e-15:
        return _largest_below((1 + s_exact) * q)
    return _largest_below((1 + s) * omega / math.pi)


def nu_s_exact(omega_over_pi: Fraction, s: Fraction) -> int:
    return _largest_below((1 + Fraction(s)) * Fraction(omega_over_pi))


class KernelDimension(NamedTuple):
    dim: int
    applicable: bool
    reason: str
    nu_sum: int


def kernel_dimension(d: Domain, s) -> KernelDimension:
    """Dimension of the space of H^{-s} harmonic functions with zero trace.

    For -1/2 <= s <= 0 the corner count of reentrant angles is returned; for
    other s the sum of nu_s over the corners, flagged inapplicable when an
    angle hits the excluded set {k pi/(s+1): k = 1..s} or s is not an integer.
    """
    angles = [w for _, w in d.corner_angles]
    total = sum(nu_s(w, s) for w in angles)
    if -0.5 <= s <= 0:
        count = sum(1 for w in angles if w > math.pi + 1e-12)
        return KernelDimension(count, True, "", total)
    if abs(s - round(s)) > 1e-12:
        return KernelDimension(total, False, "formula stated for integer s or -1/2 <= s <= 0", total)
    n = int(round(s))
    excluded = [k * math.pi / (n + 1) for k in range(1, n + 1)]
    hits = [w for w in angles if any(abs(w - e) < 1e-9 for e in excluded)]
    if hits:
        return KernelDimension(total, False, f"angle(s) {hits} in the excluded set", total)
    return KernelDimension(total, True, "", total)


def critical_p(d: Domain) -> float | None:
    """2 / (alpha* + 1) with alpha* = pi / largest angle; None for convex polygons."""
    wmax = max(w for _, w in d.corner_angles)
    if wmax <= math.pi + 1e-12:
        return None
    q = rational_angle(wmax)
    if q is not None:
        return float(Fraction(2) / (1 / q + 1))
    return 2 / (math.pi / wmax + 1)


class Membership(NamedTuple):
    member: bool
    margin: float


def w1p_membership(alpha: float, p: float) -> Membership:
    """|grad z| ~ r^(-alpha-1): z in W^{1,p} near the vertex iff p (alpha + 1) < 2."""
    margin = 2 - p * (alpha + 1)
    # round-off at the threshold counts as the excluded boundary case
    if abs(margin) <= INT_GUARD:
        margin = 0.0
    return Membership(margin > 0, margin)


def radial_divergence(alpha: float, p: float, t_max: float = 2.0e4, rel_tol: float = 1e-3) -> bool:
    """Quadrature detector: True if int_delta^1 r^(-p(alpha+1)) r dr keeps growing as delta -> 0.

    Partial integrals are evaluated in t = -ln r over doubling windows; the
    integral is declared convergent when the last window adds less than
    rel_tol of the running total.
    """
    e = 2 - p * (alpha + 1)
    f = lambda t: math.exp(-e * t) if -e * t < 700 else math.inf
    total, a, b = 0.0, 0.0, 10.0
    last = math.inf
    while b <= t_max:
        piece, _ = integrate.quad(f, a, b, limit=200)
        if not math.isfinite(piece):
            return True
        total += piece
        last = piece
        a, b = b, 2 * b
    return last > rel_tol * total
