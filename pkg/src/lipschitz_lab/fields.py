"""Closed-form scalar fields with optional derivatives.

Every callable takes an (n, 2) array of points and returns values (n,),
gradients (n, 2) or Hessians (n, 2, 2).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class Field:
    value: Callable
    grad: Optional[Callable] = None
    hess: Optional[Callable] = None
    name: str = "field"

    def __call__(self, P):
        return self.value(np.atleast_2d(np.asarray(P, dtype=float)))

    def scaled(self, c: float) -> "Field":
        g = None if self.grad is None else (lambda P: c * self.grad(P))
        H = None if self.hess is None else (lambda P: c * self.hess(P))
        return Field(lambda P: c * self.value(P), g, H, f"{c!r}*{self.name}")

    def shifted(self, c: float) -> "Field":
        return Field(lambda P: self.value(P) + c, self.grad, self.hess, f"{self.name}+{c!r}")


def constant(c: float) -> Field:
    return Field(
        lambda P: np.full(len(P), float(c)),
        lambda P: np.zeros((len(P), 2)),
        lambda P: np.zeros((len(P), 2, 2)),
        f"const({c!r})",
    )


def linear(a: float, b: float, c: float = 0.0) -> Field:
    """a*x + b*y + c."""
    return Field(
        lambda P: a * P[:, 0] + b * P[:, 1] + c,
        lambda P: np.tile([a, b], (len(P), 1)).astype(float),
        lambda P: np.zeros((len(P), 2, 2)),
        f"linear({a!r},{b!r},{c!r})",
    )


def monomial_x2() -> Field:
    def hess(P):
        H = np.zeros((len(P), 2, 2))
        H[:, 0, 0] = 2.0
        return H

    return Field(
        lambda P: P[:, 0] ** 2,
        lambda P: np.column_stack((2 * P[:, 0], np.zeros(len(P)))),
        hess,
        "x^2",
    )


def sinsin(k: float = np.pi) -> Field:
    """sin(kx) sin(ky)."""

    def val(P):
        return np.sin(k * P[:, 0]) * np.sin(k * P[:, 1])

    def grad(P):
        sx, sy = np.sin(k * P[:, 0]), np.sin(k * P[:, 1])
        cx, cy = np.cos(k * P[:, 0]), np.cos(k * P[:, 1])
        return k * np.column_stack((cx * sy, sx * cy))

    def hess(P):
        sx, sy = np.sin(k * P[:, 0]), np.sin(k * P[:, 1])
        cx, cy = np.cos(k * P[:, 0]), np.cos(k * P[:, 1])
        H = np.empty((len(P), 2, 2))
        H[:, 0, 0] = H[:, 1, 1] = -k * k * sx * sy
        H[:, 0, 1] = H[:, 1, 0] = k * k * cx * cy
        return H

    return Field(val, grad, hess, "sinsin")


def harmonic_poly(n: int) -> Field:
    """Re (x + i y)^n."""

    def val(P):
        return ((P[:, 0] + 1j * P[:, 1]) ** n).real

    def grad(P):
        if n == 0:
            return np.zeros((len(P), 2))
        w = n * (P[:, 0] + 1j * P[:, 1]) ** (n - 1)
        return np.column_stack((w.real, -w.imag))

    def hess(P):
        H = np.zeros((len(P), 2, 2))
        if n >= 2:
            w = n * (n - 1) * (P[:, 0] + 1j * P[:, 1]) ** (n - 2)
            H[:, 0, 0], H[:, 1, 1] = w.real, -w.real
            H[:, 0, 1] = H[:, 1, 0] = -w.imag
        return H

    return Field(val, grad, hess, f"re_z^{n}")
