"""Norm reports and their CSV form."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ..fem import FeFunction
from ..meshing import Mesh, mesh_id
from . import core

# fixed CSV layout: one row per (function, mesh, s)
META_COLUMNS = ("function", "mesh", "s", "quad_level")
NORM_COLUMNS = (
    "l2", "grad_l2", "h1", "gagliardo", "weighted_grad", "weighted_grad_reg",
    "quotient", "dual_grad", "h00_half", "boundary_l2", "boundary_h1",
)
SEMINORMS = {"grad_l2", "gagliardo", "weighted_grad", "weighted_grad_reg", "quotient", "dual_grad", "boundary_h1"}


@dataclass
class NormReport:
    values: dict
    function: str
    mesh: str
    s: float
    quad_level: int = 0
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        for k, v in self.values.items():
            if k not in NORM_COLUMNS:
                raise KeyError(f"unknown norm {k!r}")
            if not v >= 0:
                raise ValueError(f"norm {k} is negative or NaN: {v}")

    def row(self) -> dict:
        r = {"function": self.function, "mesh": self.mesh, "s": repr(float(self.s)),
             "quad_level": str(self.quad_level)}
        for k in NORM_COLUMNS:
            r[k] = repr(float(self.values[k])) if k in self.values else ""
        return r


def norm_report(u: FeFunction, s: float, names=None, function: str = "u", quad_level: int = 0,
                **plan_kw) -> NormReport:
    """Evaluate the requested norms (default: everything that applies) of one FE function."""
    m: Mesh = u.space.mesh
    names = tuple(names) if names is not None else NORM_COLUMNS
    vals = {}
    l2, g, h1 = core.classical_norms(u, levels=quad_level)
    for k, v in (("l2", l2), ("grad_l2", g), ("h1", h1)):
        if k in names:
            vals[k] = v
    if "gagliardo" in names and 0 < s < 1:
        vals["gagliardo"] = core.gagliardo_seminorm(u, s, **plan_kw)
    if "weighted_grad" in names and 0 <= s <= 1:
        vals["weighted_grad"] = core.weighted_gradient_norm(u, s)
    if "weighted_grad_reg" in names and 0 <= s <= 1:
        vals["weighted_grad_reg"] = core.weighted_gradient_norm(u, s, "regularized")
    if "quotient" in names and 0 <= s <= 1:
        vals["quotient"] = core.quotient_norm(u, s, **plan_kw)
    if "dual_grad" in names and 0 <= s <= 1:
        vals["dual_grad"] = core.dual_gradient_norm(u, s, **plan_kw)
    if "h00_half" in names:
        b = u.coeffs[u.space.boundary_dofs]
        if not b.size or np.abs(b).max() <= core.TRACE_TOL:
            vals["h00_half"] = core.h00_half_norm(u, **plan_kw)
    if "boundary_l2" in names or "boundary_h1" in names:
        bl2, bh1 = core.boundary_norms(u)
        if "boundary_l2" in names:
            vals["boundary_l2"] = bl2
        if "boundary_h1" in names:
            vals["boundary_h1"] = bh1
    constant = np.ptp(u.coeffs) == 0
    flags = {k: "constant" for k in vals if constant and k in SEMINORMS}
    return NormReport(vals, function, mesh_id(m), s, quad_level, flags)


def write_reports(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=META_COLUMNS + NORM_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in reports:
            w.writerow(r.row())


def read_reports(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k in NORM_COLUMNS + ("s",):
            r[k] = float(r[k]) if r[k] else math.nan
    return rows
