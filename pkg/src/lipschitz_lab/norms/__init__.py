"""Norms and seminorms on finite element and closed-form functions."""

from .core import (
    GRAM_MAX_DOFS,
    DualGradientOperator,
    SobolevIndex,
    boundary_norms,
    classical_norms,
    distance_weight,
    dual_gradient_norm,
    gagliardo_seminorm,
    h00_half_norm,
    mean_value,
    quotient_norm,
    trace_inequality_check,
    weighted_gradient_norm,
    weighted_hessian_norm,
    weighted_l2_norm,
    weighted_stiffness,
)
from .gagliardo import PairPlan, gram
from .report import NORM_COLUMNS, NormReport, norm_report, read_reports, write_reports

__all__ = [
    "GRAM_MAX_DOFS", "DualGradientOperator", "SobolevIndex", "boundary_norms", "classical_norms",
    "distance_weight", "dual_gradient_norm", "gagliardo_seminorm", "h00_half_norm", "mean_value",
    "quotient_norm", "trace_inequality_check", "weighted_gradient_norm", "weighted_hessian_norm",
    "weighted_l2_norm", "weighted_stiffness", "PairPlan", "gram", "NORM_COLUMNS", "NormReport", "norm_report",
    "read_reports", "write_reports",
]
