"""Experiment orchestration: configuration, suites, reports and the ``lab`` command."""

from .config import EXPERIMENTS, ExperimentConfig, from_dict, load
from .report import emit_report, svg_line_plot, write_csv
from .suites import SUITES, Check, RunResult, run_counterexample, run_inequality_suite, run_kernel_suite

__all__ = [
    "EXPERIMENTS", "ExperimentConfig", "from_dict", "load", "emit_report", "svg_line_plot", "write_csv",
    "SUITES", "Check", "RunResult", "run_counterexample", "run_inequality_suite", "run_kernel_suite",
]
