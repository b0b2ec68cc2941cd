"""Numerical laboratory for fractional and weighted Sobolev norms on polygons."""

__version__ = "0.1.0"
