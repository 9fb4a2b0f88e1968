"""Numerical laboratory for zero-range (point) interaction operators."""

__version__ = "0.1.0"
