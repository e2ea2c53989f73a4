"""Numerical laboratory for harmonic heat and Grushin-type observability on balls."""

__version__ = "0.1.0"
