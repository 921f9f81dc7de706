"""Numerical laboratory for time-fractional SPDEs with Bernstein-function generators."""

__version__ = "0.1.0"
