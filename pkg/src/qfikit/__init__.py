"""Quadratic first integrals of time-dependent systems with a Euclidean kinetic metric."""

__version__ = "0.1.0"
