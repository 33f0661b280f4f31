"""Numerical laboratory for persistence of critical manifolds of strongly indefinite functionals."""

__version__ = "0.1.0"
