"""Numerical study of the simple-type hypersymplectic flow on the 4-torus."""

__version__ = "0.1.0"
