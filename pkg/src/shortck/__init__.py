"""Numerical laboratory for non-autonomous basins of automorphism sequences of C^k."""

__version__ = "0.1.0"
