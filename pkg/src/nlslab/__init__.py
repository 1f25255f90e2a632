"""Numerical laboratory for ground states and blow-up of focusing NLS."""

__version__ = "0.1.0"
