"""Numerical toolkit for reflecting minimal graphs across geodesics in 3-manifolds."""

__version__ = "0.1.0"
