"""Numerical checks of reflection positivity and charge order for a 1D fermion-phonon chain."""

__version__ = "0.1.0"
