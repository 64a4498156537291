"""Numerical Finsler and Lorentz-Finsler geometry under Zermelo navigation."""

__version__ = "0.1.0"
