"""Viscoelastic Kirchhoff-system simulator and certification toolkit."""

__version__ = "1.0.0"
