"""Adaptive finite elements for the 2D Stokes system driven by point forces."""

__version__ = "0.1.0"
