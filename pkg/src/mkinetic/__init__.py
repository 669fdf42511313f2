"""Pseudo-spectral kinetic toolkit built around the time-averaged M multiplier."""

__version__ = "0.1.0"
