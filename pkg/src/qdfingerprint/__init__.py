"""Fingerprints of planar Jordan curves from quadratic differentials."""

__version__ = "0.1.0"
