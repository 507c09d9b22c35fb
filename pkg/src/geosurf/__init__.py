"""Discrete geodesic surfaces: surrounding loops, Haar-like measures, dimension and hyperbolicity diagnostics."""

__version__ = "0.1.0"
