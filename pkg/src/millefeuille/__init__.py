"""Geodesical families, hyperbolic tilings and Ising interfaces."""

__version__ = "0.1.0"
