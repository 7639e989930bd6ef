"""Numerical laboratory for minimal graphs over convex domains in hyperbolic space."""

__version__ = "0.1.0"
