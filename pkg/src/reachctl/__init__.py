"""Reachability analysis and piecewise-affine feedback synthesis for
affine systems with (n-1)-dimensional input on polytopic state spaces."""

from . import errors, geometry, lp

__all__ = ["errors", "geometry", "lp"]

__version__ = "0.1.0"
