"""Numerical toolkit for the geodesic X-ray transform on real and complex projective spaces."""

from .geometry import ProjectiveSpace, space

__all__ = ["ProjectiveSpace", "space"]
__version__ = "0.1.0"
