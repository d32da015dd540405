"""Geodesic flow on flat cone surfaces: tracing, saddle connections, specification and pressure."""
from .errors import FlatflowError
from .surface import Surface, build_surface, load_surface

__all__ = ["FlatflowError", "Surface", "build_surface", "load_surface"]
__version__ = "0.1.0"
