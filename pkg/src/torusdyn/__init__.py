"""Rotation sets, free curves and certified periodic orbits for lifts of
torus homeomorphisms."""

from torusdyn._kernels import backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "__version__"]
