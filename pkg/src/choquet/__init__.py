"""Learning with the Choquet (convex) order via input convex maxout networks."""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
