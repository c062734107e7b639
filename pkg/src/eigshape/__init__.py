"""2D P1 finite-element laboratory for eigenvalue shape gradients."""

__version__ = "0.1.0"

from .fem import BoundaryCondition, FemSpace
from .mesh import Domain, generate, refine

__all__ = [
    "BoundaryCondition",
    "Domain",
    "FemSpace",
    "generate",
    "refine",
    "__version__",
]
