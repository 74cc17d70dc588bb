"""softgrip: co-design toolkit for tendon-driven soft grippers.

FEM grasp simulation with a uniform-pressure tendon model, a
differentiable neural surrogate trained on simulated grasp outcomes,
and joint gradient-descent optimization of the 22-block stiffness
distribution together with grasp pose selection.
"""

__version__ = "0.1.0"

from .backend import backend_name

__all__ = ["backend_name", "__version__"]
