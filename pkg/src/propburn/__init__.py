"""propburn: one-dimensional low-Mach solid-propellant combustion solver.

Unsteady coupled solid/gas burning formulated as a semi-explicit index-1
differential-algebraic system on a staggered finite-volume mesh, integrated
with stiffly accurate (E)SDIRK methods and adaptive time stepping.
"""

__version__ = "0.1.0"

from .config import load_model, parse_model, preset_model
from .mesh import StaggeredMesh, adaptive_mesh_from_profile, preset_mesh
from .physics import PropellantModel

__all__ = [
    "PropellantModel",
    "StaggeredMesh",
    "adaptive_mesh_from_profile",
    "load_model",
    "parse_model",
    "preset_model",
    "preset_mesh",
    "__version__",
]
