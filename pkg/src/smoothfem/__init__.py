"""smoothfem: smoothed and standard Q4 finite elements for 2D linear elasticity,
with equilibrated patch stress recovery (SPR/SPR-C/SPR-X/SPR-CX), Zienkiewicz-Zhu
error estimation, and generalized stress-intensity-factor extraction.

The package reproduces two classic verification studies at desk scale: a
pressurized thick-wall cylinder (smooth solution) and an L-shaped domain with a
reentrant-corner singularity.
"""

__version__ = "0.1.0"

from .elasticity import Material, elasticity_matrix, elastic_constants
from .mesh import Mesh, build_cylinder_mesh, build_lshape_mesh, build_square_mesh
from .solver import Formulation, assemble_and_solve
from .recovery import RecoveryConfig, build_recovered_field
from .error import effectivity, convergence_rate

__all__ = [
    "Material",
    "elasticity_matrix",
    "elastic_constants",
    "Mesh",
    "build_cylinder_mesh",
    "build_lshape_mesh",
    "build_square_mesh",
    "Formulation",
    "assemble_and_solve",
    "RecoveryConfig",
    "build_recovered_field",
    "effectivity",
    "convergence_rate",
    "__version__",
]
