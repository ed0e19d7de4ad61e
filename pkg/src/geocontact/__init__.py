"""Geodesic contact patches on triangle meshes.

Parameterize contact regions against geodesic axes, transfer and edit them
across surfaces, and solve articulated poses that realize the contacts.
"""

from .errors import (
    DegeneratePathError,
    DisconnectedPointsError,
    EditError,
    GeoContactError,
    InvalidPointError,
    MeshLoadError,
    NonManifoldError,
    PatchError,
    SceneError,
    SolveError,
    TraceTruncationError,
)
from .editing import Connection, EditSession, Patch
from .skeleton import (
    SkinBinding,
    Skeleton,
    forward_kinematics,
    quat_to_matrix,
    skin_mesh,
)
from .solver import (
    ContactPair,
    ContactScene,
    SolveConfig,
    SolveResult,
    objective,
    objective_gradient,
    solve,
    staged_solve,
)
from .contact import (
    Axis,
    PatchParam,
    default_axis,
    parameterize_axis,
    parameterize_patch,
    reconstruct_axis,
    reconstruct_patch,
    transfer_patch,
)
from .scene import Contact, Scene, load_scene, save_scene, surface_normal
from .mesh import Mesh, SurfacePoint, load_mesh, save_mesh

__version__ = "0.1.0"

__all__ = [
    "Axis",
    "Connection",
    "ContactPair",
    "ContactScene",
    "EditSession",
    "Patch",
    "PatchParam",
    "Contact",
    "Scene",
    "SkinBinding",
    "Skeleton",
    "SolveConfig",
    "SolveResult",
    "default_axis",
    "forward_kinematics",
    "objective",
    "objective_gradient",
    "parameterize_axis",
    "parameterize_patch",
    "quat_to_matrix",
    "reconstruct_axis",
    "reconstruct_patch",
    "skin_mesh",
    "solve",
    "staged_solve",
    "transfer_patch",
    "DegeneratePathError",
    "DisconnectedPointsError",
    "EditError",
    "GeoContactError",
    "InvalidPointError",
    "Mesh",
    "MeshLoadError",
    "NonManifoldError",
    "PatchError",
    "SceneError",
    "SolveError",
    "SurfacePoint",
    "TraceTruncationError",
    "load_mesh",
    "load_scene",
    "save_mesh",
    "save_scene",
    "surface_normal",
    "__version__",
]
