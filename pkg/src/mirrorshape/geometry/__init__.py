"""Mesh and rigid-transform primitives used across the pipeline."""
from .core import (
    Pose,
    normalized,
    pose_difference,
    pose_from_z_axis,
    quat_from_matrix,
    quat_identity,
    quat_multiply,
    quat_to_matrix,
    quat_to_rotvec,
    rotvec_to_quat,
    vec3,
)
from .mesh import TriMesh, closest_point, load_obj, ray_cast
from .patch import SurfacePatch, local_patch
from . import shapes

__all__ = [
    "Pose", "TriMesh", "SurfacePatch",
    "closest_point", "ray_cast", "load_obj", "local_patch",
    "vec3", "normalized", "pose_from_z_axis", "pose_difference",
    "quat_identity", "quat_multiply", "quat_from_matrix", "quat_to_matrix",
    "quat_to_rotvec", "rotvec_to_quat",
    "shapes",
]
