from .finger import (
    FingerParams,
    GripperMesh,
    TetMesh,
    block_extents,
    build_finger_mesh,
    build_gripper_mesh,
    load_obj,
    save_obj,
)
from .pointcloud import extract_partial_pointcloud
from .sdf import (
    ShapeSDF,
    box,
    capsule,
    cylinder,
    mesh_shape,
    pack_shape,
    sdf_eval,
    sdf_normal,
    sphere,
    surface_points,
)

__all__ = [
    "FingerParams", "GripperMesh", "TetMesh", "block_extents",
    "build_finger_mesh", "build_gripper_mesh", "load_obj", "save_obj",
    "extract_partial_pointcloud", "ShapeSDF", "box", "capsule", "cylinder",
    "mesh_shape", "pack_shape", "sdf_eval", "sdf_normal", "sphere",
    "surface_points",
]
