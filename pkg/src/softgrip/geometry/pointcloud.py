"""Partial point cloud extraction: object surface points that fall
inside the gripper's axis-aligned bounding box at a grasp pose."""

import numpy as np

from ..errors import NoOverlapError
from .sdf import ShapeSDF, surface_points

OVERSAMPLE = 4096


def extract_partial_pointcloud(shape: ShapeSDF, gripper_aabb, n_points: int,
                               seed: int) -> np.ndarray:
    """Exactly n_points world-frame surface points inside the box.

    Subsamples uniformly when more candidates are available, pads by
    repetition when fewer; raises NoOverlapError when none qualify.
    """
    if n_points <= 0:
        raise ValueError(f"n_points must be > 0, got {n_points}")
    lo, hi = (np.asarray(b, dtype=np.float64) for b in gripper_aabb)
    pts = surface_points(shape, OVERSAMPLE, seed)
    inside = np.all((pts >= lo) & (pts <= hi), axis=1)
    cand = pts[inside]
    if len(cand) == 0:
        raise NoOverlapError(
            f"no surface points of {shape.name or shape.kind} inside the "
            "gripper bounding box; pose invalid for data generation"
        )
    rng = np.random.default_rng(seed + 1)
    if len(cand) >= n_points:
        pick = rng.choice(len(cand), size=n_points, replace=False)
    else:
        pick = np.concatenate([
            np.arange(len(cand)),
            rng.choice(len(cand), size=n_points - len(cand), replace=True),
        ])
    return cand[np.sort(pick)]
