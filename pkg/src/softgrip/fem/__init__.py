from .materials import (
    E_MAX,
    E_MIN,
    GRIPPER_DENSITY,
    POISSON,
    MaterialMap,
    map_stiffness,
    validate_stiffness,
)
from .scene import Scene, SimParams, SimState, load_scene_config, step
from .sim import (
    EpisodeTrace,
    GraspOutcome,
    MotionScript,
    evaluate_success,
    run_episode,
)

__all__ = [
    "E_MAX", "E_MIN", "GRIPPER_DENSITY", "POISSON", "MaterialMap",
    "map_stiffness", "validate_stiffness", "Scene", "SimParams", "SimState",
    "load_scene_config", "step", "EpisodeTrace", "GraspOutcome",
    "MotionScript", "evaluate_success", "run_episode",
]
