"""Wall-clock comparison: one full FEM episode vs one surrogate pass."""

import time

import numpy as np

from ..fem.scene import Scene
from ..fem.sim import MotionScript, run_episode
from .net import SurrogateModel


def timing_ratio(model: SurrogateModel, scene: Scene, k: np.ndarray,
                 pose: np.ndarray, script: MotionScript,
                 cloud: np.ndarray, com: np.ndarray,
                 n_fem: int = 3, n_forward: int = 200) -> float:
    """median FEM episode time / median surrogate forward time."""
    density = scene.obj.density if scene.obj is not None else 1.0
    fw = []
    model.predict(cloud, com, density, k, pose)  # warm
    for _ in range(n_forward):
        t0 = time.perf_counter()
        model.predict(cloud, com, density, k, pose)
        fw.append(time.perf_counter() - t0)
    fem = []
    for _ in range(n_fem):
        t0 = time.perf_counter()
        run_episode(scene, k, pose, script)
        fem.append(time.perf_counter() - t0)
    return float(np.median(fem) / np.median(fw))
