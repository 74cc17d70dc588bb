"""Benchmark the numba kernel against the pure-numpy twin.

Run: python benchmarks/bench_backends.py [n_frames]
The numpy path is also what SOFTGRIP_BACKEND=numpy selects at import.
"""

import sys
import time

import numpy as np

import softgrip.fem.scene as scene_mod
from softgrip.backend import HAS_NUMBA
from softgrip.fem.materials import map_stiffness
from softgrip.fem.scene import Scene
from softgrip.geometry.finger import build_gripper_mesh
from softgrip.geometry.sdf import sphere


def bench(kernel_mod, gripper, n_frames):
    old = scene_mod.K
    scene_mod.K = kernel_mod
    try:
        obj = sphere(0.022, position=(0, 0.022, 0), density=8.0)
        scene = Scene(gripper, obj=obj)
        scene.set_materials(map_stiffness(np.full(22, 4e6), gripper.mesh))
        st = scene.make_state(np.array([0, 0.112, 0, 0, 0, 0, 0.03, 0.03]))
        n_sub = scene.n_substeps()
        dt = scene.params.frame_dt / n_sub
        scene.advance(st, dt, n_sub, tension=0.5)  # warm/JIT
        t0 = time.perf_counter()
        for f in range(n_frames):
            scene.advance(st, dt, n_sub, tension=1.0)
        wall = time.perf_counter() - t0
        return wall / n_frames, n_sub, st.x.sum()
    finally:
        scene_mod.K = old


def main():
    n_frames = int(sys.argv[1]) if len(sys.argv) > 1 else 100
    gripper = build_gripper_mesh()
    print(f"gripper: {len(gripper.mesh.tets)} tets, "
          f"{len(gripper.mesh.vertices)} vertices, {n_frames} frames")
    results = {}
    from softgrip.fem import kernels_numpy

    results["numpy"] = bench(kernels_numpy, gripper, n_frames)
    if HAS_NUMBA:
        from softgrip.fem import kernels_numba

        results["numba"] = bench(kernels_numba, gripper, n_frames)
    else:
        print("numba not available; numpy path only")
    for name, (per_frame, n_sub, checksum) in results.items():
        print(f"{name:6s}: {per_frame * 1e3:8.2f} ms/frame "
              f"({n_sub} substeps)  checksum {checksum:.9f}")
    if "numba" in results:
        speedup = results["numpy"][0] / results["numba"][0]
        drift = abs(results["numpy"][2] - results["numba"][2])
        print(f"numba speedup: {speedup:.1f}x, state checksum drift "
              f"{drift:.2e}")


if __name__ == "__main__":
    main()
