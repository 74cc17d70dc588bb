"""Uniform-pressure routing experiment: a single finger pressed onto a
flat plate, comparing the per-segment contact force distribution of the
quadratic-law tendon routing against uniform-height routing.

Both routings run on the same rectangular-profile finger so only the
waypoint heights differ.  The plate is the ground plane; the finger is
mounted horizontally, object side down, base held fixed, and tension is
ramped to the target and held until the contact settles.
"""

from dataclasses import dataclass

import numpy as np

from ..geometry.finger import (
    FingerParams,
    GripperMesh,
    TetMesh,
    block_extents,
    build_finger_mesh,
)
from .materials import MaterialMap
from .scene import Scene, SimParams


@dataclass
class PlatePressResult:
    segment_forces: np.ndarray   # (n_segments,) plate normal force sums
    cv: float                    # coefficient of variation
    tip_share: float             # fraction of total force on the last segment
    total_force: float


def _single_finger_gripper(params: FingerParams, mesh: TetMesh, meta: dict,
                           clearance: float) -> GripperMesh:
    """Mount one finger horizontally above the plate, object side down."""
    v = mesh.vertices
    y0 = params.spine_height + params.base_height + clearance
    world = np.empty_like(v)
    world[:, 0] = v[:, 0]
    world[:, 1] = y0 - v[:, 1]
    world[:, 2] = -v[:, 2]
    mesh.vertices[:] = world

    wp_vidx = meta["waypoint_vidx"][None, :]
    normals = meta["waypoint_normals"].copy()
    # x unchanged under the mount rotation; y/z flip
    normals[:, 1] *= -1.0
    normals[:, 2] *= -1.0
    # static route normals (the rect surface has no triangles following
    # the routing profile to track)
    tris = np.full((1, len(normals), 3), -1, dtype=np.int64)
    return GripperMesh(
        mesh=mesh,
        params=params,
        palm_span=0.0,
        vertex_finger=np.zeros(len(v), dtype=np.int8),
        base_mask=meta["base_mask"],
        waypoint_vidx=wp_vidx,
        waypoint_tris=tris,
        waypoint_arcs=meta["arcs"],
        waypoint_heights=meta["heights"],
        waypoint_normals=normals[None, :, :],
        inward_axis=np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
    )


def run_plate_press(routing: str = "law", tension: float = 10.0,
                    youngs: float = 4e6, clearance: float = 5e-5,
                    params: FingerParams | None = None,
                    settle_s: float = 0.45,
                    measure_s: float = 0.15) -> PlatePressResult:
    """Press the finger onto the plate and measure per-segment force.

    Per-segment plate forces are averaged over the final measure_s of
    the run: uniform-height routing concentrates its constant bending
    moment at the tip, which tends to bounce rather than settle.
    """
    if params is None:
        params = FingerParams(segment_cells=2)
    if routing == "law":
        heights = None
    elif routing == "uniform":
        heights = np.full(params.n_segments + 1, params.base_height / 2)
    else:
        raise ValueError(f"unknown routing {routing!r}")
    mesh, meta = build_finger_mesh(params, profile="rect",
                                   route_heights=heights)
    gripper = _single_finger_gripper(params, mesh, meta, clearance)

    sim = SimParams(damping=30.0, cfl_safety=0.8)
    scene = Scene(gripper, obj=None, params=sim, gravity_on=True,
                  ground_on=True, fix_base=True)
    n_t = len(mesh.tets)
    e = np.full(n_t, youngs)
    mu = e / (2 * (1 + 0.45))
    lam = e * 0.45 / ((1 + 0.45) * (1 - 0.9)) + mu
    scene.set_materials(MaterialMap(
        youngs=e, mu=mu, lam_stable=lam, alpha=1.0 + mu / lam,
        poisson=0.45, density=1100.0,
    ))
    state = scene.make_state()
    n_sub = scene.n_substeps()
    dt = sim.frame_dt / n_sub
    n_frames = int(round(settle_s * sim.frame_rate))
    n_measure = int(round(measure_s * sim.frame_rate))
    n_ramp = max(n_frames // 4, 1)

    surf = scene._surf_vidx
    xs0 = scene._rest[surf, 0]
    extents = block_extents(params)
    bounds = [0.0]
    for j in range(params.n_segments - 1):
        f0, f1 = extents[2 * j + 1]
        bounds.append(0.5 * (f0 + f1))
    bounds.append(params.length)
    seg_of_vert = np.digitize(xs0, bounds[1:-1])
    seg_force = np.zeros(params.n_segments)

    for f in range(n_frames):
        t = tension * min((f + 1) / n_ramp, 1.0)
        scene.advance(state, dt, n_sub, tension=t)
        if f >= n_frames - n_measure:
            y = state.x[surf, 1]
            vy = state.v[surf, 1]
            fn = np.where(y < 0.0,
                          np.maximum(-sim.k_contact * y
                                     - sim.c_normal * vy, 0.0), 0.0)
            np.add.at(seg_force, seg_of_vert, fn)
    state.check_finite("plate press", n_frames - 1)
    seg_force /= n_measure

    total = float(seg_force.sum())
    mean = seg_force.mean()
    cv = float(seg_force.std() / mean) if mean > 0 else np.inf
    tip_share = float(seg_force[-1] / total) if total > 0 else 0.0
    return PlatePressResult(segment_forces=seg_force, cv=cv,
                            tip_share=tip_share, total_force=total)
