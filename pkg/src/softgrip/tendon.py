"""Tendon waypoint placement and tension-to-force conversion.

Waypoint heights follow the uniform-pressure law h = H (1 - l/L)^2, so
the tendon-induced bending moment decays quadratically to zero at the
fingertip and contact pressure is uniform along the finger.  Tension is
identical at every waypoint; it acts on the soft body as concentrated
point forces at the snapped mesh vertices.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRouteError
from .geometry.finger import FingerParams, GripperMesh, build_finger_mesh

MIN_SEGMENT_LEN = 1e-9


@dataclass
class TendonRoute:
    """One tendon: waypoint positions, surface normals, law metadata."""

    waypoints: np.ndarray        # (n, 3) positions, m
    normals: np.ndarray          # (n, 3) unit surface normals
    vertex_indices: np.ndarray   # (n,) snapped mesh vertex per waypoint
    arcs: np.ndarray             # (n,) l_i, m
    heights: np.ndarray          # (n,) h_i = H (1 - l_i/L)^2, m

    def __post_init__(self):
        n = np.linalg.norm(self.normals, axis=1)
        if not np.allclose(n, 1.0, atol=1e-9):
            raise ValueError("waypoint normals must be unit vectors")
        if not (np.diff(self.arcs) >= 0).all() or self.arcs[0] != 0.0:
            raise ValueError("arc coordinates must start at 0 and be sorted")


@dataclass
class TendonState:
    tension: float  # f_T, N, uniform along the tendon

    def __post_init__(self):
        if self.tension < 0:
            raise ValueError(f"tension must be >= 0, got {self.tension}")


def place_waypoints(params: FingerParams, n_waypoints: int | None = None
                    ) -> TendonRoute:
    """Waypoints for one finger in its local frame.

    Default count is one per segment block plus the fingertip; other
    counts distribute arcs uniformly over [0, L].  Heights are set by
    the quadratic law exactly; positions come from the mesh vertices
    snapped to the waypoint locations.
    """
    mesh, meta = build_finger_mesh(params)
    arcs = meta["arcs"]
    if n_waypoints is not None and n_waypoints != len(arcs):
        if n_waypoints < 2:
            raise ValueError("need at least 2 waypoints")
        arcs = np.linspace(0.0, params.length, n_waypoints)
        heights = params.height_profile(arcs)
        sp = params.spine_height
        pos = np.stack([arcs, sp + heights, np.zeros_like(arcs)], axis=1)
        pos[-1] = (params.length, sp / 2.0, 0.0)
        surf = mesh.surface_vertex_indices()
        vidx = np.empty(len(arcs), dtype=np.int64)
        for i, p in enumerate(pos):
            d = np.linalg.norm(mesh.vertices[surf] - p, axis=1)
            vidx[i] = surf[int(np.argmin(d))]
            mesh.vertices[vidx[i]] = p
        normals = np.zeros((len(arcs), 3))
        normals[:-1] = _law_normals(params, arcs[:-1])
        normals[-1] = (1.0, 0.0, 0.0)
    else:
        heights = meta["heights"]
        vidx = meta["waypoint_vidx"]
        normals = meta["waypoint_normals"]
    return TendonRoute(
        waypoints=mesh.vertices[vidx].copy(),
        normals=normals,
        vertex_indices=vidx,
        arcs=arcs,
        heights=heights,
    )


def _law_normals(params: FingerParams, arcs: np.ndarray) -> np.ndarray:
    slope = -2 * params.base_height / params.length \
        * (1 - arcs / params.length)
    n = np.stack([-slope, np.ones_like(slope), np.zeros_like(slope)], axis=1)
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def tendon_forces(route: TendonRoute, state: TendonState) -> np.ndarray:
    """Per-waypoint tendon force on the soft body.

    Interior waypoints get the tension along the next tendon segment
    projected onto the surface tangent plane; the tip gets the full
    tension pulled into the fingertip along its surface normal.
    """
    p = route.waypoints
    n = route.normals
    f_t = state.tension
    out = np.zeros_like(p)
    for i in range(len(p) - 1):
        seg = p[i + 1] - p[i]
        length = np.linalg.norm(seg)
        if length < MIN_SEGMENT_LEN:
            raise DegenerateRouteError(
                f"waypoints {i} and {i + 1} coincide (separation {length:g} m)"
            )
        t = f_t * seg / length
        out[i] = t - n[i] * (n[i] @ t)
    out[-1] = -f_t * n[-1]
    return out


def tendon_nodal_loads(waypoints: np.ndarray, normals: np.ndarray,
                       tension: float) -> np.ndarray:
    """Per-waypoint loads applied by the simulator.

    Each tendon segment carries the uniform tension and loads both of
    its endpoints: the upstream waypoint receives the tangent-projected
    pull toward the next waypoint (tendon_forces form), and the
    downstream waypoint receives the axial reaction of the same
    segment.  At the fingertip the reaction is the only term, which is
    the tip anchor force -f_T n.  The single-sided projected forces
    alone act as an extensor and cannot curl the finger; the paired
    form reproduces the uniform-pressure behaviour.
    """
    out = np.zeros_like(waypoints)
    for i in range(len(waypoints) - 1):
        seg = waypoints[i + 1] - waypoints[i]
        length = np.linalg.norm(seg)
        if length < MIN_SEGMENT_LEN:
            raise DegenerateRouteError(
                f"waypoints {i} and {i + 1} coincide (separation {length:g} m)"
            )
        u = seg / length
        t = tension * u
        out[i] += t - normals[i] * (normals[i] @ t)
        out[i + 1] -= t
    return out


def bending_moment_profile(route: TendonRoute, tension: float) -> np.ndarray:
    """M(l_i) = h_i * f_T; zero moment and slope at the fingertip."""
    return route.heights * tension


def route_normals_from_mesh(vertices: np.ndarray,
                            tris: np.ndarray) -> np.ndarray:
    """Unit normals of the per-waypoint reference surface triangles."""
    a = vertices[tris[:, 0]]
    n = np.cross(vertices[tris[:, 1]] - a, vertices[tris[:, 2]] - a)
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def gripper_routes(gripper: GripperMesh) -> list[TendonRoute]:
    """World-frame routes for both fingers of an assembled gripper."""
    routes = []
    v = gripper.mesh.vertices
    for f in range(2):
        vidx = gripper.waypoint_vidx[f]
        normals = route_normals_from_mesh(v, gripper.waypoint_tris[f])
        routes.append(TendonRoute(
            waypoints=v[vidx].copy(),
            normals=normals,
            vertex_indices=vidx,
            arcs=gripper.waypoint_arcs,
            heights=gripper.waypoint_heights,
        ))
    return routes


def route_to_json(route: TendonRoute, path) -> None:
    data = {
        "waypoints": route.waypoints.tolist(),
        "normals": route.normals.tolist(),
        "vertex_indices": route.vertex_indices.tolist(),
        "arcs": route.arcs.tolist(),
        "heights": route.heights.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1)
