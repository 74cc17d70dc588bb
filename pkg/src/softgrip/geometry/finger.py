"""Tetrahedral mesh construction for the two-finger flexure gripper.

One finger is a row of alternating segment and flexure blocks along its
axis.  A continuous thin spine (the flexure layer) runs the whole
length at the back face; each segment additionally carries a wedge
whose top face follows the chord of the quadratic tendon-height profile
across that block, so the finger tapers from the base height to the
spine at the tip and every requested tendon waypoint lands exactly on a
mesh vertex.  Each block is a structured hex slab split into 6
tetrahedra per cell (Kuhn subdivision), which keeps the boundary
triangulation watertight and makes block tagging trivial.

Local finger frame: x along the finger (0 = base, L = tip), y from the
back face toward the object side, z across the width.  The assembled
gripper frame has fingers hanging along -y with object sides facing
each other across the x axis.
"""

from dataclasses import dataclass, field

import numpy as np

# Kuhn subdivision: each path 000 -> 111 through axis permutations.
_KUHN_PATHS = (
    ((0, 0, 0), (1, 0, 0), (1, 1, 0), (1, 1, 1)),
    ((0, 0, 0), (1, 0, 0), (1, 0, 1), (1, 1, 1)),
    ((0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 1, 1)),
    ((0, 0, 0), (0, 1, 0), (0, 1, 1), (1, 1, 1)),
    ((0, 0, 0), (0, 0, 1), (1, 0, 1), (1, 1, 1)),
    ((0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 1)),
)

MIN_WEDGE_HEIGHT = 2.5e-3  # wedges thinner than this at the thick end are dropped


@dataclass
class FingerParams:
    """Geometry of one finger.

    base_height is the tendon anchor height H above the flexure line at
    the finger base; the finger cross-section is spine_height + H tall
    there.  cut_angle, when given, overrides the per-block taper slope
    of the segment tops (radians below the finger axis); by default the
    tops follow the chords of the quadratic waypoint-height profile.
    """

    length: float = 0.10
    base_height: float = 0.02
    width: float = 0.02
    n_segments: int = 6
    flexure_len: float = 0.002
    spine_height: float = 0.004
    flexure_height: float = 0.002
    flexure_cells: int = 2
    segment_cells: int = 1
    cut_angle: float | None = None
    subdivision: int = 1

    def __post_init__(self):
        if self.length <= 0 or self.base_height <= 0 or self.width <= 0:
            raise ValueError("finger dimensions must be positive")
        if self.n_segments < 2:
            raise ValueError("need at least 2 segments per finger")
        if self.subdivision < 1:
            raise ValueError("subdivision must be >= 1")
        if self.flexure_len >= self.segment_len:
            raise ValueError(
                f"flexure length {self.flexure_len} must be smaller than "
                f"segment length {self.segment_len} (degenerate blocks)"
            )
        if not 0 < self.flexure_height <= self.spine_height:
            raise ValueError("flexure height must be in (0, spine height]")
        if self.flexure_cells < 1:
            raise ValueError("flexure_cells must be >= 1")

    def y_levels(self) -> tuple[list[float], list[float]]:
        """Conforming vertical grid levels for spine and flexure hinges.

        The hinge gets two cells through its thickness (bending needs
        through-thickness resolution with linear tets); the spine above
        it coarsens to one cell per remaining flexure-height span.
        """
        sub = self.subdivision
        pitch = self.flexure_height / (2 * sub)
        flex = [pitch * i for i in range(2 * sub + 1)]
        spine = list(flex)
        y = self.flexure_height
        while y < self.spine_height - 1e-12:
            y = min(y + self.flexure_height, self.spine_height)
            spine.append(y)
        spine[-1] = self.spine_height
        return spine, flex

    @property
    def segment_len(self) -> float:
        return (self.length - (self.n_segments - 1) * self.flexure_len) \
            / self.n_segments

    @property
    def n_blocks(self) -> int:
        return 2 * self.n_segments - 1

    def height_profile(self, arc) -> np.ndarray:
        """Tendon waypoint height above the flexure line at arc position."""
        arc = np.asarray(arc, dtype=np.float64)
        return self.base_height * (1.0 - arc / self.length) ** 2

    def waypoint_arcs(self) -> np.ndarray:
        """Default arc positions: one per segment start plus the tip."""
        pitch = self.segment_len + self.flexure_len
        arcs = [j * pitch for j in range(self.n_segments)]
        arcs.append(self.length)
        return np.array(arcs)


def block_extents(params: FingerParams) -> list[tuple[float, float]]:
    """Axis spans of the alternating blocks, base to tip."""
    out = []
    x = 0.0
    for j in range(params.n_segments):
        out.append((x, x + params.segment_len))
        x += params.segment_len
        if j < params.n_segments - 1:
            out.append((x, x + params.flexure_len))
            x += params.flexure_len
    return out


@dataclass
class TetMesh:
    vertices: np.ndarray          # (n, 3) float64
    tets: np.ndarray              # (m, 4) int32
    block_ids: np.ndarray         # (m,) int32
    surface_tris: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.surface_tris is None:
            self.surface_tris = extract_surface(self.tets)

    def tet_volumes(self) -> np.ndarray:
        v = self.vertices
        t = self.tets
        d1 = v[t[:, 1]] - v[t[:, 0]]
        d2 = v[t[:, 2]] - v[t[:, 0]]
        d3 = v[t[:, 3]] - v[t[:, 0]]
        return np.einsum("ij,ij->i", d1, np.cross(d2, d3)) / 6.0

    @property
    def total_volume(self) -> float:
        return float(self.tet_volumes().sum())

    def surface_vertex_indices(self) -> np.ndarray:
        return np.unique(self.surface_tris)

    def min_altitude(self) -> float:
        """Smallest tet altitude, the length scale for explicit CFL."""
        v = self.vertices
        best = np.inf
        for tet in self.tets:
            p = v[tet]
            vol = abs(np.dot(p[1] - p[0],
                             np.cross(p[2] - p[0], p[3] - p[0]))) / 6.0
            for drop in range(4):
                tri = [k for k in range(4) if k != drop]
                a = np.linalg.norm(
                    np.cross(p[tri[1]] - p[tri[0]], p[tri[2]] - p[tri[0]])
                ) / 2.0
                if a > 0:
                    best = min(best, 3.0 * vol / a)
        return float(best)


def extract_surface(tets: np.ndarray) -> np.ndarray:
    """Outward-oriented boundary triangles (faces used by exactly one tet)."""
    faces = np.concatenate([
        tets[:, [1, 2, 3]],
        tets[:, [0, 3, 2]],
        tets[:, [0, 1, 3]],
        tets[:, [0, 2, 1]],
    ])
    keys = np.sort(faces, axis=1)
    _, inv, counts = np.unique(keys, axis=0, return_inverse=True,
                               return_counts=True)
    return np.ascontiguousarray(faces[counts[inv] == 1])


class _VertexPool:
    """Deduplicates grid vertices by rounded coordinates."""

    def __init__(self, tol: float = 1e-9):
        self.tol = tol
        self.index: dict[tuple[int, int, int], int] = {}
        self.points: list[tuple[float, float, float]] = []

    def add(self, p) -> int:
        key = (round(p[0] / self.tol), round(p[1] / self.tol),
               round(p[2] / self.tol))
        idx = self.index.get(key)
        if idx is None:
            idx = len(self.points)
            self.index[key] = idx
            self.points.append((float(p[0]), float(p[1]), float(p[2])))
        return idx

    def array(self) -> np.ndarray:
        return np.array(self.points, dtype=np.float64)


def _emit_box(pool, tets, blocks, block_id, xs, zs, y_of):
    """Tetrahedralize a structured slab.

    xs, zs are grid lines; y_of(x, level) gives the y coordinate of
    grid level `level` (0..ny) at axis position x, so tops may slant.
    """
    ny = y_of.ny
    for ix in range(len(xs) - 1):
        for iy in range(ny):
            for iz in range(len(zs) - 1):
                corner_idx = {}
                for dx in (0, 1):
                    for dy in (0, 1):
                        for dz in (0, 1):
                            x = xs[ix + dx]
                            z = zs[iz + dz]
                            y = y_of(x, iy + dy)
                            corner_idx[(dx, dy, dz)] = pool.add((x, y, z))
                for path in _KUHN_PATHS:
                    tet = [corner_idx[c] for c in path]
                    tets.append(tet)
                    blocks.append(block_id)


class _SpineY:
    def __init__(self, spine_height, ny):
        self.ny = ny
        self.h = spine_height

    def __call__(self, x, level):
        return self.h * level / self.ny


class _LevelsY:
    """Explicit y grid levels (allows non-uniform vertical spacing)."""

    def __init__(self, levels):
        self.levels = [float(v) for v in levels]
        self.ny = len(self.levels) - 1

    def __call__(self, x, level):
        return self.levels[level]


class _WedgeY:
    def __init__(self, spine_height, x0, q0, x1, q1, ny):
        self.ny = ny
        self.sp = spine_height
        self.x0, self.q0 = x0, q0
        self.slope = (q1 - q0) / (x1 - x0)

    def __call__(self, x, level):
        top = self.q0 + self.slope * (x - self.x0)
        return self.sp + top * level / self.ny


def _orient_positive(vertices: np.ndarray, tets: np.ndarray) -> np.ndarray:
    d1 = vertices[tets[:, 1]] - vertices[tets[:, 0]]
    d2 = vertices[tets[:, 2]] - vertices[tets[:, 0]]
    d3 = vertices[tets[:, 3]] - vertices[tets[:, 0]]
    vol = np.einsum("ij,ij->i", d1, np.cross(d2, d3))
    flip = vol < 0
    tets[flip] = tets[flip][:, [0, 1, 3, 2]]
    return tets


NY_RECT = 4  # vertical wedge cells for the rectangular profile


def build_finger_mesh(params: FingerParams, profile: str = "taper",
                      route_heights=None) -> tuple[TetMesh, dict]:
    """Single finger in its local frame.

    profile "taper" follows the quadratic-chord trapezoid cut; "rect"
    keeps the full base height along the whole finger (used for routing
    comparisons on identical geometry).  route_heights overrides the
    waypoint heights used for vertex snapping (default: the quadratic
    law).  Returns the mesh and a metadata dict with waypoint arcs,
    heights, snapped vertex indices, expected surface normals, and the
    base vertex mask.
    """
    if profile not in ("taper", "rect"):
        raise ValueError(f"unknown profile {profile!r}")
    sub = params.subdivision
    pool = _VertexPool()
    tets: list[list[int]] = []
    blocks: list[int] = []

    sp = params.spine_height
    nz = 2 * sub
    zs = np.linspace(-params.width / 2, params.width / 2, nz + 1)
    spine_levels, flex_levels = params.y_levels()
    spine_y = _LevelsY(spine_levels)
    flex_y = _LevelsY(flex_levels)

    extents = block_extents(params)
    arcs = params.waypoint_arcs()
    q = params.height_profile

    # spine row: full height under segments, notched down to the flexure
    # height across flexure spans (the bending hinges)
    for bid, (x0, x1) in enumerate(extents):
        is_segment = bid % 2 == 0
        nx = params.segment_cells * sub if is_segment \
            else params.flexure_cells * sub
        xs = np.linspace(x0, x1, nx + 1)
        _emit_box(pool, tets, blocks, bid, xs, zs,
                  spine_y if is_segment else flex_y)

    # wedges on segment blocks
    for j in range(params.n_segments):
        bid = 2 * j
        x0, x1 = extents[bid]
        if profile == "rect":
            q0 = q1 = params.base_height
            ny_wedge = NY_RECT * sub
        else:
            q0 = float(q(x0))
            if params.cut_angle is None:
                q1 = float(q(x1))
            else:
                q1 = max(q0 - np.tan(params.cut_angle) * (x1 - x0), 0.0)
            if q0 < MIN_WEDGE_HEIGHT:
                continue
            q1 = max(q1, 0.15 * q0)  # keep the thin end non-degenerate
            ny_wedge = sub
        wedge_y = _WedgeY(sp, x0, q0, x1, q1, ny=ny_wedge)
        xs = np.linspace(x0, x1, params.segment_cells * sub + 1)
        _emit_box(pool, tets, blocks, bid, xs, zs, wedge_y)

    vertices = pool.array()
    tet_arr = _orient_positive(vertices, np.array(tets, dtype=np.int32))
    block_arr = np.array(blocks, dtype=np.int32)

    # snap one surface vertex to each waypoint location
    if route_heights is None:
        heights = params.height_profile(arcs)
    else:
        heights = np.asarray(route_heights, dtype=np.float64)
        if heights.shape != arcs.shape:
            raise ValueError("route_heights must match the waypoint count")
    mesh = TetMesh(vertices, tet_arr, block_arr)
    surf_idx = mesh.surface_vertex_indices()
    wp_pos = np.zeros((len(arcs), 3))
    for i, a in enumerate(arcs[:-1]):
        wp_pos[i] = (a, sp + heights[i], 0.0)
    if profile == "taper" and route_heights is None:
        wp_pos[-1] = (params.length, sp / 2.0, 0.0)  # tip face centroid
    else:
        wp_pos[-1] = (params.length, sp + heights[-1], 0.0)
    wp_vidx = np.empty(len(arcs), dtype=np.int64)
    for i, p in enumerate(wp_pos):
        cand = surf_idx
        on_plane = np.abs(vertices[surf_idx, 0] - p[0]) < 1e-12
        if on_plane.any():
            cand = surf_idx[on_plane]  # keep snapping within the block face
        d = np.linalg.norm(vertices[cand] - p, axis=1)
        vi = int(cand[int(np.argmin(d))])
        vertices[vi] = p
        wp_vidx[i] = vi
    if len(np.unique(wp_vidx)) != len(wp_vidx):
        raise ValueError("waypoint snapping collapsed two waypoints onto "
                         "one vertex; increase subdivision")
    vols = mesh.tet_volumes()
    if vols.min() <= 0:
        raise ValueError("waypoint snapping inverted a tetrahedron")

    # outward normals of the surface the tendon runs along: perpendicular
    # to the outgoing route chord, tilted toward the object side; the tip
    # waypoint faces out of the tip.
    exp_normals = np.zeros((len(arcs), 3))
    for i in range(len(arcs) - 1):
        dl = arcs[i + 1] - arcs[i]
        dh = heights[i + 1] - heights[i]
        n = np.array([-dh, dl, 0.0])
        exp_normals[i] = n / np.linalg.norm(n)
    exp_normals[-1] = (1.0, 0.0, 0.0)

    base_mask = vertices[:, 0] < 1e-12

    meta = {
        "arcs": arcs,
        "heights": heights,
        "waypoint_vidx": wp_vidx,
        "waypoint_normals": exp_normals,
        "base_mask": base_mask,
    }
    return mesh, meta


def _waypoint_triangles(mesh: TetMesh, wp_vidx, expected_normals):
    """Reference surface triangle per waypoint, chosen by normal alignment."""
    v = mesh.vertices
    tris = mesh.surface_tris
    n_tri = np.cross(v[tris[:, 1]] - v[tris[:, 0]],
                     v[tris[:, 2]] - v[tris[:, 0]])
    n_tri /= np.linalg.norm(n_tri, axis=1, keepdims=True)
    out = np.empty((len(wp_vidx), 3), dtype=np.int64)
    for i, vi in enumerate(wp_vidx):
        cand = np.where((tris == vi).any(axis=1))[0]
        if len(cand) == 0:
            raise ValueError(f"waypoint vertex {vi} not on the surface")
        scores = n_tri[cand] @ expected_normals[i]
        out[i] = tris[cand[int(np.argmax(scores))]]
    return out


@dataclass
class GripperMesh:
    """Two assembled fingers plus tendon and actuation metadata."""

    mesh: TetMesh
    params: FingerParams
    palm_span: float
    vertex_finger: np.ndarray        # (n,) 0 or 1
    base_mask: np.ndarray            # (n,) bool, palm-driven vertices
    waypoint_vidx: np.ndarray        # (2, n_wp)
    waypoint_tris: np.ndarray        # (2, n_wp, 3); row of -1 = use static
    waypoint_arcs: np.ndarray        # (n_wp,)
    waypoint_heights: np.ndarray     # (n_wp,) exact law values
    waypoint_normals: np.ndarray     # (2, n_wp, 3) static fallback normals
    inward_axis: np.ndarray          # (2, 3) prismatic travel direction

    @property
    def n_blocks(self) -> int:
        return 2 * self.params.n_blocks

    def posed_vertices(self, translation, rotation, s1, s2) -> np.ndarray:
        """World vertex positions for a grasp pose.

        The prismatic offsets slide each finger along its inward axis
        before the free-joint transform is applied.
        """
        v = self.mesh.vertices.copy()
        v[self.vertex_finger == 0] += s1 * self.inward_axis[0]
        v[self.vertex_finger == 1] += s2 * self.inward_axis[1]
        return v @ np.asarray(rotation).T + np.asarray(translation)

    def aabb(self, translation, rotation, s1, s2):
        v = self.posed_vertices(translation, rotation, s1, s2)
        return v.min(axis=0), v.max(axis=0)


def build_gripper_mesh(params: FingerParams | None = None,
                       palm_span: float = 0.08) -> GripperMesh:
    """Assemble the 22-block gripper in its canonical frame.

    Canonical frame: palm plane at y = 0, fingers hanging along -y,
    finger 0 on the -x side with its object face toward +x.
    """
    if params is None:
        params = FingerParams()
    if 2 * params.n_blocks != 22:
        raise ValueError(
            f"gripper must have 22 blocks total, got {2 * params.n_blocks} "
            f"({params.n_segments} segments per finger)"
        )
    fm, meta = build_finger_mesh(params)
    reach = params.spine_height + params.base_height
    n_f = len(fm.vertices)
    n_wp = len(meta["arcs"])

    # finger 0: local (x, y, z) -> world (-span/2 - reach + y, -x, z)
    v0 = np.empty_like(fm.vertices)
    v0[:, 0] = -palm_span / 2 - reach + fm.vertices[:, 1]
    v0[:, 1] = -fm.vertices[:, 0]
    v0[:, 2] = fm.vertices[:, 2]
    # finger 1 = finger 0 rotated pi about world y
    v1 = v0.copy()
    v1[:, 0] = -v0[:, 0]
    v1[:, 2] = -v0[:, 2]

    vertices = np.concatenate([v0, v1])
    tets = np.concatenate([fm.tets, fm.tets + n_f]).astype(np.int32)
    tets = _orient_positive(vertices, tets)
    block_ids = np.concatenate(
        [fm.block_ids, fm.block_ids + params.n_blocks]
    ).astype(np.int32)
    mesh = TetMesh(vertices, tets, block_ids)

    def _rot0(n):
        return np.array([n[1], -n[0], n[2]])

    def _rot1(n):
        m = _rot0(n)
        return np.array([-m[0], m[1], -m[2]])

    exp0 = np.array([_rot0(n) for n in meta["waypoint_normals"]])
    exp1 = np.array([_rot1(n) for n in meta["waypoint_normals"]])
    wp_vidx = np.stack([meta["waypoint_vidx"],
                        meta["waypoint_vidx"] + n_f]).astype(np.int64)
    tris0 = _waypoint_triangles(mesh, wp_vidx[0], exp0)
    tris1 = _waypoint_triangles(mesh, wp_vidx[1], exp1)

    return GripperMesh(
        mesh=mesh,
        params=params,
        palm_span=palm_span,
        vertex_finger=np.concatenate(
            [np.zeros(n_f, dtype=np.int8), np.ones(n_f, dtype=np.int8)]
        ),
        base_mask=np.concatenate([meta["base_mask"], meta["base_mask"]]),
        waypoint_vidx=wp_vidx,
        waypoint_tris=np.stack([tris0, tris1]),
        waypoint_arcs=meta["arcs"],
        waypoint_heights=meta["heights"],
        waypoint_normals=np.stack([exp0, exp1]),
        inward_axis=np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]),
    )


def save_obj(path, vertices: np.ndarray, faces: np.ndarray) -> None:
    with open(path, "w") as fh:
        for v in vertices:
            fh.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for f in faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def load_obj(path):
    """ASCII OBJ with triangular faces; returns (vertices, faces)."""
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
                if len(idx) != 3:
                    raise ValueError("only triangular faces are supported")
                faces.append(idx)
    return np.array(verts, dtype=np.float64), np.array(faces, dtype=np.int64)
