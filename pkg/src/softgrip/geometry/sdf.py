"""Signed distance functions for grasp objects.

Shapes are rigid: a tagged primitive (sphere, box, cylinder, capsule) or
a watertight triangle mesh, posed in world by a translation and a unit
quaternion.  Distances are exact for primitives; mesh distances use
exact point-triangle distance with a generalized-winding-number sign.
Negative inside, positive outside, zero on the surface.

Axis conventions: cylinders and capsules are aligned with their local
y axis; the world up axis is +y with the ground plane at y = 0.
"""

from dataclasses import dataclass, field

import numpy as np

from ..backend import njit
from ..errors import MeshNotWatertightError
from .transforms import quat_to_matrix

SPHERE, BOX, CYLINDER, CAPSULE, MESH = 0, 1, 2, 3, 4

_KIND_IDS = {"sphere": SPHERE, "box": BOX, "cylinder": CYLINDER,
             "capsule": CAPSULE, "mesh": MESH}


@dataclass
class ShapeSDF:
    """A posed rigid shape with inertial properties.

    dims interpretation:
      sphere   (r,)
      box      (hx, hy, hz) half-extents
      cylinder (r, hh) radius and half-height, axis local y
      capsule  (r, hh) radius and cylindrical half-length, axis local y
      mesh     unused; vertices/faces carry the geometry
    """

    kind: str
    dims: np.ndarray
    position: np.ndarray
    quat: np.ndarray
    density: float
    vertices: np.ndarray | None = None
    faces: np.ndarray | None = None
    name: str = ""
    com_local: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.dims = np.atleast_1d(np.asarray(self.dims, dtype=np.float64))
        self.position = np.asarray(self.position, dtype=np.float64)
        self.quat = np.asarray(self.quat, dtype=np.float64)
        self.quat = self.quat / np.linalg.norm(self.quat)
        if self.density <= 0:
            raise ValueError(f"density must be > 0, got {self.density}")
        if self.kind not in _KIND_IDS:
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if self.kind == "mesh":
            if self.vertices is None or self.faces is None:
                raise ValueError("mesh shape requires vertices and faces")
            self.vertices = np.asarray(self.vertices, dtype=np.float64)
            self.faces = np.asarray(self.faces, dtype=np.int64)
            _check_watertight(self.faces)
            vol, com = _mesh_volume_com(self.vertices, self.faces)
            if vol <= 0:
                raise MeshNotWatertightError(
                    "mesh has non-positive enclosed volume; check face orientation"
                )
            self._volume = vol
            self.com_local = com
        else:
            self._volume = _primitive_volume(self.kind, self.dims)
            self.com_local = np.zeros(3)

    # -- rigid placement -------------------------------------------------

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.quat)

    @property
    def com_world(self) -> np.ndarray:
        return self.position + self.rotation @ self.com_local

    def to_local(self, points: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(points) - self.position) @ self.rotation

    def to_world(self, points: np.ndarray) -> np.ndarray:
        return np.atleast_2d(points) @ self.rotation.T + self.position

    # -- inertial properties ----------------------------------------------

    @property
    def volume(self) -> float:
        return self._volume

    @property
    def mass(self) -> float:
        return self.density * self._volume

    def inertia_body(self) -> np.ndarray:
        """Inertia tensor about the center of mass, in the local frame."""
        m = self.mass
        if self.kind == "sphere":
            r = self.dims[0]
            return np.eye(3) * (0.4 * m * r * r)
        if self.kind == "box":
            hx, hy, hz = self.dims[:3]
            return np.diag(
                [m * (hy * hy + hz * hz) / 3.0,
                 m * (hx * hx + hz * hz) / 3.0,
                 m * (hx * hx + hy * hy) / 3.0]
            )
        if self.kind == "cylinder":
            r, hh = self.dims[:2]
            it = m * (3 * r * r + 4 * hh * hh) / 12.0
            return np.diag([it, 0.5 * m * r * r, it])
        if self.kind == "capsule":
            r, hh = self.dims[:2]
            rho = self.density
            m_cyl = rho * np.pi * r * r * 2 * hh
            m_hem = rho * (2.0 / 3.0) * np.pi * r ** 3  # one hemisphere
            i_cyl_t = m_cyl * (3 * r * r + 4 * hh * hh) / 12.0
            i_cyl_a = 0.5 * m_cyl * r * r
            # hemisphere about its own centroid, then shifted to capsule center
            d_c = 3.0 * r / 8.0
            i_hem_t_c = 0.4 * m_hem * r * r - m_hem * d_c * d_c
            i_hem_t = i_hem_t_c + m_hem * (hh + d_c) ** 2
            i_hem_a = 0.4 * m_hem * r * r
            it = i_cyl_t + 2 * i_hem_t
            ia = i_cyl_a + 2 * i_hem_a
            return np.diag([it, ia, it])
        # mesh: second moments about the CoM via signed tetrahedra
        return _mesh_inertia(self.vertices, self.faces, self.density,
                             self.com_local)


def _primitive_volume(kind: str, dims: np.ndarray) -> float:
    if kind == "sphere":
        return 4.0 / 3.0 * np.pi * dims[0] ** 3
    if kind == "box":
        return float(8.0 * dims[0] * dims[1] * dims[2])
    if kind == "cylinder":
        return float(np.pi * dims[0] ** 2 * 2 * dims[1])
    if kind == "capsule":
        r, hh = dims[:2]
        return float(np.pi * r * r * 2 * hh + 4.0 / 3.0 * np.pi * r ** 3)
    raise ValueError(kind)


def sphere(radius, position=(0, 0, 0), density=1000.0, name="sphere"):
    return ShapeSDF("sphere", np.array([radius]), np.array(position, float),
                    np.array([1.0, 0, 0, 0]), density, name=name)


def box(half_extents, position=(0, 0, 0), quat=(1, 0, 0, 0), density=1000.0,
        name="box"):
    return ShapeSDF("box", np.array(half_extents, float),
                    np.array(position, float), np.array(quat, float),
                    density, name=name)


def cylinder(radius, half_height, position=(0, 0, 0), quat=(1, 0, 0, 0),
             density=1000.0, name="cylinder"):
    return ShapeSDF("cylinder", np.array([radius, half_height]),
                    np.array(position, float), np.array(quat, float),
                    density, name=name)


def capsule(radius, half_length, position=(0, 0, 0), quat=(1, 0, 0, 0),
            density=1000.0, name="capsule"):
    return ShapeSDF("capsule", np.array([radius, half_length]),
                    np.array(position, float), np.array(quat, float),
                    density, name=name)


def mesh_shape(vertices, faces, position=(0, 0, 0), quat=(1, 0, 0, 0),
               density=1000.0, name="mesh"):
    return ShapeSDF("mesh", np.zeros(1), np.array(position, float),
                    np.array(quat, float), density,
                    vertices=vertices, faces=faces, name=name)


# -- local-frame distance kernels ------------------------------------------


@njit(cache=True)
def _sdf_sphere_local(px, py, pz, r):
    return np.sqrt(px * px + py * py + pz * pz) - r


@njit(cache=True)
def _sdf_box_local(px, py, pz, hx, hy, hz):
    qx = abs(px) - hx
    qy = abs(py) - hy
    qz = abs(pz) - hz
    ox = qx if qx > 0.0 else 0.0
    oy = qy if qy > 0.0 else 0.0
    oz = qz if qz > 0.0 else 0.0
    outside = np.sqrt(ox * ox + oy * oy + oz * oz)
    m = qx
    if qy > m:
        m = qy
    if qz > m:
        m = qz
    inside = m if m < 0.0 else 0.0
    return outside + inside


@njit(cache=True)
def _sdf_cylinder_local(px, py, pz, r, hh):
    dr = np.sqrt(px * px + pz * pz) - r
    dy = abs(py) - hh
    odr = dr if dr > 0.0 else 0.0
    ody = dy if dy > 0.0 else 0.0
    outside = np.sqrt(odr * odr + ody * ody)
    m = dr if dr > dy else dy
    inside = m if m < 0.0 else 0.0
    return outside + inside


@njit(cache=True)
def _sdf_capsule_local(px, py, pz, r, hh):
    cy = py
    if cy > hh:
        cy = hh
    elif cy < -hh:
        cy = -hh
    dy = py - cy
    return np.sqrt(px * px + dy * dy + pz * pz) - r


def _sdf_primitive_local(kind_id: int, dims: np.ndarray,
                         pts: np.ndarray) -> np.ndarray:
    """Vectorized local-frame primitive SDF (numpy reference path)."""
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    if kind_id == SPHERE:
        return np.sqrt(x * x + y * y + z * z) - dims[0]
    if kind_id == BOX:
        q = np.abs(pts) - dims[:3]
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(q.max(axis=1), 0.0)
        return outside + inside
    if kind_id == CYLINDER:
        dr = np.sqrt(x * x + z * z) - dims[0]
        dy = np.abs(y) - dims[1]
        outside = np.sqrt(np.maximum(dr, 0) ** 2 + np.maximum(dy, 0) ** 2)
        inside = np.minimum(np.maximum(dr, dy), 0.0)
        return outside + inside
    if kind_id == CAPSULE:
        cy = np.clip(y, -dims[1], dims[1])
        return np.sqrt(x * x + (y - cy) ** 2 + z * z) - dims[0]
    raise ValueError(kind_id)


def sdf_eval(shape: ShapeSDF, points: np.ndarray):
    """Signed distance from world-frame point(s) to the shape surface."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    local = shape.to_local(pts)
    if shape.kind == "mesh":
        d = _mesh_sdf_batch(local, shape.vertices, shape.faces)
    else:
        d = _sdf_primitive_local(_KIND_IDS[shape.kind], shape.dims, local)
    if np.ndim(points) == 1:
        return float(d[0])
    return d


def sdf_normal(shape: ShapeSDF, points: np.ndarray, eps: float = 1e-7):
    """Outward unit normal by central differences on the SDF."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    g = np.zeros_like(pts)
    for ax in range(3):
        dp = np.zeros(3)
        dp[ax] = eps
        g[:, ax] = sdf_eval(shape, pts + dp) - sdf_eval(shape, pts - dp)
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    g /= norms
    if np.ndim(points) == 1:
        return g[0]
    return g


# -- surface sampling --------------------------------------------------------


def surface_points_local(shape: ShapeSDF, n: int, rng: np.random.Generator
                         ) -> np.ndarray:
    """n points sampled uniformly by area on the local-frame surface."""
    if shape.kind == "sphere":
        v = rng.normal(size=(n, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return v * shape.dims[0]
    if shape.kind == "box":
        hx, hy, hz = shape.dims[:3]
        areas = np.array([hy * hz, hy * hz, hx * hz, hx * hz, hx * hy, hx * hy])
        face = rng.choice(6, size=n, p=areas / areas.sum())
        u = rng.uniform(-1, 1, size=(n, 2))
        pts = np.empty((n, 3))
        for i in range(n):
            a, b = u[i]
            f = face[i]
            if f == 0:
                pts[i] = (hx, a * hy, b * hz)
            elif f == 1:
                pts[i] = (-hx, a * hy, b * hz)
            elif f == 2:
                pts[i] = (a * hx, hy, b * hz)
            elif f == 3:
                pts[i] = (a * hx, -hy, b * hz)
            elif f == 4:
                pts[i] = (a * hx, b * hy, hz)
            else:
                pts[i] = (a * hx, b * hy, -hz)
        return pts
    if shape.kind == "cylinder":
        r, hh = shape.dims[:2]
        a_side = 2 * np.pi * r * 2 * hh
        a_cap = np.pi * r * r
        which = rng.choice(3, size=n,
                           p=np.array([a_side, a_cap, a_cap])
                           / (a_side + 2 * a_cap))
        theta = rng.uniform(0, 2 * np.pi, size=n)
        pts = np.empty((n, 3))
        for i in range(n):
            if which[i] == 0:
                y = rng.uniform(-hh, hh)
                pts[i] = (r * np.cos(theta[i]), y, r * np.sin(theta[i]))
            else:
                rr = r * np.sqrt(rng.uniform())
                y = hh if which[i] == 1 else -hh
                pts[i] = (rr * np.cos(theta[i]), y, rr * np.sin(theta[i]))
        return pts
    if shape.kind == "capsule":
        r, hh = shape.dims[:2]
        a_side = 2 * np.pi * r * 2 * hh
        a_sph = 4 * np.pi * r * r
        side = rng.uniform(size=n) < a_side / (a_side + a_sph)
        pts = np.empty((n, 3))
        theta = rng.uniform(0, 2 * np.pi, size=n)
        for i in range(n):
            if side[i]:
                y = rng.uniform(-hh, hh)
                pts[i] = (r * np.cos(theta[i]), y, r * np.sin(theta[i]))
            else:
                v = rng.normal(size=3)
                v /= np.linalg.norm(v)
                off = hh if v[1] >= 0 else -hh
                pts[i] = (r * v[0], off + r * v[1], r * v[2])
        return pts
    # mesh: triangle-area weighted
    verts, faces = shape.vertices, shape.faces
    a = verts[faces[:, 1]] - verts[faces[:, 0]]
    b = verts[faces[:, 2]] - verts[faces[:, 0]]
    areas = 0.5 * np.linalg.norm(np.cross(a, b), axis=1)
    tri = rng.choice(len(faces), size=n, p=areas / areas.sum())
    u = rng.uniform(size=(n, 2))
    flip = u.sum(axis=1) > 1
    u[flip] = 1 - u[flip]
    p0 = verts[faces[tri, 0]]
    return (p0 + u[:, :1] * (verts[faces[tri, 1]] - p0)
            + u[:, 1:] * (verts[faces[tri, 2]] - p0))


def surface_points(shape: ShapeSDF, n: int, seed: int) -> np.ndarray:
    """World-frame surface samples, deterministic per seed."""
    rng = np.random.default_rng(seed)
    return shape.to_world(surface_points_local(shape, n, rng))


# -- triangle mesh machinery --------------------------------------------------


def _check_watertight(faces: np.ndarray) -> None:
    """Every undirected edge must be shared by exactly two faces with
    opposite orientation."""
    counts: dict[tuple[int, int], int] = {}
    for f in faces:
        for a, b in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
            counts[(int(a), int(b))] = counts.get((int(a), int(b)), 0) + 1
    for (a, b), c in counts.items():
        if c != 1 or counts.get((b, a), 0) != 1:
            raise MeshNotWatertightError(
                f"edge ({a},{b}) not matched by exactly one opposite half-edge"
            )


def _mesh_volume_com(verts: np.ndarray, faces: np.ndarray):
    """Enclosed volume and centroid via the divergence theorem."""
    p0 = verts[faces[:, 0]]
    p1 = verts[faces[:, 1]]
    p2 = verts[faces[:, 2]]
    cross = np.cross(p1 - p0, p2 - p0)
    svol = np.einsum("ij,ij->i", p0, cross) / 6.0
    vol = svol.sum()
    centroid = ((p0 + p1 + p2) / 4.0 * svol[:, None]).sum(axis=0) / vol
    return float(vol), centroid


def _mesh_inertia(verts, faces, density, com):
    """Inertia about the CoM via canonical tetrahedron integrals."""
    v = verts - com
    p0, p1, p2 = v[faces[:, 0]], v[faces[:, 1]], v[faces[:, 2]]
    acc = np.zeros((3, 3))
    for a, b, c in zip(p0, p1, p2):
        det = np.dot(a, np.cross(b, c))
        for i in range(3):
            for j in range(3):
                s = (2 * (a[i] * a[j] + b[i] * b[j] + c[i] * c[j])
                     + a[i] * b[j] + a[j] * b[i]
                     + a[i] * c[j] + a[j] * c[i]
                     + b[i] * c[j] + b[j] * c[i])
                acc[i, j] += det * s / 120.0
    acc *= density
    return np.eye(3) * np.trace(acc) - acc


@njit(cache=True)
def _point_tri_dist2(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz):
    abx, aby, abz = bx - ax, by - ay, bz - az
    acx, acy, acz = cx - ax, cy - ay, cz - az
    apx, apy, apz = px - ax, py - ay, pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return apx * apx + apy * apy + apz * apz
    bpx, bpy, bpz = px - bx, py - by, pz - bz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bpx * bpx + bpy * bpy + bpz * bpz
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        t = d1 / (d1 - d3)
        qx, qy, qz = ax + t * abx, ay + t * aby, az + t * abz
        return (px - qx) ** 2 + (py - qy) ** 2 + (pz - qz) ** 2
    cpx, cpy, cpz = px - cx, py - cy, pz - cz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cpx * cpx + cpy * cpy + cpz * cpz
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        t = d2 / (d2 - d6)
        qx, qy, qz = ax + t * acx, ay + t * acy, az + t * acz
        return (px - qx) ** 2 + (py - qy) ** 2 + (pz - qz) ** 2
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        qx = bx + t * (cx - bx)
        qy = by + t * (cy - by)
        qz = bz + t * (cz - bz)
        return (px - qx) ** 2 + (py - qy) ** 2 + (pz - qz) ** 2
    denom = 1.0 / (va + vb + vc)
    s = vb * denom
    t = vc * denom
    qx = ax + abx * s + acx * t
    qy = ay + aby * s + acy * t
    qz = az + abz * s + acz * t
    return (px - qx) ** 2 + (py - qy) ** 2 + (pz - qz) ** 2


@njit(cache=True)
def _mesh_sdf_kernel(pts, verts, faces):
    n = pts.shape[0]
    out = np.empty(n)
    for k in range(n):
        px, py, pz = pts[k, 0], pts[k, 1], pts[k, 2]
        best = 1e300
        wind = 0.0
        for t in range(faces.shape[0]):
            i0, i1, i2 = faces[t, 0], faces[t, 1], faces[t, 2]
            ax, ay, az = verts[i0, 0], verts[i0, 1], verts[i0, 2]
            bx, by, bz = verts[i1, 0], verts[i1, 1], verts[i1, 2]
            cx, cy, cz = verts[i2, 0], verts[i2, 1], verts[i2, 2]
            d2 = _point_tri_dist2(px, py, pz, ax, ay, az, bx, by, bz,
                                  cx, cy, cz)
            if d2 < best:
                best = d2
            # signed solid angle (Van Oosterom & Strackee)
            rax, ray, raz = ax - px, ay - py, az - pz
            rbx, rby, rbz = bx - px, by - py, bz - pz
            rcx, rcy, rcz = cx - px, cy - py, cz - pz
            la = np.sqrt(rax * rax + ray * ray + raz * raz)
            lb = np.sqrt(rbx * rbx + rby * rby + rbz * rbz)
            lc = np.sqrt(rcx * rcx + rcy * rcy + rcz * rcz)
            num = (rax * (rby * rcz - rbz * rcy)
                   + ray * (rbz * rcx - rbx * rcz)
                   + raz * (rbx * rcy - rby * rcx))
            den = (la * lb * lc
                   + (rax * rbx + ray * rby + raz * rbz) * lc
                   + (rbx * rcx + rby * rcy + rbz * rcz) * la
                   + (rcx * rax + rcy * ray + rcz * raz) * lb)
            wind += np.arctan2(num, den)
        sign = -1.0 if wind > np.pi else 1.0  # winding/(4pi) > 0.5 -> inside
        out[k] = sign * np.sqrt(best)
    return out


def _mesh_sdf_batch(pts: np.ndarray, verts: np.ndarray,
                    faces: np.ndarray) -> np.ndarray:
    return _mesh_sdf_kernel(np.ascontiguousarray(pts, dtype=np.float64),
                            np.ascontiguousarray(verts, dtype=np.float64),
                            np.ascontiguousarray(faces.astype(np.int64)))


# -- packing for the contact kernels ------------------------------------------

GRID_RES = 48


def pack_shape(shape: ShapeSDF):
    """Flatten a shape for the simulation kernels.

    Returns (kind_id, params[8], grid, grid_origin, grid_spacing).  For
    primitives the grid entries are 1-cell dummies; mesh shapes get a
    trilinear-interpolated SDF grid baked at load time.
    """
    params = np.zeros(8)
    nd = min(len(shape.dims), 8)
    params[:nd] = shape.dims[:nd]
    kind_id = _KIND_IDS[shape.kind]
    if shape.kind != "mesh":
        grid = np.zeros((1, 1, 1))
        return kind_id, params, grid, np.zeros(3), np.ones(3)
    lo = shape.vertices.min(axis=0)
    hi = shape.vertices.max(axis=0)
    pad = 0.25 * (hi - lo).max() + 1e-4
    lo, hi = lo - pad, hi + pad
    ax = [np.linspace(lo[i], hi[i], GRID_RES) for i in range(3)]
    gx, gy, gz = np.meshgrid(*ax, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    vals = _mesh_sdf_batch(pts, shape.vertices, shape.faces)
    grid = vals.reshape(GRID_RES, GRID_RES, GRID_RES)
    spacing = (hi - lo) / (GRID_RES - 1)
    return kind_id, params, grid, lo, spacing
