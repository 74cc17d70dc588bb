"""Scene assembly: gripper + object + contact parameters packed into the
flat arrays the simulation kernels consume."""

from dataclasses import dataclass, field, replace

import numpy as np

from ..backend import USE_NUMBA
from ..errors import DivergenceError
from ..geometry.finger import GripperMesh, TetMesh
from ..geometry.sdf import ShapeSDF, pack_shape, surface_points_local
from ..geometry.transforms import rpy_to_matrix
from .materials import MaterialMap

if USE_NUMBA:
    from . import kernels_numba as K
else:
    from . import kernels_numpy as K

OBJ_SAMPLE_SEED = 7  # fixed: object ground-contact samples are scene geometry


@dataclass
class SimParams:
    """Contact, damping and integration constants."""

    k_contact: float = 1e5        # N/m penalty stiffness
    c_normal: float = 5.0         # N s/m normal contact damping
    c_tangent: float = 30.0       # N s/m tangential viscous coefficient
    mu_friction: float = 0.6
    damping: float = 5.0          # 1/s mass-proportional, gripper
    obj_damping: float = 5.0      # 1/s
    gravity: float = -9.81        # m/s^2 along y
    frame_rate: float = 4000.0    # recorded frames per second
    cfl_safety: float = 0.8
    min_substeps: int = 1
    max_substeps: int = 36        # beyond this, mass-scale stiff tets
    n_ground_samples: int = 160   # object surface samples for ground contact

    @property
    def frame_dt(self) -> float:
        return 1.0 / self.frame_rate


@dataclass
class SimState:
    """Mutable simulation state; arrays are owned by the state."""

    x: np.ndarray
    v: np.ndarray
    obj_pos: np.ndarray
    obj_quat: np.ndarray
    obj_v: np.ndarray
    obj_w: np.ndarray
    time: float = 0.0

    def copy(self) -> "SimState":
        return SimState(self.x.copy(), self.v.copy(), self.obj_pos.copy(),
                        self.obj_quat.copy(), self.obj_v.copy(),
                        self.obj_w.copy(), self.time)

    def check_finite(self, phase: str = "", frame: int = -1) -> None:
        for name, arr in (("vertex positions", self.x),
                          ("vertex velocities", self.v),
                          ("object pose", self.obj_pos),
                          ("object quaternion", self.obj_quat),
                          ("object velocity", self.obj_v),
                          ("object angular velocity", self.obj_w)):
            if not np.isfinite(arr).all():
                raise DivergenceError(name, phase, frame)


@dataclass
class Scene:
    """A gripper, an optional rigid object, and the world."""

    gripper: GripperMesh
    obj: ShapeSDF | None = None
    params: SimParams = field(default_factory=SimParams)
    gravity_on: bool = True
    ground_on: bool = True
    fix_base: bool = True

    def __post_init__(self):
        mesh = self.gripper.mesh
        self._min_altitude = mesh.min_altitude()
        self._surf_vidx = mesh.surface_vertex_indices().astype(np.int64)
        self._wp_vidx = self.gripper.waypoint_vidx.reshape(-1).copy()
        self._wp_tris = self.gripper.waypoint_tris.reshape(-1, 3).copy()
        self._wp_normals = self.gripper.waypoint_normals.reshape(-1, 3).copy()
        self._n_wp = self.gripper.waypoint_vidx.shape[1]
        if self.obj is not None:
            kind, prm, grid, lo, sp = pack_shape(self.obj)
            self._obj_pack = (kind, prm, grid, lo, sp)
            rng = np.random.default_rng(OBJ_SAMPLE_SEED)
            self._obj_samples = surface_points_local(
                self.obj, self.params.n_ground_samples, rng)
            self._obj_inv_inertia = np.linalg.inv(self.obj.inertia_body())
        else:
            self._obj_pack = (-1, np.zeros(8), np.zeros((1, 1, 1)),
                              np.zeros(3), np.ones(3))
            self._obj_samples = np.zeros((0, 3))
            self._obj_inv_inertia = np.zeros((3, 3))
        self._materials: MaterialMap | None = None

    # -- materials ---------------------------------------------------------

    def set_materials(self, materials: MaterialMap) -> None:
        """Assign materials, lump vertex masses and fix the substep count.

        Tets whose explicit stable timestep falls below frame_dt /
        max_substeps get their density scaled up to reach it (selective
        mass scaling, the standard explicit-FEM treatment for a few
        small stiff elements); everything else keeps the physical
        density.  The scaling factor is reported via mass_scale.
        """
        self._materials = materials
        mesh = self.gripper.mesh
        vol = mesh.tet_volumes()
        p = self.params
        if not hasattr(self, "_tet_altitude"):
            self._tet_altitude = _tet_altitudes(mesh)
        nu = materials.poisson
        m_mod = materials.youngs * (1 - nu) / ((1 + nu) * (1 - 2 * nu))
        c_wave = np.sqrt(m_mod / materials.density)
        dt_t = p.cfl_safety * self._tet_altitude / c_wave
        dt_cap = p.frame_dt / p.max_substeps
        dt_use = max(float(dt_t.min()), dt_cap)
        rho = np.full(len(vol), materials.density)
        slow = dt_t < dt_use
        rho[slow] *= (dt_use / dt_t[slow]) ** 2
        self.mass_scale = float((rho * vol).sum()
                                / (materials.density * vol.sum()))
        self._n_substeps = max(int(np.ceil(p.frame_dt / dt_use)),
                               p.min_substeps)
        self._mass = np.zeros(len(mesh.vertices))
        np.add.at(self._mass, mesh.tets.ravel(),
                  np.repeat(rho * vol / 4.0, 4))
        self._inv_mass = 1.0 / self._mass
        if self.fix_base:
            self._inv_mass[self.gripper.base_mask] = 0.0
        self._damp_cap_dt = None

    @property
    def materials(self) -> MaterialMap:
        if self._materials is None:
            raise RuntimeError("call set_materials() first")
        return self._materials

    def n_substeps(self, frame_dt: float | None = None) -> int:
        """Explicit-integration substeps per recorded frame."""
        if self._materials is None:
            raise RuntimeError("call set_materials() first")
        return self._n_substeps

    # -- state construction -------------------------------------------------

    def make_state(self, pose=None) -> SimState:
        """Initial state with the gripper at a grasp pose (8-vector) and
        the object at its shape pose.  The posed configuration is the
        FEM rest state."""
        if pose is None:
            x0 = self.gripper.mesh.vertices.copy()
        else:
            pose = np.asarray(pose, dtype=np.float64)
            rot = rpy_to_matrix(pose[3], pose[4], pose[5])
            x0 = self.gripper.posed_vertices(pose[:3], rot, pose[6], pose[7])
        self._rest = x0.copy()
        tets = self.gripper.mesh.tets
        d = np.stack([x0[tets[:, 1]] - x0[tets[:, 0]],
                      x0[tets[:, 2]] - x0[tets[:, 0]],
                      x0[tets[:, 3]] - x0[tets[:, 0]]], axis=2)
        self._vol0 = np.linalg.det(d) / 6.0
        self._bm = np.linalg.inv(d)
        if self.obj is not None:
            opos = self.obj.position.copy()
            oquat = self.obj.quat.copy()
        else:
            opos = np.zeros(3)
            oquat = np.array([1.0, 0, 0, 0])
        return SimState(
            x=x0, v=np.zeros_like(x0),
            obj_pos=opos, obj_quat=oquat,
            obj_v=np.zeros(3), obj_w=np.zeros(3),
        )

    # -- stepping ------------------------------------------------------------

    def advance(self, state: SimState, dt: float, n_sub: int,
                tension: float = 0.0, base_vy: float = 0.0,
                obj_ext_fy: float = 0.0,
                contact_scale: float = 1.0) -> np.ndarray:
        """Advance n_sub substeps of dt each; returns the frame output
        vector (contact wrench on the object from the gripper + flags).
        contact_scale softens the penalty stiffness while initial
        penetrations from pose refinement are pushed out."""
        if dt <= 0:
            raise ValueError(f"dt must be > 0, got {dt}")
        mat = self.materials
        kind, prm, grid, lo, sp = self._obj_pack
        obj_mass = self.obj.mass if self.obj is not None else 0.0
        com_local = self.obj.com_local if self.obj is not None else np.zeros(3)
        if not hasattr(self, "_fbuf") or self._fbuf.shape != state.x.shape:
            self._fbuf = np.zeros_like(state.x)
        out = np.zeros(K.OUT_SIZE)
        # viscous contact coefficients capped by the inertia each contact
        # class touches, so explicit integration stays stable; gripper
        # vertices carry individual caps (0.5 m / dt)
        p = self.params
        if self.obj is not None and obj_mass > 0:
            cap_o_pair = 0.5 * obj_mass / (32 * dt)
            cap_o_gnd = 0.5 * obj_mass / (max(len(self._obj_samples), 1) * dt)
        else:
            cap_o_pair = cap_o_gnd = np.inf
        contact_damp = np.array([
            min(p.c_normal, cap_o_pair),
            min(p.c_tangent, cap_o_pair),
            p.c_normal,
            p.c_tangent,
            min(p.c_normal, cap_o_gnd),
            min(p.c_tangent, cap_o_gnd),
        ])
        if getattr(self, "_damp_cap_dt", None) != dt:
            self._damp_cap = 0.5 * self._mass / dt
            self._damp_cap_dt = dt
        K.advance_frame(
            state.x, state.v, self._inv_mass, self._mass,
            self.gripper.mesh.tets, self._bm, self._vol0,
            mat.mu, mat.lam_stable, mat.alpha,
            self.params.damping,
            self.params.gravity if self.gravity_on else 0.0,
            base_vy,
            self._wp_vidx, self._wp_tris, self._wp_normals, self._n_wp,
            tension,
            self._surf_vidx, self.ground_on,
            kind, prm, grid, lo, sp, com_local,
            state.obj_pos, state.obj_quat, state.obj_v, state.obj_w,
            obj_mass, self._obj_inv_inertia, self._obj_samples,
            obj_ext_fy, self.params.obj_damping,
            self.params.k_contact * contact_scale, contact_damp,
            self._damp_cap, self.params.mu_friction,
            dt, n_sub,
            self._fbuf, out,
        )
        state.time += dt * n_sub
        return out


def step(scene: Scene, state: SimState, dt: float, tension: float = 0.0,
         base_vy: float = 0.0) -> np.ndarray:
    """One semi-implicit integration step (public single-step entry)."""
    out = scene.advance(state, dt, 1, tension=tension, base_vy=base_vy)
    state.check_finite()
    return out


def _tet_altitudes(mesh: TetMesh) -> np.ndarray:
    """Minimum altitude per tet (3 V / largest face area)."""
    v = mesh.vertices
    t = mesh.tets
    p = v[t]
    vol = np.abs(np.einsum("ij,ij->i", p[:, 1] - p[:, 0],
                           np.cross(p[:, 2] - p[:, 0],
                                    p[:, 3] - p[:, 0]))) / 6.0
    amax = np.zeros(len(t))
    for drop in range(4):
        tri = [k for k in range(4) if k != drop]
        a = np.linalg.norm(
            np.cross(p[:, tri[1]] - p[:, tri[0]],
                     p[:, tri[2]] - p[:, tri[0]]), axis=1) / 2.0
        amax = np.maximum(amax, a)
    return 3.0 * vol / amax


def vertex_blocks(mesh: TetMesh) -> np.ndarray:
    """Block id per vertex (first adjacent tet wins; deterministic)."""
    out = np.full(len(mesh.vertices), -1, dtype=np.int32)
    for t in range(len(mesh.tets) - 1, -1, -1):
        out[mesh.tets[t]] = mesh.block_ids[t]
    return out


def load_scene_config(path) -> dict:
    """Plain-text key = value scene configuration."""
    out: dict[str, float | str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            try:
                out[key] = float(val)
            except ValueError:
                out[key] = val
    return out


def sim_params_from_config(cfg: dict) -> SimParams:
    p = SimParams()
    fields = {f for f in vars(p)}
    updates = {k: float(v) for k, v in cfg.items() if k in fields}
    if "min_substeps" in updates:
        updates["min_substeps"] = int(updates["min_substeps"])
    if "max_substeps" in updates:
        updates["max_substeps"] = int(updates["max_substeps"])
    return replace(p, **updates)
