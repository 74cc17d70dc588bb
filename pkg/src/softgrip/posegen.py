"""Grasp pose sampling and SDF-based refinement.

Candidate poses straddle the object along sampled antipodal directions
with a top-down bias, then get refined by minimizing the init loss
(distance hinge pulling the gripper toward object and ground, heavy
penetration hinge pushing it out of collision) over the vertical offset
and the two prismatic finger travels.
"""

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import UngraspableError
from .geometry.finger import GripperMesh
from .geometry.sdf import ShapeSDF, sdf_eval
from .geometry.transforms import rpy_to_matrix, wrap_angle

S_MAX = 0.05          # prismatic travel limit, m
GRASP_CLEARANCE = 2.5e-3
MIN_TIP_HEIGHT = 3e-3
PENETRATION_TOL = 1e-3


@dataclass
class GraspPose:
    translation: np.ndarray   # (3,)
    rotation: np.ndarray      # (3,) roll, pitch, yaw in (-pi, pi]
    s1: float
    s2: float
    valid: bool = True

    def __post_init__(self):
        self.translation = np.asarray(self.translation, dtype=np.float64)
        self.rotation = np.array(
            [wrap_angle(a) for a in np.asarray(self.rotation)], dtype=np.float64
        )
        if not (0.0 <= self.s1 <= S_MAX and 0.0 <= self.s2 <= S_MAX):
            raise ValueError(
                f"prismatic offsets must lie in [0, {S_MAX}], "
                f"got ({self.s1}, {self.s2})"
            )

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.translation, self.rotation,
                               [self.s1, self.s2]])

    @classmethod
    def from_vector(cls, v, valid: bool = True) -> "GraspPose":
        v = np.asarray(v, dtype=np.float64)
        return cls(v[:3], v[3:6], float(v[6]), float(v[7]), valid)

    def matrix(self) -> np.ndarray:
        return rpy_to_matrix(*self.rotation)


@dataclass
class PoseNoiseParams:
    mu_t: float = 0.0
    sigma_t: float = 0.01    # m
    mu_r: float = 0.0
    sigma_r: float = 0.1     # rad

    def __post_init__(self):
        if self.sigma_t < 0 or self.sigma_r < 0:
            raise ValueError("noise sigmas must be >= 0")


@dataclass
class InitWeights:
    w_d: float = 0.01
    w_p: float = 100.0

    def __post_init__(self):
        if not 0 < self.w_d < self.w_p:
            raise ValueError("need 0 < w_d < w_p")


def _width_along(obj: ShapeSDF, direction: np.ndarray,
                 reach: float) -> float:
    """Object width through the CoM along a direction, via bisection on
    the SDF zero crossing."""
    com = obj.com_world
    width = 0.0
    for sign in (1.0, -1.0):
        lo, hi = 0.0, reach
        if sdf_eval(obj, com + sign * hi * direction) < 0:
            return np.inf
        for _ in range(48):
            mid = 0.5 * (lo + hi)
            if sdf_eval(obj, com + sign * mid * direction) < 0:
                lo = mid
            else:
                hi = mid
        width += 0.5 * (lo + hi)
    return width


def sample_candidate_poses(obj: ShapeSDF, gripper: GripperMesh, n: int,
                           seed: int) -> list[GraspPose]:
    """n candidate poses straddling the object, deterministic per seed."""
    if n <= 0:
        raise ValueError(f"need n > 0 candidate poses, got {n}")
    rng = np.random.default_rng(seed)
    params = gripper.params
    span_max = gripper.palm_span + 2 * params.base_height
    com = obj.com_world
    reach = 2.0 * max(span_max, 0.1)

    poses = []
    any_graspable = False
    for _ in range(n):
        spin = rng.uniform(0, 2 * np.pi)
        tilt = min(abs(rng.normal(0.0, 0.12)), 0.30)
        tilt_dir = rng.uniform(0, 2 * np.pi)
        rot = np.array([tilt * np.cos(tilt_dir), spin,
                        tilt * np.sin(tilt_dir)])
        rmat = rpy_to_matrix(*rot)
        closing = rmat @ np.array([1.0, 0.0, 0.0])
        width = _width_along(obj, closing, reach)
        if width + 2 * GRASP_CLEARANCE > span_max:
            poses.append(None)
            continue
        any_graspable = True
        # contact happens along the distal half where the taper is thin
        q_contact = params.height_profile(0.75 * params.length)
        s_total = span_max - 2 * q_contact - width - 2 * GRASP_CLEARANCE
        s_each = float(np.clip(s_total / 2, 0.0, S_MAX))
        # fingertip line placed just below the object's mid-height
        tip_y = max(0.25 * com[1], MIN_TIP_HEIGHT)
        target = np.array([com[0], tip_y, com[2]])
        t = target + params.length * (rmat @ np.array([0.0, 1.0, 0.0]))
        poses.append(GraspPose(t, rot, s_each, s_each))

    if not any_graspable:
        raise UngraspableError(
            f"{obj.name or obj.kind} is wider than the {span_max:.3f} m "
            "finger span along every sampled direction"
        )
    fallback = next(p for p in poses if p is not None)
    return [p if p is not None else replace(fallback) for p in poses]


def perturb_pose(pose: GraspPose, noise: PoseNoiseParams,
                 seed: int) -> GraspPose:
    """Add independent normal noise to translation and rotation."""
    rng = np.random.default_rng(seed)
    t = pose.translation + rng.normal(noise.mu_t, noise.sigma_t, size=3) \
        if noise.sigma_t > 0 or noise.mu_t != 0 else pose.translation.copy()
    r = pose.rotation + rng.normal(noise.mu_r, noise.sigma_r, size=3) \
        if noise.sigma_r > 0 or noise.mu_r != 0 else pose.rotation.copy()
    return GraspPose(t, r, pose.s1, pose.s2, pose.valid)


def _surface_points(gripper: GripperMesh, pose_vec: np.ndarray,
                    surf_idx: np.ndarray) -> np.ndarray:
    rot = rpy_to_matrix(*pose_vec[3:6])
    v = gripper.mesh.vertices[surf_idx].copy()
    fid = gripper.vertex_finger[surf_idx]
    v[fid == 0] += pose_vec[6] * gripper.inward_axis[0]
    v[fid == 1] += pose_vec[7] * gripper.inward_axis[1]
    return v @ rot.T + pose_vec[:3]


def l_init(pose: GraspPose | np.ndarray, obj: ShapeSDF,
           gripper: GripperMesh,
           weights: InitWeights | None = None) -> float:
    """Init loss: distance hinges pull toward object and ground, the
    penetration hinges push out, summed over gripper surface vertices."""
    if weights is None:
        weights = InitWeights()
    vec = pose.as_vector() if isinstance(pose, GraspPose) else np.asarray(pose)
    surf = gripper.mesh.surface_vertex_indices()
    pts = _surface_points(gripper, vec, surf)
    d_obj = sdf_eval(obj, pts)
    d_gnd = pts[:, 1]
    loss = 0.0
    for d in (d_obj, d_gnd):
        loss += weights.w_d * np.maximum(d, 0.0).sum()
        loss += weights.w_p * np.maximum(-d, 0.0).sum()
    return float(loss)


def max_penetration(pose: GraspPose | np.ndarray, obj: ShapeSDF,
                    gripper: GripperMesh) -> float:
    vec = pose.as_vector() if isinstance(pose, GraspPose) else np.asarray(pose)
    surf = gripper.mesh.surface_vertex_indices()
    pts = _surface_points(gripper, vec, surf)
    pen = max(float(-sdf_eval(obj, pts).min()), float(-pts[:, 1].min()))
    return max(pen, 0.0)


def refine_pose(pose: GraspPose, obj: ShapeSDF, gripper: GripperMesh,
                weights: InitWeights | None = None,
                step: float = 1e-3, iters: int = 200,
                fd_eps: float = 1e-5) -> GraspPose:
    """Minimize l_init over (t_y, s1, s2) by finite-difference descent
    with backtracking halving; the remaining five coordinates are
    untouched.  Marks the pose invalid when the refined penetration
    exceeds the tolerance."""
    if weights is None:
        weights = InitWeights()
    vec = pose.as_vector()
    free = [1, 6, 7]  # t_y, s1, s2

    def clipped(v):
        v = v.copy()
        v[6] = np.clip(v[6], 0.0, S_MAX)
        v[7] = np.clip(v[7], 0.0, S_MAX)
        return v

    def loss_of(v):
        return l_init(v, obj, gripper, weights)

    best = clipped(vec)
    best_loss = loss_of(best)
    for _ in range(iters):
        grad = np.zeros(3)
        for gi, axis in enumerate(free):
            vp = best.copy()
            vp[axis] += fd_eps
            vm = best.copy()
            vm[axis] -= fd_eps
            grad[gi] = (loss_of(clipped(vp)) - loss_of(clipped(vm))) \
                / (2 * fd_eps)
        gnorm = np.linalg.norm(grad)
        if gnorm < 1e-12:
            break
        moved = False
        cur_step = step
        while cur_step > 1e-7:
            trial = best.copy()
            for gi, axis in enumerate(free):
                trial[axis] -= cur_step * grad[gi] / gnorm
            trial = clipped(trial)
            trial_loss = loss_of(trial)
            if trial_loss < best_loss:
                best, best_loss = trial, trial_loss
                moved = True
                break
            cur_step *= 0.5
        if not moved:
            break

    refined = GraspPose(best[:3], best[3:6], float(best[6]), float(best[7]))
    refined.valid = max_penetration(refined, obj, gripper) <= PENETRATION_TOL
    return refined


def poses_to_jsonl(poses: list[GraspPose], path) -> None:
    with open(path, "w") as fh:
        for p in poses:
            fh.write(json.dumps({"pose": p.as_vector().tolist(),
                                 "valid": bool(p.valid)}) + "\n")


def poses_from_jsonl(path) -> list[GraspPose]:
    out = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                out.append(GraspPose.from_vector(rec["pose"], rec["valid"]))
    return out
