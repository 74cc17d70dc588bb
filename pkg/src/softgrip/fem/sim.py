"""Grasp episodes: motion script execution, outcome recording, success.

An episode runs four phases at the recording rate (4000 fps, 850 frames
by default): the tendons ramp to a fixed tension, hold, the base lifts
the fingers a fixed distance, then a downward disturbance force is
applied to the object.  The recorded trace carries the object body
wrench from gripper contact, the object displacement relative to the
gripper, and the contact flags that define grasp success.
"""

import csv
from dataclasses import dataclass

import numpy as np

from ..errors import DivergenceError
from .scene import Scene, SimState


@dataclass
class MotionScript:
    tension: float = 20.0          # N, tendon force after the ramp
    ramp_s: float = 0.05
    hold_s: float = 0.025
    lift_s: float = 0.1
    disturb_s: float = 0.0375
    lift_dist: float = 0.10        # m
    disturb_force: float = 500.0   # N, downward on the object
    lift_accel_frac: float = 0.25  # trapezoidal velocity blend fraction

    def __post_init__(self):
        for name in ("ramp_s", "hold_s", "lift_s", "disturb_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.lift_dist <= 0:
            raise ValueError("lift_dist must be > 0")
        if not 0 <= self.lift_accel_frac <= 0.5:
            raise ValueError("lift_accel_frac must be in [0, 0.5]")

    def frame_counts(self, frame_rate: float) -> tuple[int, int, int, int]:
        return (round(self.ramp_s * frame_rate),
                round(self.hold_s * frame_rate),
                round(self.lift_s * frame_rate),
                round(self.disturb_s * frame_rate))

    def n_frames(self, frame_rate: float) -> int:
        return sum(self.frame_counts(frame_rate))

    def lift_velocity(self, s: float) -> float:
        """Base velocity at lift progress s in [0, 1): trapezoidal profile
        (jumping straight to the plateau rips weak grips open)."""
        a = self.lift_accel_frac
        if a == 0:
            return self.lift_dist / self.lift_s
        v_peak = self.lift_dist / (self.lift_s * (1.0 - a))
        if s < a:
            return v_peak * s / a
        if s > 1.0 - a:
            return v_peak * (1.0 - s) / a
        return v_peak


@dataclass
class GraspOutcome:
    wrench: np.ndarray     # (6,) ending body force + torque on the object
    dq: np.ndarray         # (3,) object displacement w.r.t. the gripper
    ground_contact: int    # c_g

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.wrench, self.dq,
                               [float(self.ground_contact)]])


PHASES = ("ramp", "hold", "lift", "disturb")


@dataclass
class EpisodeTrace:
    wrench: np.ndarray          # (F, 6)
    dq: np.ndarray              # (F, 3)
    grip_contact: np.ndarray    # (F,) uint8
    ground_contact: np.ndarray  # (F,) uint8
    tension: np.ndarray         # (F,)
    base_y: np.ndarray          # (F,)
    lift_start: int
    lift_end: int

    @property
    def n_frames(self) -> int:
        return len(self.tension)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frame", "fx", "fy", "fz", "tx", "ty", "tz",
                        "dqx", "dqy", "dqz", "grip_contact",
                        "ground_contact", "tension", "base_y"])
            for i in range(self.n_frames):
                w.writerow([i, *self.wrench[i], *self.dq[i],
                            int(self.grip_contact[i]),
                            int(self.ground_contact[i]),
                            self.tension[i], self.base_y[i]])


def run_episode(scene: Scene, k: np.ndarray, pose: np.ndarray,
                script: MotionScript, materials=None
                ) -> tuple[GraspOutcome, EpisodeTrace]:
    """Execute ramp -> hold -> lift -> disturbance and record the trace."""
    from .materials import map_stiffness

    if materials is None:
        materials = map_stiffness(k, scene.gripper.mesh)
    scene.set_materials(materials)
    state = scene.make_state(pose)
    p = scene.params
    n_ramp, n_hold, n_lift, n_dist = script.frame_counts(p.frame_rate)
    n_frames = n_ramp + n_hold + n_lift + n_dist
    n_sub = scene.n_substeps()
    dt_sub = p.frame_dt / n_sub

    wrench = np.zeros((n_frames, 6))
    dq = np.zeros((n_frames, 3))
    grip_c = np.zeros(n_frames, dtype=np.uint8)
    ground_c = np.zeros(n_frames, dtype=np.uint8)
    tension_log = np.zeros(n_frames)
    base_log = np.zeros(n_frames)

    com0 = _object_com(scene, state)
    base_y = 0.0

    for f in range(n_frames):
        if f < n_ramp:
            phase = "ramp"
            tension = script.tension * (f + 1) / n_ramp
            vy, fy = 0.0, 0.0
        elif f < n_ramp + n_hold:
            phase, tension, vy, fy = "hold", script.tension, 0.0, 0.0
        elif f < n_ramp + n_hold + n_lift:
            phase, tension, fy = "lift", script.tension, 0.0
            vy = script.lift_velocity((f - n_ramp - n_hold) / n_lift)
        else:
            phase, tension, vy = "disturb", script.tension, 0.0
            fy = -script.disturb_force
        cs = min(1.0, (f + 1) / n_ramp)
        out = scene.advance(state, dt_sub, n_sub, tension=tension,
                            base_vy=vy, obj_ext_fy=fy, contact_scale=cs)
        if not np.isfinite(out).all() or not np.isfinite(state.x).all():
            state.check_finite(phase, f)
            raise DivergenceError("frame output", phase, f)
        base_y += vy * p.frame_dt
        wrench[f] = out[:6]
        com = _object_com(scene, state)
        dq[f] = (com - [0.0, base_y, 0.0]) - com0
        grip_c[f] = out[6] > 0
        ground_c[f] = out[7] > 0
        tension_log[f] = tension
        base_log[f] = base_y

    trace = EpisodeTrace(
        wrench=wrench, dq=dq, grip_contact=grip_c, ground_contact=ground_c,
        tension=tension_log, base_y=base_log,
        lift_start=n_ramp + n_hold, lift_end=n_ramp + n_hold + n_lift,
    )
    outcome = GraspOutcome(wrench=wrench[-1].copy(), dq=dq[-1].copy(),
                           ground_contact=int(ground_c[-1]))
    return outcome, trace


def _object_com(scene: Scene, state: SimState) -> np.ndarray:
    if scene.obj is None:
        return np.zeros(3)
    from ..geometry.transforms import quat_to_matrix

    return state.obj_pos + quat_to_matrix(state.obj_quat) \
        @ scene.obj.com_local


def evaluate_success(trace: EpisodeTrace,
                     eval_start: int | None = None) -> bool:
    """Grasp success over the evaluation window.

    The window starts when the lift completes (the object needs the
    lift phase to leave the ground under penalty contact); success
    requires no ground collision, persistent object-gripper contact and
    a non-zero body wrench on every frame of the window.
    """
    if trace.n_frames == 0:
        raise ValueError("empty trace")
    if eval_start is None:
        eval_start = trace.lift_end
    sl = slice(eval_start, trace.n_frames)
    if trace.ground_contact[sl].any():
        return False
    if not trace.grip_contact[sl].all():
        return False
    norms = np.linalg.norm(trace.wrench[sl], axis=1)
    return bool((norms > 0).all())
