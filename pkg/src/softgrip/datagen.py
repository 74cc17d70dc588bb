"""Bulk episode generation for surrogate training.

Stiffness vectors are sampled log-uniformly over the block range (the
range spans 1.5 decades; deformation is multiplicative in the modulus),
poses come from the sampler + refiner with failures discarded, and one
supervised record is emitted per (object, pose, stiffness) episode.
Episodes run on a small thread pool (the hot kernel releases the GIL);
records are written in deterministic (object, pose, stiffness) order
regardless of completion order.
"""

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, NoOverlapError
from .fem.materials import E_MAX, E_MIN, validate_stiffness
from .fem.scene import Scene, SimParams
from .fem.sim import MotionScript, run_episode
from .geometry.finger import GripperMesh
from .geometry.pointcloud import extract_partial_pointcloud
from .geometry.sdf import ShapeSDF
from .posegen import (
    GraspPose,
    InitWeights,
    PoseNoiseParams,
    perturb_pose,
    refine_pose,
    sample_candidate_poses,
)

N_POINTS = 256
SCHEMA_VERSION = 1


def sample_stiffness(seed: int, distribution: str = "log-uniform",
                     n_blocks: int = 22) -> np.ndarray:
    """One stiffness vector, i.i.d. per block within [E_MIN, E_MAX]."""
    rng = np.random.default_rng(seed)
    if distribution == "log-uniform":
        k = np.exp(rng.uniform(np.log(E_MIN), np.log(E_MAX), size=n_blocks))
    elif distribution == "uniform":
        k = rng.uniform(E_MIN, E_MAX, size=n_blocks)
    else:
        raise ValueError(f"unknown stiffness distribution {distribution!r}")
    return np.clip(k, E_MIN, E_MAX)


@dataclass
class DatasetRecord:
    object_id: str
    density: float
    cloud: np.ndarray    # (n_points, 3) gripper-frame
    com: np.ndarray      # (3,) gripper-frame
    k: np.ndarray        # (22,)
    pose: np.ndarray     # (8,)
    wrench: np.ndarray   # (6,)
    dq: np.ndarray       # (3,)
    c_g: int

    def to_json(self) -> str:
        return json.dumps({
            "object": self.object_id,
            "density": self.density,
            "cloud": self.cloud.tolist(),
            "com": self.com.tolist(),
            "k": self.k.tolist(),
            "pose": self.pose.tolist(),
            "f": self.wrench.tolist(),
            "dq": self.dq.tolist(),
            "c_g": int(self.c_g),
        })

    @classmethod
    def from_json(cls, line: str, lineno: int = -1) -> "DatasetRecord":
        try:
            d = json.loads(line)
            rec = cls(
                object_id=str(d["object"]),
                density=float(d["density"]),
                cloud=np.array(d["cloud"], dtype=np.float64),
                com=np.array(d["com"], dtype=np.float64),
                k=np.array(d["k"], dtype=np.float64),
                pose=np.array(d["pose"], dtype=np.float64),
                wrench=np.array(d["f"], dtype=np.float64),
                dq=np.array(d["dq"], dtype=np.float64),
                c_g=int(d["c_g"]),
            )
        except (KeyError, ValueError, TypeError) as ex:
            raise ValueError(f"malformed dataset record at line {lineno}: "
                             f"{ex}") from ex
        rec.validate(lineno)
        return rec

    def validate(self, lineno: int = -1) -> None:
        where = f" at line {lineno}" if lineno >= 0 else ""
        if self.cloud.ndim != 2 or self.cloud.shape[1] != 3:
            raise ValueError(f"bad cloud shape {self.cloud.shape}{where}")
        validate_stiffness(self.k)
        if self.pose.shape != (8,) or self.wrench.shape != (6,) \
                or self.dq.shape != (3,) or self.com.shape != (3,):
            raise ValueError(f"bad field shapes{where}")
        if self.c_g not in (0, 1):
            raise ValueError(f"c_g must be 0 or 1{where}")
        for name in ("cloud", "com", "k", "pose", "wrench", "dq"):
            if not np.isfinite(getattr(self, name)).all():
                raise ValueError(f"non-finite {name}{where}")


def write_dataset(records: list[DatasetRecord], path) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")


def read_dataset(path) -> list[DatasetRecord]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                out.append(DatasetRecord.from_json(line, lineno))
    return out


@dataclass
class GenerationStats:
    n_records: int = 0
    n_failed_poses: int = 0
    n_diverged: int = 0
    n_no_overlap: int = 0
    per_object: dict = field(default_factory=dict)


def _gripper_frame(points: np.ndarray, pose: GraspPose) -> np.ndarray:
    return (np.atleast_2d(points) - pose.translation) @ pose.matrix()


def generate_dataset(objects: list[ShapeSDF], gripper: GripperMesh,
                     n_poses: int, n_stiffness: int, script: MotionScript,
                     seed: int, sim_params: SimParams | None = None,
                     noise: PoseNoiseParams | None = None,
                     weights: InitWeights | None = None,
                     distribution: str = "log-uniform",
                     n_points: int = N_POINTS,
                     workers: int = 2) -> tuple[list[DatasetRecord],
                                                GenerationStats]:
    """Episodes for every (object, valid pose, stiffness) triple."""
    if n_poses <= 0 or n_stiffness <= 0:
        raise ValueError("n_poses and n_stiffness must be > 0")
    if sim_params is None:
        sim_params = SimParams()
    if noise is None:
        noise = PoseNoiseParams()
    stats = GenerationStats()

    jobs = []
    for oi, obj in enumerate(objects):
        base_seed = seed + 7919 * oi
        candidates = sample_candidate_poses(obj, gripper, n_poses, base_seed)
        n_valid = 0
        for pi, cand in enumerate(candidates):
            noisy = perturb_pose(cand, noise, base_seed + 131 * pi + 1)
            pose = refine_pose(noisy, obj, gripper, weights)
            if not pose.valid:
                stats.n_failed_poses += 1
                continue
            try:
                lo, hi = gripper.aabb(pose.translation, pose.matrix(),
                                      pose.s1, pose.s2)
                cloud_w = extract_partial_pointcloud(
                    obj, (lo, hi), n_points, base_seed + 131 * pi + 2)
            except NoOverlapError:
                stats.n_no_overlap += 1
                continue
            cloud = _gripper_frame(cloud_w, pose)
            com = _gripper_frame(obj.com_world, pose)[0]
            n_valid += 1
            for si in range(n_stiffness):
                k = sample_stiffness(base_seed + 131 * pi + 17 * si + 3,
                                     distribution)
                jobs.append((obj, pose, cloud, com, k))
        stats.per_object[obj.name or f"object{oi}"] = n_valid

    def run_one(job):
        obj, pose, cloud, com, k = job
        scene = Scene(gripper, obj=obj, params=sim_params)
        try:
            outcome, _ = run_episode(scene, k, pose.as_vector(), script)
        except DivergenceError:
            return None
        return DatasetRecord(
            object_id=obj.name or obj.kind,
            density=obj.density,
            cloud=cloud, com=com, k=k,
            pose=pose.as_vector(),
            wrench=outcome.wrench, dq=outcome.dq,
            c_g=outcome.ground_contact,
        )

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, jobs))
    else:
        results = [run_one(j) for j in jobs]

    records = [r for r in results if r is not None]
    stats.n_diverged = sum(1 for r in results if r is None)
    stats.n_records = len(records)
    return records, stats


def config_hash(config: dict) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True).encode()
    ).hexdigest()


def write_manifest(path, seed: int, stats: GenerationStats,
                   config: dict) -> None:
    manifest = {
        "schema": SCHEMA_VERSION,
        "seed": seed,
        "records": stats.n_records,
        "failed_poses": stats.n_failed_poses,
        "no_overlap": stats.n_no_overlap,
        "diverged": stats.n_diverged,
        "per_object_valid_poses": stats.per_object,
        "config_sha256": config_hash(config),
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
