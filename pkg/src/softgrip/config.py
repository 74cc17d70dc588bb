"""Pipeline configuration: one JSON file per run, one root seed."""

import json
from dataclasses import asdict, dataclass, field, replace

from .fem.scene import SimParams
from .fem.sim import MotionScript
from .geometry.finger import FingerParams
from .geometry.sdf import ShapeSDF, box, capsule, cylinder, mesh_shape, sphere
from .geometry.finger import load_obj
from .surrogate.train import TrainConfig
from .codesign import CodesignConfig

SCHEMA_VERSION = 1

# desk-scale defaults calibrated for the explicit simulator: the tendon
# tension and disturbance are scaled to the gram-range object masses the
# light/heavy densities produce
DEFAULT_CONFIG = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "palm_span": 0.08,
    "finger": {},
    "objects": [
        {"kind": "sphere", "dims": [0.022], "densities": [2.0, 8.0]},
        {"kind": "box", "dims": [0.018, 0.025, 0.02], "densities": [2.0, 8.0]},
        {"kind": "cylinder", "dims": [0.016, 0.03], "densities": [2.0, 8.0]},
    ],
    "script": {"tension": 2.0, "disturb_force": 0.2},
    "sim": {},
    "datagen": {"n_poses": 12, "n_stiffness": 10, "n_points": 256,
                "workers": 2, "distribution": "log-uniform"},
    "train": {"epochs": 150, "batch_size": 64, "learning_rate": 1e-3,
              "val_fraction": 0.15},
    "codesign": {"top_b": 5, "patience": 10, "alpha": 0.05,
                 "max_iters": 400, "w1": 1.0, "w2": 10.0},
    "evaluate": {"density": 8.0, "n_poses": 6},
}


@dataclass
class ObjectSpec:
    kind: str
    dims: list[float]
    densities: list[float]
    obj_path: str | None = None

    def rest_height(self) -> float:
        if self.kind == "sphere":
            return self.dims[0]
        if self.kind == "box":
            return self.dims[1]
        if self.kind in ("cylinder",):
            return self.dims[1]
        if self.kind == "capsule":
            return self.dims[0] + self.dims[1]
        return 0.0

    def build(self, density: float, name: str) -> ShapeSDF:
        pos = (0.0, self.rest_height(), 0.0)
        if self.kind == "sphere":
            return sphere(self.dims[0], pos, density, name)
        if self.kind == "box":
            return box(self.dims, pos, density=density, name=name)
        if self.kind == "cylinder":
            return cylinder(self.dims[0], self.dims[1], pos,
                            density=density, name=name)
        if self.kind == "capsule":
            return capsule(self.dims[0], self.dims[1], pos,
                           density=density, name=name)
        if self.kind == "mesh":
            verts, faces = load_obj(self.obj_path)
            lift = -verts[:, 1].min()
            return mesh_shape(verts, faces, (0.0, lift, 0.0),
                              density=density, name=name)
        raise ValueError(f"unknown object kind {self.kind!r}")


@dataclass
class PipelineConfig:
    seed: int
    palm_span: float
    finger: FingerParams
    objects: list[ObjectSpec]
    script: MotionScript
    sim: SimParams
    datagen: dict
    train: TrainConfig
    codesign: CodesignConfig
    evaluate: dict
    raw: dict = field(repr=False, default_factory=dict)

    def object_variants(self) -> list:
        """Expand (spec, density) pairs with stable names."""
        out = []
        for i, spec in enumerate(self.objects):
            for d in spec.densities:
                name = f"{spec.kind}{i}-d{d:g}"
                out.append((spec, d, name))
        return out

    def geometry_objects(self, density: float) -> list[ShapeSDF]:
        return [spec.build(density, f"{spec.kind}{i}-d{density:g}")
                for i, spec in enumerate(self.objects)]


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, val in override.items():
        if key in out and isinstance(out[key], dict) and isinstance(val, dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def load_config(path=None, seed: int | None = None) -> PipelineConfig:
    raw = dict(DEFAULT_CONFIG)
    if path is not None:
        with open(path) as fh:
            user = json.load(fh)
        if user.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ValueError(
                f"config schema_version {user.get('schema_version')} "
                f"!= supported {SCHEMA_VERSION}"
            )
        raw = _merge(raw, user)
    if seed is not None:
        raw["seed"] = seed
    try:
        finger = FingerParams(**raw["finger"])
    except TypeError as ex:
        raise ValueError(f"config field 'finger': {ex}") from ex
    objects = []
    for i, spec in enumerate(raw["objects"]):
        try:
            objects.append(ObjectSpec(**spec))
        except TypeError as ex:
            raise ValueError(f"config field 'objects[{i}]': {ex}") from ex
    if not objects:
        raise ValueError("config field 'objects': need at least one object")
    try:
        script = MotionScript(**raw["script"])
    except (TypeError, ValueError) as ex:
        raise ValueError(f"config field 'script': {ex}") from ex
    try:
        sim = replace(SimParams(), **raw["sim"])
    except TypeError as ex:
        raise ValueError(f"config field 'sim': {ex}") from ex
    try:
        train_cfg = TrainConfig(seed=int(raw["seed"]), **raw["train"])
    except (TypeError, ValueError) as ex:
        raise ValueError(f"config field 'train': {ex}") from ex
    try:
        codesign_cfg = CodesignConfig(**raw["codesign"])
    except (TypeError, ValueError) as ex:
        raise ValueError(f"config field 'codesign': {ex}") from ex
    return PipelineConfig(
        seed=int(raw["seed"]),
        palm_span=float(raw["palm_span"]),
        finger=finger,
        objects=objects,
        script=script,
        sim=sim,
        datagen=dict(raw["datagen"]),
        train=train_cfg,
        codesign=codesign_cfg,
        evaluate=dict(raw["evaluate"]),
        raw=raw,
    )


def config_dict(cfg: PipelineConfig) -> dict:
    out = dict(cfg.raw)
    out["finger"] = asdict(cfg.finger)
    return out
