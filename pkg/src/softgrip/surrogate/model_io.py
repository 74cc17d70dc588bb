"""Model persistence: versioned binary weights + JSON sidecar with the
normalization constants."""

import json
import struct
from pathlib import Path

import numpy as np

from .net import Normalization, SurrogateModel

MAGIC = b"SGRIPNN1"


def save_model(model: SurrogateModel, path) -> None:
    path = Path(path)
    params = model.parameters()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(params)))
        for p in params:
            fh.write(struct.pack("<I", p.ndim))
            for d in p.shape:
                fh.write(struct.pack("<I", d))
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())
    sidecar = {
        "format": 1,
        "normalization": {
            k: getattr(model.norm, k).tolist()
            for k in ("cloud_mean", "cloud_scale", "extra_mean",
                      "extra_scale", "target_mean", "target_scale")
        },
    }
    with open(path.with_suffix(path.suffix + ".json"), "w") as fh:
        json.dump(sidecar, fh, indent=1, sort_keys=True)


def load_model(path) -> SurrogateModel:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a surrogate model file")
        (n_params,) = struct.unpack("<I", fh.read(4))
        params = []
        for _ in range(n_params):
            (ndim,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack("<" + "I" * ndim, fh.read(4 * ndim))
            count = int(np.prod(shape))
            arr = np.frombuffer(fh.read(8 * count), dtype="<f8")
            params.append(arr.reshape(shape).copy())
    model = SurrogateModel()
    model.set_parameters(params)
    with open(path.with_suffix(path.suffix + ".json")) as fh:
        sidecar = json.load(fh)
    norm = Normalization(**{
        k: np.array(v) for k, v in sidecar["normalization"].items()
    })
    norm.validate()
    model.norm = norm
    return model
