"""Surrogate training: mean L1 on the 10 standardized outputs, Adam."""

from dataclasses import dataclass, field

import numpy as np

from ..datagen import DatasetRecord
from .net import N_OUTPUT, SurrogateModel


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 150
    batch_size: int = 64
    val_fraction: float = 0.15
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be > 0")
        if not 0 < self.val_fraction < 1:
            raise ValueError("val_fraction must be in (0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


@dataclass
class TrainResult:
    train_l1: list[float] = field(default_factory=list)
    val_l1: list[float] = field(default_factory=list)
    untrained_val_l1: float = 0.0


def _stack(records: list[DatasetRecord]):
    clouds = np.stack([r.cloud for r in records])
    coms = np.stack([r.com for r in records])
    dens = np.array([r.density for r in records])
    ks = np.stack([r.k for r in records])
    poses = np.stack([r.pose for r in records])
    targets = np.stack([
        np.concatenate([r.wrench, r.dq, [float(r.c_g)]]) for r in records
    ])
    return clouds, coms, dens, ks, poses, targets


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float):
        self.lr = lr
        self.beta1, self.beta2, self.eps = 0.9, 0.999, 1e-8
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def _val_l1(model, cloud_n, extra_n, targets_n):
    y = model.forward_normalized(cloud_n, extra_n)
    return float(np.abs(y - targets_n).mean())


def train(model: SurrogateModel, records: list[DatasetRecord],
          cfg: TrainConfig) -> TrainResult:
    """Fit normalization on the training split, then minimize mean L1."""
    if not records:
        raise ValueError("dataset is empty")
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(records))
    n_val = max(1, int(round(cfg.val_fraction * len(records))))
    if n_val >= len(records):
        raise ValueError("dataset too small for the validation split")
    val_idx = order[:n_val]
    train_idx = order[n_val:]
    tr = [records[i] for i in train_idx]
    va = [records[i] for i in val_idx]

    clouds, coms, dens, ks, poses, targets = _stack(tr)
    model.fit_normalization(clouds, coms, dens, ks, poses, targets)
    cloud_n, extra_n = model.normalize_inputs(clouds, coms, dens, ks, poses)
    targets_n = (targets - model.norm.target_mean) / model.norm.target_scale

    v_clouds, v_coms, v_dens, v_ks, v_poses, v_targets = _stack(va)
    v_cloud_n, v_extra_n = model.normalize_inputs(
        v_clouds, v_coms, v_dens, v_ks, v_poses)
    v_targets_n = (v_targets - model.norm.target_mean) \
        / model.norm.target_scale

    result = TrainResult()
    result.untrained_val_l1 = _val_l1(model, v_cloud_n, v_extra_n,
                                      v_targets_n)

    params = self_params = model.parameters()
    opt = Adam(params, cfg.learning_rate)
    n = len(tr)
    for epoch in range(cfg.epochs):
        # linear decay to 5%: the L1 objective plateaus at the step size
        opt.lr = cfg.learning_rate * (1.0 - 0.95 * epoch
                                      / max(cfg.epochs - 1, 1))
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            y, cache = model.forward_normalized(
                cloud_n[idx], extra_n[idx], want_cache=True)
            diff = y - targets_n[idx]
            loss = np.abs(diff).mean()
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite loss at epoch {epoch}, batch "
                    f"{start // cfg.batch_size}"
                )
            d_out = np.sign(diff) / diff.size
            grads, _ = model.backward(cache, d_out)
            opt.step(self_params, grads)
            epoch_loss += loss * len(idx)
        result.train_l1.append(epoch_loss / n)
        result.val_l1.append(_val_l1(model, v_cloud_n, v_extra_n,
                                     v_targets_n))
    return result
