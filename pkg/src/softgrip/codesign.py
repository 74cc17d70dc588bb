"""Joint stiffness/pose optimization through the surrogate.

Per object, every candidate pose is scored by the grasp objective; the
top-B set is tracked with a patience counter, and once the ranking is
stable the object is frozen to its best pose.  Each iteration takes one
projected gradient step on the stiffness vector in standardized
log-stiffness coordinates (the 1.5-decade range makes raw-pascal steps
ill-conditioned).  The same loop serves per-object individual
optimization and, with a fixed design, deployment-time pose selection.
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .fem.materials import E_MAX, E_MIN
from .surrogate.net import N_STIFF, SurrogateModel, opt_loss_and_grad


@dataclass
class CodesignConfig:
    top_b: int = 5
    patience: int = 10
    alpha: float = 0.05
    max_iters: int = 500
    w1: float = 1.0
    w2: float = 10.0
    stable_tol: float = 1e-6
    stable_iters: int = 10

    def __post_init__(self):
        if self.top_b < 1 or self.patience < 1:
            raise ValueError("top_b and patience must be >= 1")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.w1 < 0 or self.w2 < 0:
            raise ValueError("loss weights must be >= 0")


@dataclass
class OptState:
    converged: list[bool]
    best_pose: list[int | None]
    patience: list[int]
    prev_best: list[frozenset]
    z: np.ndarray
    iteration: int = 0
    history: list[dict] = field(default_factory=list)


def l_opt(pred, w1: float, w2: float) -> float:
    """Grasp objective on a physical prediction (lower is better)."""
    loss, _ = opt_loss_and_grad(np.asarray(pred, dtype=np.float64), w1, w2)
    return loss


@dataclass
class PoseCandidate:
    """Surrogate inputs for one candidate grasp of one object."""

    cloud: np.ndarray
    com: np.ndarray
    density: float
    pose: np.ndarray


class SurrogateObjective:
    """loss_fn adapter: evaluates candidates through the network with
    the standardized log-stiffness slice swapped in."""

    def __init__(self, model: SurrogateModel, pose_sets:
                 list[list[PoseCandidate]], w1: float, w2: float):
        self.model = model
        self.w1 = w1
        self.w2 = w2
        self._inputs = []
        dummy_k = np.full(N_STIFF, np.sqrt(E_MIN * E_MAX))
        for candidates in pose_sets:
            rows = []
            for c in candidates:
                cloud_n, extra_n = model.normalize_inputs(
                    c.cloud, c.com, c.density, dummy_k, c.pose)
                rows.append((cloud_n, extra_n))
            self._inputs.append(rows)

    def z_bounds(self):
        m = self.model.norm.extra_mean[4:4 + N_STIFF]
        s = self.model.norm.extra_scale[4:4 + N_STIFF]
        return (np.log(E_MIN) - m) / s, (np.log(E_MAX) - m) / s

    def z_from_k(self, k: np.ndarray) -> np.ndarray:
        m = self.model.norm.extra_mean[4:4 + N_STIFF]
        s = self.model.norm.extra_scale[4:4 + N_STIFF]
        return (np.log(k) - m) / s

    def k_from_z(self, z: np.ndarray) -> np.ndarray:
        m = self.model.norm.extra_mean[4:4 + N_STIFF]
        s = self.model.norm.extra_scale[4:4 + N_STIFF]
        return np.clip(np.exp(z * s + m), E_MIN, E_MAX)

    def __call__(self, obj_idx: int, pose_idx: int, z: np.ndarray):
        cloud_n, extra_n = self._inputs[obj_idx][pose_idx]
        extra = extra_n.copy()
        extra[0, 4:4 + N_STIFF] = z
        y, cache = self.model.forward_normalized(cloud_n, extra,
                                                 want_cache=True)
        pred = y[0] * self.model.norm.target_scale \
            + self.model.norm.target_mean
        loss, d_pred = opt_loss_and_grad(pred, self.w1, self.w2)
        d_y = (d_pred * self.model.norm.target_scale)[None, :]
        _, d_extra = self.model.backward(cache, d_y)
        return loss, d_extra[0, 4:4 + N_STIFF]


def joint_optimize(loss_fn, n_poses_per_object: list[int], z0: np.ndarray,
                   z_lo: np.ndarray, z_hi: np.ndarray,
                   cfg: CodesignConfig) -> OptState:
    """Top-B patience loop with projected gradient steps on z.

    loss_fn(obj_idx, pose_idx, z) -> (loss, grad_z).  Terminates at
    max_iters, or earlier once every object has converged and the
    summed best losses are stable.
    """
    n_obj = len(n_poses_per_object)
    if n_obj == 0:
        raise ValueError("need at least one object")
    for n_p in n_poses_per_object:
        if n_p < cfg.top_b:
            raise ValueError(
                f"every object needs >= top_b={cfg.top_b} poses, got {n_p}"
            )
    z = np.clip(np.asarray(z0, dtype=np.float64).copy(), z_lo, z_hi)
    state = OptState(
        converged=[False] * n_obj,
        best_pose=[None] * n_obj,
        patience=[0] * n_obj,
        prev_best=[frozenset()] * n_obj,
        z=z,
    )
    stable_count = 0
    prev_best_sum = None

    for t in range(1, cfg.max_iters + 1):
        state.iteration = t
        l_total = 0.0
        grad_total = np.zeros_like(z)
        best_losses = []
        for i in range(n_obj):
            losses = np.empty(n_poses_per_object[i])
            grads = []
            for p in range(n_poses_per_object[i]):
                losses[p], g = loss_fn(i, p, z)
                grads.append(g)
            pi = np.argsort(losses, kind="stable")
            if not state.converged[i]:
                top = frozenset(int(j) for j in pi[:cfg.top_b])
                if top == state.prev_best[i]:
                    state.patience[i] += 1
                else:
                    state.patience[i] = 0
                if state.patience[i] >= cfg.patience:
                    state.converged[i] = True
                    state.best_pose[i] = int(pi[0])
            if state.converged[i]:
                l_total += losses[pi[0]]
                grad_total += grads[pi[0]]
            else:
                for j in pi[:cfg.top_b]:
                    l_total += losses[j]
                    grad_total += grads[j]
                state.prev_best[i] = frozenset(int(j) for j in pi[:cfg.top_b])
            best_losses.append(float(losses[pi[0]]))

        z_new = np.clip(z - cfg.alpha * grad_total, z_lo, z_hi)
        state.history.append({
            "iteration": t,
            "l_total": float(l_total),
            "best_losses": best_losses,
            "grad_norm": float(np.linalg.norm(grad_total)),
            "n_converged": int(sum(state.converged)),
        })
        z[:] = z_new
        if all(state.converged):
            best_sum = sum(best_losses)
            if prev_best_sum is not None and abs(best_sum - prev_best_sum) \
                    <= cfg.stable_tol * max(abs(prev_best_sum), 1e-12):
                stable_count += 1
            else:
                stable_count = 0
            prev_best_sum = best_sum
            if stable_count >= cfg.stable_iters:
                break
    for i in range(n_obj):
        if state.best_pose[i] is None:
            # never converged by patience: report the current argmin
            losses = [loss_fn(i, p, z)[0]
                      for p in range(n_poses_per_object[i])]
            state.best_pose[i] = int(np.argmin(losses))
    return state


def joint_optimize_surrogate(model: SurrogateModel,
                             pose_sets: list[list[PoseCandidate]],
                             k0: np.ndarray,
                             cfg: CodesignConfig) -> tuple[np.ndarray,
                                                           list[int],
                                                           OptState]:
    obj = SurrogateObjective(model, pose_sets, cfg.w1, cfg.w2)
    z_lo, z_hi = obj.z_bounds()
    state = joint_optimize(obj, [len(s) for s in pose_sets],
                           obj.z_from_k(np.asarray(k0)), z_lo, z_hi, cfg)
    return obj.k_from_z(state.z), list(state.best_pose), state


def individual_optimize(model: SurrogateModel,
                        candidates: list[PoseCandidate], k0: np.ndarray,
                        cfg: CodesignConfig):
    """joint_optimize restricted to a single object group."""
    return joint_optimize_surrogate(model, [candidates], k0, cfg)


def select_pose(model: SurrogateModel, candidates: list[PoseCandidate],
                k_fixed: np.ndarray, w1: float = 1.0,
                w2: float = 10.0) -> int:
    """argmin of the grasp objective under a fixed design; ties go to
    the lowest candidate index."""
    if not candidates:
        raise ValueError("empty candidate list")
    losses = []
    for c in candidates:
        pred = model.predict(c.cloud, c.com, c.density, k_fixed, c.pose)
        losses.append(l_opt(pred, w1, w2))
    return int(np.argmin(losses))


def history_to_csv(state: OptState, path) -> None:
    with open(path, "w", newline="") as fh:
        n_obj = len(state.best_pose)
        w = csv.writer(fh)
        w.writerow(["iteration", "l_total", "grad_norm", "n_converged"]
                   + [f"best_loss_{i}" for i in range(n_obj)])
        for row in state.history:
            w.writerow([row["iteration"], row["l_total"], row["grad_norm"],
                        row["n_converged"]] + row["best_losses"])


def result_to_json(k_star: np.ndarray, best_poses: list[int],
                   pose_sets: list[list[PoseCandidate]], path) -> None:
    data = {
        "k_star": k_star.tolist(),
        "best_pose_index": best_poses,
        "best_pose": [
            pose_sets[i][b].pose.tolist() for i, b in enumerate(best_poses)
        ],
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1)
