"""Differentiable grasp-outcome surrogate.

A 3-layer shared-weight point encoder with max-pool aggregation feeds a
5-layer MLP head together with the object center of mass, density, the
22 log-stiffness values and the 8-vector grasp pose.  The 10 outputs
are the ending body wrench (6), the relative displacement (3) and the
ground-contact score (1).  All activations are tanh so gradients stay
smooth for finite-difference checks and for the stiffness optimizer;
reverse-mode derivatives are hand-written for this fixed architecture.

Inputs and targets are standardized with constants fitted on the
training split; stiffness enters in log scale.  A freshly constructed
model carries identity normalization.
"""

from dataclasses import dataclass, field

import numpy as np

POINT_FEAT = 64
HEAD_WIDTH = 128
N_OUTPUT = 10
N_STIFF = 22
N_POSE = 8
EXTRA_DIM = 3 + 1 + N_STIFF + N_POSE  # com, density, log-k, pose
HEAD_IN = POINT_FEAT + EXTRA_DIM


def _init_layer(rng, n_in, n_out):
    lim = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-lim, lim, size=(n_in, n_out)), np.zeros(n_out)


@dataclass
class Normalization:
    """Per-feature standardization constants (identity until fitted)."""

    cloud_mean: np.ndarray = field(default_factory=lambda: np.zeros(3))
    cloud_scale: np.ndarray = field(default_factory=lambda: np.ones(3))
    extra_mean: np.ndarray = field(
        default_factory=lambda: np.zeros(EXTRA_DIM))
    extra_scale: np.ndarray = field(
        default_factory=lambda: np.ones(EXTRA_DIM))
    target_mean: np.ndarray = field(
        default_factory=lambda: np.zeros(N_OUTPUT))
    target_scale: np.ndarray = field(
        default_factory=lambda: np.ones(N_OUTPUT))

    def validate(self):
        for name in ("cloud_scale", "extra_scale", "target_scale"):
            arr = getattr(self, name)
            if not np.isfinite(arr).all() or (arr <= 0).any():
                raise ValueError(f"{name} must be finite and positive")


class SurrogateModel:
    """Fixed-architecture network with hand-written backprop."""

    def __init__(self, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.enc_w = []
        self.enc_b = []
        dims = [3, POINT_FEAT, POINT_FEAT, POINT_FEAT]
        for i in range(3):
            w, b = _init_layer(rng, dims[i], dims[i + 1])
            self.enc_w.append(w)
            self.enc_b.append(b)
        self.head_w = []
        self.head_b = []
        dims = [HEAD_IN, HEAD_WIDTH, HEAD_WIDTH, HEAD_WIDTH, HEAD_WIDTH,
                N_OUTPUT]
        for i in range(5):
            w, b = _init_layer(rng, dims[i], dims[i + 1])
            self.head_w.append(w)
            self.head_b.append(b)
        self.norm = Normalization()

    # -- parameter plumbing --------------------------------------------------

    def parameters(self) -> list[np.ndarray]:
        return self.enc_w + self.enc_b + self.head_w + self.head_b

    def set_parameters(self, params: list[np.ndarray]) -> None:
        n_enc = len(self.enc_w)
        n_head = len(self.head_w)
        self.enc_w = [p.copy() for p in params[:n_enc]]
        self.enc_b = [p.copy() for p in params[n_enc:2 * n_enc]]
        self.head_w = [p.copy() for p in params[2 * n_enc:2 * n_enc + n_head]]
        self.head_b = [p.copy() for p in params[2 * n_enc + n_head:]]

    def zero_like_grads(self) -> list[np.ndarray]:
        return [np.zeros_like(p) for p in self.parameters()]

    # -- input assembly -------------------------------------------------------

    def normalize_inputs(self, cloud, com, density, k, pose):
        """Standardize a batch; k enters in natural log."""
        cloud = np.asarray(cloud, dtype=np.float64)
        if cloud.ndim == 2:
            cloud = cloud[None]
        b = cloud.shape[0]
        com = np.asarray(com, dtype=np.float64).reshape(b, 3)
        density = np.asarray(density, dtype=np.float64).reshape(b, 1)
        k = np.asarray(k, dtype=np.float64).reshape(b, N_STIFF)
        pose = np.asarray(pose, dtype=np.float64).reshape(b, N_POSE)
        extra = np.concatenate([com, density, np.log(k), pose], axis=1)
        cloud_n = (cloud - self.norm.cloud_mean) / self.norm.cloud_scale
        extra_n = (extra - self.norm.extra_mean) / self.norm.extra_scale
        return cloud_n, extra_n

    # -- forward / backward ---------------------------------------------------

    def forward_normalized(self, cloud_n, extra_n, want_cache=False):
        """Outputs in normalized target space for standardized inputs."""
        cache = {"cloud_n": cloud_n, "extra_n": extra_n, "acts": []}
        h = cloud_n
        for w, bia in zip(self.enc_w, self.enc_b):
            z = h @ w + bia
            h = np.tanh(z)
            cache["acts"].append(h)
        pool_idx = h.argmax(axis=1)
        feat = np.take_along_axis(h, pool_idx[:, None, :], axis=1)[:, 0, :]
        cache["pool_idx"] = pool_idx
        x = np.concatenate([feat, extra_n], axis=1)
        cache["head_in"] = x
        cache["head_acts"] = []
        for i, (w, bia) in enumerate(zip(self.head_w, self.head_b)):
            z = x @ w + bia
            x = z if i == len(self.head_w) - 1 else np.tanh(z)
            cache["head_acts"].append(x)
        if want_cache:
            return x, cache
        return x

    def backward(self, cache, d_out):
        """Gradients of a scalar loss given d(loss)/d(normalized output).

        Returns (param_grads ordered like parameters(), d_extra_n) where
        d_extra_n is the gradient with respect to the standardized extra
        feature block (com, density, log-k, pose).
        """
        g_enc_w = [np.zeros_like(w) for w in self.enc_w]
        g_enc_b = [np.zeros_like(b) for b in self.enc_b]
        g_head_w = [np.zeros_like(w) for w in self.head_w]
        g_head_b = [np.zeros_like(b) for b in self.head_b]

        grad = d_out
        for i in range(len(self.head_w) - 1, -1, -1):
            x_in = cache["head_in"] if i == 0 else cache["head_acts"][i - 1]
            if i != len(self.head_w) - 1:
                grad = grad * (1.0 - cache["head_acts"][i] ** 2)
            g_head_w[i] += x_in.T @ grad
            g_head_b[i] += grad.sum(axis=0)
            grad = grad @ self.head_w[i].T

        d_feat = grad[:, :POINT_FEAT]
        d_extra_n = grad[:, POINT_FEAT:]

        # un-pool: route feature grads to the argmax points
        h_last = cache["acts"][-1]
        d_h = np.zeros_like(h_last)
        b_idx = np.arange(h_last.shape[0])[:, None]
        f_idx = np.arange(POINT_FEAT)[None, :]
        d_h[b_idx, cache["pool_idx"], f_idx] = d_feat

        grad = d_h
        for i in range(len(self.enc_w) - 1, -1, -1):
            grad = grad * (1.0 - cache["acts"][i] ** 2)
            x_in = cache["cloud_n"] if i == 0 else cache["acts"][i - 1]
            g_enc_w[i] += np.einsum("bni,bnj->ij", x_in, grad)
            g_enc_b[i] += grad.sum(axis=(0, 1))
            grad = grad @ self.enc_w[i].T

        return g_enc_w + g_enc_b + g_head_w + g_head_b, d_extra_n

    # -- user-facing prediction ------------------------------------------------

    def predict(self, cloud, com, density, k, pose):
        """Physical-scale prediction (wrench 6, dq 3, ground score 1)."""
        cloud_n, extra_n = self.normalize_inputs(cloud, com, density, k, pose)
        y = self.forward_normalized(cloud_n, extra_n)
        out = y * self.norm.target_scale + self.norm.target_mean
        return out if np.ndim(cloud) == 3 else out[0]

    def fit_normalization(self, clouds, coms, densities, ks, poses,
                          targets) -> None:
        extra = np.concatenate([
            np.asarray(coms, dtype=np.float64),
            np.asarray(densities, dtype=np.float64).reshape(-1, 1),
            np.log(np.asarray(ks, dtype=np.float64)),
            np.asarray(poses, dtype=np.float64),
        ], axis=1)
        pts = np.asarray(clouds, dtype=np.float64).reshape(-1, 3)
        self.norm.cloud_mean = pts.mean(axis=0)
        self.norm.cloud_scale = np.maximum(pts.std(axis=0), 1e-6)
        self.norm.extra_mean = extra.mean(axis=0)
        self.norm.extra_scale = np.maximum(extra.std(axis=0), 1e-6)
        t = np.asarray(targets, dtype=np.float64)
        self.norm.target_mean = t.mean(axis=0)
        self.norm.target_scale = np.maximum(t.std(axis=0), 1e-6)
        self.norm.validate()


def opt_loss_and_grad(pred_phys: np.ndarray, w1: float, w2: float):
    """Grasp-quality objective on a physical prediction and its gradient.

    w1 (|f| + |dq|) + w2 (|min f_y, 0| + |min dq_y, 0| + |min c_g, 0|);
    smaller is a steadier grasp prediction.
    """
    f = pred_phys[:6]
    dq = pred_phys[6:9]
    cg = pred_phys[9]
    nf = np.linalg.norm(f)
    ndq = np.linalg.norm(dq)
    loss = w1 * (nf + ndq)
    loss += w2 * (abs(min(f[1], 0.0)) + abs(min(dq[1], 0.0))
                  + abs(min(cg, 0.0)))
    grad = np.zeros(N_OUTPUT)
    if nf > 0:
        grad[:6] += w1 * f / nf
    if ndq > 0:
        grad[6:9] += w1 * dq / ndq
    if f[1] < 0:
        grad[1] += -w2
    if dq[1] < 0:
        grad[7] += -w2
    if cg < 0:
        grad[9] += -w2
    return float(loss), grad


def grad_wrt_stiffness(model: SurrogateModel, cloud, com, density, k, pose,
                       w1: float = 1.0, w2: float = 10.0,
                       log_space: bool = True):
    """Exact reverse-mode gradient of the grasp objective w.r.t. the 22
    stiffness inputs (in standardized log coordinates by default, or
    raw pascals)."""
    cloud_n, extra_n = model.normalize_inputs(cloud, com, density, k, pose)
    y, cache = model.forward_normalized(cloud_n, extra_n, want_cache=True)
    pred = y[0] * model.norm.target_scale + model.norm.target_mean
    loss, d_pred = opt_loss_and_grad(pred, w1, w2)
    d_y = (d_pred * model.norm.target_scale)[None, :]
    _, d_extra_n = model.backward(cache, d_y)
    d_logk_n = d_extra_n[0, 4:4 + N_STIFF]
    if log_space:
        return loss, d_logk_n
    scale = model.norm.extra_scale[4:4 + N_STIFF]
    return loss, d_logk_n / (scale * np.asarray(k, dtype=np.float64))
