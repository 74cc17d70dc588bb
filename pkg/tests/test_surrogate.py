"""Surrogate network: forward composition, gradients, training, IO."""

import numpy as np
import pytest

from softgrip.datagen import DatasetRecord
from softgrip.surrogate import (
    SurrogateModel,
    TrainConfig,
    grad_wrt_stiffness,
    load_model,
    save_model,
    train,
)
from softgrip.surrogate.net import N_STIFF, opt_loss_and_grad


def _inputs(rng, n_pts=64):
    cloud = rng.normal(size=(n_pts, 3)) * 0.02
    com = rng.normal(size=3) * 0.01
    k = np.exp(rng.uniform(np.log(0.7e6), np.log(24e6), N_STIFF))
    pose = rng.normal(size=8) * 0.05
    return cloud, com, 8.0, k, pose


def _fitted_model(rng, seed=0):
    m = SurrogateModel(seed=seed)
    m.norm.cloud_mean = rng.normal(size=3) * 0.001
    m.norm.cloud_scale = 0.5 + rng.uniform(size=3)
    m.norm.extra_mean[:] = rng.normal(size=34) * 0.1
    m.norm.extra_mean[4:26] = np.log(4e6)
    m.norm.extra_scale[:] = 0.5 + rng.uniform(size=34)
    m.norm.target_mean[:] = rng.normal(size=10) * 0.1
    m.norm.target_scale[:] = 0.5 + rng.uniform(size=10)
    return m


class TestForward:
    def test_zero_weights_zero_output(self, rng):
        m = SurrogateModel(seed=0)
        m.set_parameters([np.zeros_like(p) for p in m.parameters()])
        out = m.predict(*_inputs(rng))
        assert np.array_equal(out, np.zeros(10))

    def test_permutation_invariance_exact(self, rng):
        m = SurrogateModel(seed=1)
        cloud, com, dens, k, pose = _inputs(rng, n_pts=128)
        y1 = m.predict(cloud, com, dens, k, pose)
        y2 = m.predict(cloud[rng.permutation(128)], com, dens, k, pose)
        assert np.array_equal(y1, y2)

    def test_deterministic(self, rng):
        m = SurrogateModel(seed=1)
        args = _inputs(rng)
        assert np.array_equal(m.predict(*args), m.predict(*args))

    def test_hand_computed_composition(self):
        # two-point cloud through hand-set weights; encoder collapses to
        # a known max, head composes affine+tanh transparently
        m = SurrogateModel(seed=0)
        params = [np.zeros_like(p) for p in m.parameters()]
        # encoder layer 0: first feature = x coordinate
        params[0][0, 0] = 1.0
        # layers 1, 2: pass feature 0 through
        params[1][0, 0] = 1.0
        params[2][0, 0] = 1.0
        # head: all layers pass feature 0 through to output 0
        for i in (6, 7, 8, 9):
            params[i][0, 0] = 1.0
        params[10][0, 0] = 1.0
        m.set_parameters(params)
        cloud = np.array([[0.3, 0, 0], [-0.2, 0, 0]])
        y = m.predict(cloud, np.zeros(3), 1.0, np.full(22, 1e6), np.zeros(8))
        t = np.tanh
        expected = t(t(t(t(t(t(t(0.3)))))))  # 3 encoder + 4 head tanh layers
        assert y[0] == pytest.approx(expected, abs=1e-15)
        assert np.allclose(y[1:], 0.0)

    def test_shape_mismatch_reported(self, rng):
        m = SurrogateModel(seed=0)
        with pytest.raises(ValueError):
            m.predict(rng.normal(size=(4, 3)), np.zeros(3), 1.0,
                      np.full(21, 1e6), np.zeros(8))


class TestGradients:
    def test_matches_central_differences(self, rng):
        m = _fitted_model(rng)
        eps = 1e-4
        worst = 0.0
        for trial in range(10):
            cloud, com, dens, k, pose = _inputs(rng)
            loss, g = grad_wrt_stiffness(m, cloud, com, dens, k, pose,
                                         1.0, 10.0, log_space=True)
            mean = m.norm.extra_mean[4:26]
            scale = m.norm.extra_scale[4:26]
            z = (np.log(k) - mean) / scale
            fd = np.zeros(N_STIFF)
            for i in range(N_STIFF):
                zp = z.copy()
                zp[i] += eps
                zm = z.copy()
                zm[i] -= eps
                lp, _ = grad_wrt_stiffness(m, cloud, com, dens,
                                           np.exp(zp * scale + mean), pose)
                lm, _ = grad_wrt_stiffness(m, cloud, com, dens,
                                           np.exp(zm * scale + mean), pose)
                fd[i] = (lp - lm) / (2 * eps)
            rel = np.abs(g - fd) / np.maximum(np.abs(fd), 1e-10)
            worst = max(worst, rel.max())
        assert worst <= 1e-4

    def test_constant_objective_zero_gradient(self, rng):
        m = _fitted_model(rng)
        cloud, com, dens, k, pose = _inputs(rng)
        _, g = grad_wrt_stiffness(m, cloud, com, dens, k, pose,
                                  w1=0.0, w2=0.0)
        assert np.array_equal(g, np.zeros(N_STIFF))

    def test_objective_scaling_scales_gradient(self, rng):
        m = _fitted_model(rng)
        cloud, com, dens, k, pose = _inputs(rng)
        l1, g1 = grad_wrt_stiffness(m, cloud, com, dens, k, pose, 1.0, 10.0)
        l3, g3 = grad_wrt_stiffness(m, cloud, com, dens, k, pose, 3.0, 30.0)
        assert l3 == pytest.approx(3 * l1, rel=1e-12)
        assert np.allclose(g3, 3 * g1, rtol=1e-12, atol=0)

    def test_opt_loss_arithmetic(self):
        pred = np.array([0, -2, 0, 0, 0, 0, 0, -0.01, 0, 0.0])
        loss, _ = opt_loss_and_grad(pred, 1.0, 10.0)
        assert loss == pytest.approx(1 * (2 + 0.01) + 10 * (2 + 0.01))

    def test_opt_loss_zero_prediction(self):
        loss, g = opt_loss_and_grad(np.zeros(10), 1.0, 10.0)
        assert loss == 0.0
        assert np.array_equal(g, np.zeros(10))

    def test_opt_loss_brute_force_recompute(self, rng):
        for _ in range(20):
            pred = rng.normal(size=10)
            w1, w2 = rng.uniform(0.1, 5, size=2)
            loss, _ = opt_loss_and_grad(pred, w1, w2)
            ref = w1 * (np.linalg.norm(pred[:6])
                        + np.linalg.norm(pred[6:9]))
            ref += w2 * (abs(min(pred[1], 0)) + abs(min(pred[7], 0))
                         + abs(min(pred[9], 0)))
            assert loss == pytest.approx(ref, rel=1e-12)


def _records(rng, n):
    out = []
    for i in range(n):
        k = np.exp(rng.uniform(np.log(0.7e6), np.log(24e6), 22))
        pose = rng.normal(size=8) * 0.05
        # targets correlated with inputs so learning is possible
        soft = np.tanh((np.log(k).mean() - np.log(4e6)))
        wrench = np.concatenate([[0.1 * soft, abs(soft), 0],
                                 rng.normal(size=3) * 0.01])
        out.append(DatasetRecord(
            object_id="o", density=8.0,
            cloud=rng.normal(size=(32, 3)) * 0.02,
            com=rng.normal(size=3) * 0.01, k=k, pose=pose,
            wrench=wrench, dq=np.array([0, -soft * 0.05, 0]),
            c_g=int(soft < 0),
        ))
    return out


class TestTraining:
    def test_memorizes_single_record(self, rng):
        recs = [_records(rng, 1)[0]] * 10
        m = SurrogateModel(seed=0)
        res = train(m, recs, TrainConfig(epochs=150, batch_size=4,
                                         val_fraction=0.2, seed=0))
        assert res.val_l1[-1] < 1e-3

    def test_loss_invariant_under_duplication(self, rng):
        recs = _records(rng, 40)
        m1 = SurrogateModel(seed=3)
        m1.fit_normalization(
            np.stack([r.cloud for r in recs]),
            np.stack([r.com for r in recs]),
            np.array([r.density for r in recs]),
            np.stack([r.k for r in recs]),
            np.stack([r.pose for r in recs]),
            np.stack([np.concatenate([r.wrench, r.dq, [r.c_g]])
                      for r in recs]),
        )

        def mean_l1(model, records):
            total = 0.0
            for r in records:
                y = model.predict(r.cloud, r.com, r.density, r.k, r.pose)
                t = np.concatenate([r.wrench, r.dq, [float(r.c_g)]])
                yn = (y - model.norm.target_mean) / model.norm.target_scale
                tn = (t - model.norm.target_mean) / model.norm.target_scale
                total += np.abs(yn - tn).mean()
            return total / len(records)

        assert mean_l1(m1, recs) == pytest.approx(mean_l1(m1, recs * 2))

    def test_training_reduces_validation_loss(self, rng):
        recs = _records(rng, 160)
        m = SurrogateModel(seed=0)
        res = train(m, recs, TrainConfig(epochs=60, batch_size=32, seed=0))
        assert res.val_l1[-1] < res.untrained_val_l1

    def test_deterministic_training(self, rng):
        recs = _records(rng, 50)
        weights = []
        for _ in range(2):
            m = SurrogateModel(seed=4)
            train(m, recs, TrainConfig(epochs=5, batch_size=16, seed=4))
            weights.append(np.concatenate(
                [p.ravel() for p in m.parameters()]))
        assert np.array_equal(weights[0], weights[1])

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            train(SurrogateModel(), [], TrainConfig())


class TestModelIO:
    def test_save_load_bit_exact(self, tmp_path, rng):
        m = _fitted_model(rng, seed=9)
        path = tmp_path / "model.bin"
        save_model(m, path)
        m2 = load_model(path)
        args = _inputs(rng)
        assert np.array_equal(m.predict(*args), m2.predict(*args))

    def test_magic_check(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTMODEL" + b"\x00" * 64)
        with pytest.raises(ValueError, match="not a surrogate"):
            load_model(path)
