import math

import numpy as np
import pytest

from alsim.adapt import (
    LinearProbe,
    PrototypeModel,
    TrainConfig,
    loss_and_grad,
    predict_proba,
    train,
)
from alsim.core import l2_normalize
from alsim.errors import InvalidInputError, InvalidLabelError, ShapeError


def random_probe_instance(rng):
    k = int(rng.integers(2, 6))
    d = int(rng.integers(2, 8))
    n = int(rng.integers(1, 9))
    model = LinearProbe(rng.normal(size=(k, d)), rng.normal(size=k))
    x = rng.normal(size=(n, d))
    y = rng.integers(0, k, size=n)
    return model, x, y


def random_prototype_instance(rng):
    k = int(rng.integers(2, 6))
    d = int(rng.integers(2, 8))
    n = int(rng.integers(1, 9))
    model = PrototypeModel(l2_normalize(rng.normal(size=(k, d))), float(rng.uniform(0.03, 0.5)))
    x = l2_normalize(rng.normal(size=(n, d)))
    y = rng.integers(0, k, size=n)
    return model, x, y


def guarded_relative_error(fd, analytic):
    """Max-norm relative error with a small scale floor, so an (analytically
    and numerically) zero gradient compares absolutely instead of 0/0."""
    scale = max(np.abs(fd).max(), np.abs(analytic).max(), 1e-6)
    return np.abs(fd - analytic).max() / scale


def fd_gradient(build_loss, theta, h=1e-5):
    """Central finite differences of a scalar function of a flat vector."""
    grad = np.zeros_like(theta)
    for i in range(len(theta)):
        up = theta.copy()
        up[i] += h
        down = theta.copy()
        down[i] -= h
        grad[i] = (build_loss(up) - build_loss(down)) / (2 * h)
    return grad


class TestPredictProba:
    def test_zero_probe_is_uniform(self):
        model = LinearProbe.zeros(4, 3)
        proba = predict_proba(model, np.random.default_rng(0).normal(size=(5, 3)))
        np.testing.assert_allclose(proba, np.full((5, 4), 0.25), atol=1e-12)

    def test_prototype_logits_cos_over_t(self):
        P = np.eye(4)
        model = PrototypeModel(P, 0.07)
        logits = model.logits(P[2][None, :])
        np.testing.assert_allclose(logits, [[0.0, 0.0, 1.0 / 0.07, 0.0]], atol=1e-12)
        assert abs(logits[0, 2] - 14.285714285714286) < 1e-12

    def test_softmax_of_ten_zero(self):
        model = LinearProbe(np.array([[10.0], [0.0]]), np.zeros(2))
        proba = predict_proba(model, np.array([[1.0]]))
        expected0 = 1.0 / (1.0 + math.exp(-10.0))
        np.testing.assert_allclose(proba, [[expected0, 1.0 - expected0]], rtol=1e-12)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            model, x, _ = random_probe_instance(rng)
            proba = predict_proba(model, x * rng.uniform(0.1, 50))
            assert np.abs(proba.sum(axis=1) - 1.0).max() < 1e-9

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            predict_proba(LinearProbe.zeros(2, 3), np.zeros((1, 4)))

    def test_pseudo_label_invariant_to_temperature(self):
        rng = np.random.default_rng(11)
        P = l2_normalize(rng.normal(size=(5, 6)))
        x = l2_normalize(rng.normal(size=(40, 6)))
        base = np.argmax(predict_proba(PrototypeModel(P, 0.07), x), axis=1)
        for t in (1e-3, 0.5, 7.0, 123.0):
            other = np.argmax(predict_proba(PrototypeModel(P, t), x), axis=1)
            np.testing.assert_array_equal(base, other)


class TestLossAndGrad:
    def test_zero_gradient_at_optimum(self):
        # huge correct logits make p equal to onehot(y) at float precision
        W = np.array([[100.0, 0.0], [0.0, 100.0]])
        model = LinearProbe(W, np.zeros(2))
        x = np.eye(2)
        y = np.array([0, 1])
        loss, grads = loss_and_grad(model, x, y)
        assert loss < 1e-12
        assert np.abs(grads["W"]).max() < 1e-12
        assert np.abs(grads["b"]).max() < 1e-12

    def test_hand_computed_closed_form(self):
        # logits chosen so softmax gives exactly (0.7, 0.3)
        logit_gap = math.log(0.7 / 0.3)
        model = LinearProbe(np.array([[logit_gap, 0.0], [0.0, 0.0]]), np.zeros(2))
        x = np.array([[1.0, 0.0]])
        loss, grads = loss_and_grad(model, x, np.array([0]))
        np.testing.assert_allclose(grads["W"], [[-0.3, 0.0], [0.3, 0.0]], atol=1e-12)
        np.testing.assert_allclose(loss, -math.log(0.7), atol=1e-12)

    def test_label_out_of_range(self):
        with pytest.raises(InvalidLabelError):
            loss_and_grad(LinearProbe.zeros(2, 2), np.eye(2), np.array([0, 2]))

    def test_probe_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(99)
        for _ in range(500):
            model, x, y = random_probe_instance(rng)
            k, d = model.W.shape
            _, grads = loss_and_grad(model, x, y)
            theta = np.concatenate([model.W.ravel(), model.b])

            def loss_of(vec):
                return loss_and_grad(LinearProbe(vec[: k * d].reshape(k, d), vec[k * d :]), x, y)[0]

            fd = fd_gradient(loss_of, theta)
            analytic = np.concatenate([grads["W"].ravel(), grads["b"]])
            assert guarded_relative_error(fd, analytic) <= 1e-4

    def test_prototype_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(100)
        for _ in range(500):
            model, x, y = random_prototype_instance(rng)
            k, d = model.P.shape
            _, grads = loss_and_grad(model, x, y)
            theta = np.concatenate([model.P.ravel(), [model.temperature]])

            def loss_of(vec):
                proto = _free_prototype(vec[: k * d].reshape(k, d), vec[-1])
                return loss_and_grad(proto, x, y)[0]

            fd = fd_gradient(loss_of, theta)
            analytic = np.concatenate([grads["P"].ravel(), [grads["t"]]])
            assert guarded_relative_error(fd, analytic) <= 1e-4


def _free_prototype(P, t):
    """PrototypeModel with the unit-norm constructor check bypassed, for
    finite-difference probes of the free-parameter loss."""
    model = object.__new__(PrototypeModel)
    object.__setattr__(model, "P", np.asarray(P, dtype=np.float64))
    object.__setattr__(model, "temperature", float(t))
    return model


class TestTrain:
    def separable(self):
        x = np.array([[1.0, 0.0], [-1.0, 0.0], [1.0, 0.0], [-1.0, 0.0]])
        y = np.array([0, 1, 0, 1])
        return x, y

    def test_zero_epochs_identity(self):
        model = LinearProbe(np.arange(6.0).reshape(2, 3), np.array([1.0, -1.0]))
        out = train(model, np.zeros((1, 3)), np.array([0]), TrainConfig(epochs=0, seed=1))
        assert np.array_equal(out.W, model.W) and np.array_equal(out.b, model.b)
        proto = PrototypeModel(np.eye(3), 0.07)
        out = train(proto, l2_normalize(np.ones((1, 3))), np.array([0]), TrainConfig(epochs=0))
        assert np.array_equal(out.P, proto.P) and out.temperature == proto.temperature

    def test_separable_reaches_perfect_train_accuracy(self):
        x, y = self.separable()
        model = train(LinearProbe.zeros(2, 2), x, y, TrainConfig(epochs=50, seed=5))
        assert np.array_equal(np.argmax(predict_proba(model, x), axis=1), y)
        proto0 = PrototypeModel.from_class_means(x, y, 2)
        proto = train(proto0, x, y, TrainConfig(epochs=50, seed=5))
        assert np.array_equal(np.argmax(predict_proba(proto, x), axis=1), y)

    def test_bit_identical_given_seed(self):
        rng = np.random.default_rng(8)
        x = l2_normalize(rng.normal(size=(40, 6)))
        y = rng.integers(0, 3, size=40)
        cfg = TrainConfig(epochs=7, batch_size=8, seed=321)
        a = train(LinearProbe.zeros(3, 6), x, y, cfg)
        b = train(LinearProbe.zeros(3, 6), x, y, cfg)
        assert np.array_equal(a.W, b.W) and np.array_equal(a.b, b.b)
        pa = train(PrototypeModel.from_class_means(x, y, 3), x, y, cfg)
        pb = train(PrototypeModel.from_class_means(x, y, 3), x, y, cfg)
        assert np.array_equal(pa.P, pb.P) and pa.temperature == pb.temperature

    def test_empty_training_set_rejected(self):
        with pytest.raises(InvalidInputError):
            train(LinearProbe.zeros(2, 2), np.zeros((0, 2)), np.zeros(0, dtype=int), TrainConfig())

    def test_final_loss_not_above_initial_on_separable_data(self):
        for seed in range(20):
            rng = np.random.default_rng(1000 + seed)
            centers = np.array([[2.0, 0.0], [-2.0, 0.0]])
            x = np.vstack([centers[0] + 0.1 * rng.normal(size=(12, 2)),
                           centers[1] + 0.1 * rng.normal(size=(12, 2))])
            y = np.repeat([0, 1], 12)
            model = LinearProbe.zeros(2, 2)
            initial_loss, _ = loss_and_grad(model, x, y)
            trained = train(model, x, y, TrainConfig(epochs=50, seed=seed))
            final_loss, _ = loss_and_grad(trained, x, y)
            assert final_loss < initial_loss

    def test_temperature_stays_positive(self):
        rng = np.random.default_rng(77)
        x = l2_normalize(rng.normal(size=(30, 4)))
        y = rng.integers(0, 3, size=30)
        model = PrototypeModel.from_class_means(x, y, 3)
        for epochs in (1, 10, 80):
            out = train(model, x, y, TrainConfig(epochs=epochs, lr_temperature=0.5, seed=epochs))
            assert out.temperature > 0

    def test_prototype_rows_stay_unit(self):
        rng = np.random.default_rng(78)
        x = l2_normalize(rng.normal(size=(30, 4)))
        y = rng.integers(0, 3, size=30)
        out = train(PrototypeModel.from_class_means(x, y, 3), x, y,
                    TrainConfig(epochs=20, lr_head=0.05, seed=2))
        assert np.abs(np.linalg.norm(out.P, axis=1) - 1.0).max() < 1e-6

    def test_sample_weight_shifts_solution(self):
        x = np.array([[1.0, 0.0], [-1.0, 0.0]])
        y = np.array([0, 1])
        cfg = TrainConfig(epochs=5, seed=3)
        plain = train(LinearProbe.zeros(2, 2), x, y, cfg)
        weighted = train(LinearProbe.zeros(2, 2), x, y, cfg, sample_weight=np.array([10.0, 0.1]))
        assert not np.array_equal(plain.W, weighted.W)
