import math

import numpy as np
import pytest

from balcor import classifier as clf
from balcor.classifier import (
    ClassifierHead,
    TrainConfig,
    class_weight_vector,
    fit,
    init_head,
    load_model,
    loss_and_grad,
    predict,
    predict_proba,
    predict_proba_batch,
    save_model,
    weighted_loss,
    write_predictions,
    read_predictions,
)
from balcor.encoders import CallableEncoder, HashingEncoder, encode, encode_batch
from balcor.errors import (
    BackendFailure,
    DimensionMismatch,
    DivergedLoss,
    EmptyDataset,
    LengthMismatch,
)

LOG2 = math.log(2.0)  # 0.6931471805599453, computed independently of numpy


class TestEncode:
    def test_empty_string_zero_vector(self):
        enc = HashingEncoder(32)
        assert np.array_equal(encode(enc, ""), np.zeros(32))

    def test_deterministic(self):
        enc = HashingEncoder(64)
        text = "Tested positive this morning \U0001f637"
        assert np.array_equal(encode(enc, text), encode(enc, text))

    def test_dim(self):
        enc = HashingEncoder(64)
        assert encode(enc, "some words here").shape == (64,)

    def test_unit_norm(self):
        enc = HashingEncoder(128)
        v = encode(enc, "a few distinct words")
        assert abs(np.linalg.norm(v) - 1.0) < 1e-12

    def test_backend_failure_wrapped(self):
        bad = CallableEncoder(lambda t: np.ones(3), dim=5, identifier="bad")
        with pytest.raises(BackendFailure):
            encode(bad, "x")
        nan = CallableEncoder(lambda t: np.array([np.nan, 0.0]), dim=2, identifier="nan")
        with pytest.raises(BackendFailure):
            encode(nan, "x")


class TestPredict:
    def test_zero_head_uniform(self):
        head = ClassifierHead(np.zeros((3, 4)), np.zeros(3))
        p = predict_proba(head, np.ones(4))
        assert np.allclose(p, [1 / 3] * 3, atol=1e-12)

    def test_bias_dominates(self):
        head = ClassifierHead(np.zeros((2, 4)), np.array([0.0, 10.0]))
        p = predict_proba(head, np.zeros(4))
        # direct softmax evaluation: 1 / (1 + e^-10)
        assert p[1] > 0.9999
        assert abs(p[1] - 1.0 / (1.0 + math.exp(-10.0))) < 1e-12

    def test_simplex(self):
        rng = np.random.default_rng(1)
        head = ClassifierHead(rng.normal(size=(4, 8)), rng.normal(size=4))
        for _ in range(50):
            p = predict_proba(head, rng.normal(size=8))
            assert abs(p.sum() - 1.0) < 1e-9
            assert np.all(p >= 0)

    def test_argmax_and_ties(self):
        head = ClassifierHead(np.zeros((2, 2)), np.zeros(2))
        assert predict(head, np.zeros(2)) == 0  # exact tie -> lowest index
        head = ClassifierHead(np.zeros((3, 2)), np.array([0.0, 1.0, 0.5]))
        assert predict(head, np.zeros(2)) == 1

    def test_shift_invariance(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            w = rng.normal(size=(3, 5))
            b = rng.normal(size=3)
            e = rng.normal(size=5)
            base = predict(ClassifierHead(w, b), e)
            shifted = predict(ClassifierHead(w, b + 7.5), e)
            assert base == shifted

    def test_dimension_mismatch(self):
        head = ClassifierHead(np.zeros((2, 4)), np.zeros(2))
        with pytest.raises(DimensionMismatch):
            predict_proba(head, np.zeros(5))


class TestWeightedLoss:
    def test_spot_values(self):
        # frozen by direct evaluation of the weighted binary cross-entropy
        assert abs(weighted_loss([1], [0.5], 1.0) - LOG2) < 1e-6
        assert abs(weighted_loss([1], [0.5], 0.1) - 0.1 * LOG2) < 1e-6
        for lam in (0.1, 1.0, 10.0):
            assert abs(weighted_loss([0], [0.5], lam) - LOG2) < 1e-6

    def test_lambda_one_equals_plain_ce(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            n = rng.integers(1, 20)
            y = rng.integers(0, 2, size=n)
            p = rng.uniform(0.01, 0.99, size=n)
            ours = weighted_loss(y, p, 1.0)
            plain = -np.mean(y * np.log(p) + (1 - y) * np.log(1 - p))
            assert abs(ours - plain) < 1e-12

    def test_binary_paths_agree(self):
        rng = np.random.default_rng(4)
        y = rng.integers(0, 2, size=50)
        p1 = rng.uniform(0.01, 0.99, size=50)
        two_col = np.stack([1 - p1, p1], axis=1)
        for lam in (0.1, 1.0, 3.0):
            assert abs(weighted_loss(y, p1, lam)
                       - weighted_loss(y, two_col, lam)) < 1e-12

    def test_multiclass_weight_vector(self):
        p = np.array([[0.2, 0.5, 0.3]])
        base = weighted_loss([1], p, 1.0)
        doubled = weighted_loss([1], p, 2.0)
        assert abs(doubled - 2 * base) < 1e-12
        custom = weighted_loss([2], p, 1.0, class_weights=[1.0, 1.0, 4.0])
        assert abs(custom - 4 * -math.log(0.3)) < 1e-9

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            weighted_loss([1, 0], [0.5])


def finite_difference_grads(head, E, y, weights, step=1e-5):
    """Central differences on every head parameter."""
    def eval_loss(w_flat, b):
        h = ClassifierHead(w_flat.reshape(head.weights.shape), b)
        return weighted_loss(y, predict_proba_batch(h, E), class_weights=weights)

    w0 = head.weights.ravel().copy()
    b0 = head.bias.copy()
    d_w = np.zeros_like(w0)
    for i in range(w0.size):
        up, down = w0.copy(), w0.copy()
        up[i] += step
        down[i] -= step
        d_w[i] = (eval_loss(up, b0) - eval_loss(down, b0)) / (2 * step)
    d_b = np.zeros_like(b0)
    for i in range(b0.size):
        up, down = b0.copy(), b0.copy()
        up[i] += step
        down[i] -= step
        d_b[i] = (eval_loss(w0, up) - eval_loss(w0, down)) / (2 * step)
    return d_w.reshape(head.weights.shape), d_b


class TestGradient:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        for case in range(20):
            k = int(rng.integers(2, 4))
            d = int(rng.integers(2, 6))
            n = int(rng.integers(1, 6))
            head = ClassifierHead(rng.normal(0, 0.5, size=(k, d)),
                                  rng.normal(0, 0.5, size=k))
            E = rng.normal(size=(n, d))
            y = rng.integers(0, k, size=n)
            weights = np.ones(k)
            weights[rng.integers(0, k)] = rng.uniform(0.1, 10.0)
            _, g_w, g_b = loss_and_grad(head, E, y, weights)
            fd_w, fd_b = finite_difference_grads(head, E, y, weights)
            denom = max(np.abs(fd_w).max(), np.abs(fd_b).max(), 1e-8)
            assert np.abs(g_w - fd_w).max() / denom < 1e-4
            assert np.abs(g_b - fd_b).max() / denom < 1e-4


def keyword_dataset(make_dataset, task, n_each=100, seed=0, prefix="kw"):
    rng = np.random.default_rng(seed)
    filler = ["walk", "park", "coffee", "rain", "bus", "movie", "lunch", "call"]
    triples = []
    for i in range(n_each):
        words = rng.choice(filler, size=8).tolist()
        triples.append((f"{prefix}n{i}", " ".join(words), 0))
        words = rng.choice(filler, size=6).tolist() + ["tested", "positive"]
        triples.append((f"{prefix}p{i}", " ".join(words), 1))
    return make_dataset(task, triples, split="train")


class TestFit:
    def test_zero_epochs_is_init(self, make_dataset, binary_task):
        ds = keyword_dataset(make_dataset, binary_task, n_each=10)
        enc = HashingEncoder(32)
        config = TrainConfig(epochs=0, seed=42)
        result = fit(enc, ds, config)
        expected = init_head(2, 32, 42)
        assert np.array_equal(result.head.weights, expected.weights)
        assert np.array_equal(result.head.bias, expected.bias)
        assert result.epoch_losses == []

    def test_loss_decreases_on_separable(self, make_dataset, binary_task):
        ds = keyword_dataset(make_dataset, binary_task, n_each=100)
        enc = HashingEncoder(128)
        config = TrainConfig(learning_rate=0.05, epochs=6, seed=1, lambda_weight=1.0)
        result = fit(enc, ds, config)
        assert len(result.epoch_losses) == 6
        assert result.epoch_losses[-1] < result.epoch_losses[0]

    def test_bit_identical_per_seed(self, make_dataset, binary_task):
        ds = keyword_dataset(make_dataset, binary_task, n_each=30)
        enc = HashingEncoder(64)
        config = TrainConfig(learning_rate=0.05, epochs=3, seed=9)
        a = fit(enc, ds, config)
        b = fit(enc, ds, config)
        assert np.array_equal(a.head.weights, b.head.weights)
        assert np.array_equal(a.head.bias, b.head.bias)
        assert a.epoch_losses == b.epoch_losses

    def test_empty_dataset(self, make_dataset, binary_task):
        ds = make_dataset(binary_task, [], split="train")
        with pytest.raises(EmptyDataset):
            fit(HashingEncoder(16), ds, TrainConfig())

    def test_diverged_loss(self, make_dataset, binary_task):
        ds = keyword_dataset(make_dataset, binary_task, n_each=20)
        config = TrainConfig(learning_rate=1e200, epochs=4, seed=1)
        with pytest.raises(DivergedLoss), np.errstate(all="ignore"):
            fit(HashingEncoder(32), ds, config)

    def test_class_weight_vector(self, binary_task, three_class_task):
        config = TrainConfig(lambda_weight=0.25)
        assert np.allclose(class_weight_vector(binary_task, config), [1.0, 0.25])
        # multi-class weighting stays off unless asked for
        assert np.allclose(class_weight_vector(three_class_task, config), [1, 1, 1])
        on = TrainConfig(lambda_weight=0.25, weight_multiclass=True)
        assert np.allclose(class_weight_vector(three_class_task, on), [1, 0.25, 1])


class TestCheckpoint:
    def test_round_trip(self, tmp_path, make_dataset, binary_task):
        ds = keyword_dataset(make_dataset, binary_task, n_each=15)
        enc = HashingEncoder(48)
        config = TrainConfig(learning_rate=0.05, epochs=2, seed=3)
        result = fit(enc, ds, config)
        path = tmp_path / "model.json"
        save_model(path, enc, result.head, binary_task, config)
        enc2, head2, task2, config2 = load_model(path)
        assert task2 == binary_task
        assert config2 == config
        assert np.array_equal(head2.weights, result.head.weights)
        E = encode_batch(enc, [e.text for e in ds])
        E2 = encode_batch(enc2, [e.text for e in ds])
        assert np.array_equal(E, E2)

    def test_predictions_file_round_trip(self, tmp_path):
        path = tmp_path / "preds.jsonl"
        write_predictions(path, ["a", "b"], [1, 0],
                          np.array([[0.2, 0.8], [0.9, 0.1]]))
        assert read_predictions(path) == {"a": 1, "b": 0}
