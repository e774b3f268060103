import math

import numpy as np
import pytest

from augsel.classifier import (
    SoftmaxModel,
    TrainConfig,
    load_model,
    loss_and_gradient,
    predict_labels,
    predict_proba,
    save_model,
    train,
)
from augsel.embedio import EmbeddingSet, LabelVector
from augsel.errors import DomainError, FormatError, NumericError


def finite_difference_grad(model, x, y, l2, h=1e-5):
    grads = []
    for name in ("weights", "bias"):
        param = getattr(model, name)
        g = np.zeros_like(param)
        for idx in np.ndindex(param.shape):
            old = param[idx]
            param[idx] = old + h
            up = loss_and_gradient(model, x, y, l2)[0]
            param[idx] = old - h
            down = loss_and_gradient(model, x, y, l2)[0]
            param[idx] = old
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def max_rel_error(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))))


def random_instance(rng):
    k, d, n = int(rng.integers(2, 5)), int(rng.integers(1, 6)), int(rng.integers(1, 30))
    model = SoftmaxModel(rng.standard_normal((k, d)), rng.standard_normal(k))
    return model, rng.standard_normal((n, d)), rng.integers(0, k, n), float(rng.uniform(0, 0.1))


def test_gradient_matches_finite_differences(rng):
    for _ in range(25):
        model, x, y, l2 = random_instance(rng)
        _, grad = loss_and_gradient(model, x, y, l2)
        fw, fb = finite_difference_grad(model, x, y, l2)
        assert max_rel_error(grad.weights, fw) <= 1e-4
        assert max_rel_error(grad.bias, fb) <= 1e-4


def test_zero_model_loss_is_log_k(rng):
    loss, _ = loss_and_gradient(SoftmaxModel.zeros(4, 3), rng.standard_normal((7, 3)), rng.integers(0, 4, 7), 0.5)
    assert loss == pytest.approx(math.log(4), abs=1e-15)


def test_single_sample_converges():
    x, y = EmbeddingSet([[1.0, -2.0]]), LabelVector([2], 4)
    model = train(x, y, TrainConfig(epochs=200))
    assert predict_proba(model, x)[0, 2] > 0.9


def test_large_l2_gives_uniform_predictions(rng):
    x = EmbeddingSet(rng.standard_normal((20, 3)))
    y = LabelVector(np.arange(20) % 4)
    model = train(x, y, TrainConfig(learning_rate=0.01, epochs=200, l2=50.0))
    assert np.max(np.abs(model.weights)) < 1e-2
    assert np.allclose(predict_proba(model, x), 0.25, atol=1e-2)


def test_training_is_bitwise_deterministic(rng):
    x = EmbeddingSet(rng.standard_normal((50, 4)))
    y = LabelVector(rng.integers(0, 4, 50))
    a, b = train(x, y), train(x, y)
    assert a.weights.tobytes() == b.weights.tobytes() and a.bias.tobytes() == b.bias.tobytes()


def test_converged_separable_model_has_small_gradient():
    x = np.array([[-2.0], [-1.5], [1.5], [2.0]])
    y = LabelVector([0, 0, 1, 1], 2)
    cfg = TrainConfig(learning_rate=0.5, epochs=4000, l2=0.05)
    model = train(EmbeddingSet(x), y, cfg)
    _, grad = loss_and_gradient(model, x, y, cfg.l2)
    norm = math.sqrt(np.sum(grad.weights**2) + np.sum(grad.bias**2))
    assert norm < 1e-3
    assert predict_labels(model, x).labels.tolist() == [0, 0, 1, 1]


def test_descent_with_halved_learning_rate(rng):
    x = EmbeddingSet(rng.standard_normal((40, 3)) * 3)
    y = LabelVector(rng.integers(0, 4, 40))
    lr = 8.0
    while True:
        history = []
        train(x, y, TrainConfig(learning_rate=lr, epochs=60, l2=1e-3), history=history)
        if all(b <= a + 1e-15 for a, b in zip(history, history[1:])):
            break
        lr /= 2
        assert lr > 1e-6
    assert history[-1] < history[0]


def test_empty_training_set():
    with pytest.raises(DomainError):
        train(EmbeddingSet(np.zeros((0, 2))), LabelVector([], 4))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_raises_numeric_error():
    x = EmbeddingSet([[1e200, -1e200], [-1e200, 1e200]])
    with pytest.raises(NumericError):
        train(x, LabelVector([0, 1], 2), TrainConfig(learning_rate=1e10, epochs=5))


def test_predict_proba_zero_model():
    assert np.array_equal(predict_proba(SoftmaxModel.zeros(4, 2), np.ones((3, 2))), np.full((3, 4), 0.25))


def test_predict_proba_known_logits():
    model = SoftmaxModel(np.zeros((4, 1)), np.array([math.log(2), 0, 0, 0]))
    # direct evaluation: exp(logit) / sum = (2, 1, 1, 1) / 5
    assert predict_proba(model, [[0.0]])[0] == pytest.approx([0.4, 0.2, 0.2, 0.2], abs=1e-15)


def test_shift_invariance(rng):
    model = SoftmaxModel(rng.standard_normal((4, 3)), rng.standard_normal(4))
    x = rng.standard_normal((10, 3))
    shifted = SoftmaxModel(model.weights, model.bias + 123.0)
    assert np.allclose(predict_proba(model, x), predict_proba(shifted, x), atol=1e-12)


def test_probability_rows_valid(rng):
    model = SoftmaxModel(rng.standard_normal((5, 3)) * 30, rng.standard_normal(5))
    p = predict_proba(model, rng.standard_normal((100, 3)) * 30)
    assert np.all(p >= 0) and np.max(np.abs(p.sum(axis=1) - 1)) <= 1e-12


def test_predict_labels(rng):
    assert predict_labels(SoftmaxModel.zeros(4, 2), np.ones((3, 2))).labels.tolist() == [0, 0, 0]
    model = SoftmaxModel(np.zeros((3, 1)), np.array([0.0, 50.0, 0.0]))
    assert predict_labels(model, [[1.0]]).labels.tolist() == [1]
    model = SoftmaxModel(rng.standard_normal((4, 3)), rng.standard_normal(4))
    x = rng.standard_normal((200, 3))
    p = predict_proba(model, x)
    oracle = [max(range(4), key=lambda c: (row[c], -c)) for row in p]
    assert predict_labels(model, x).labels.tolist() == oracle


def test_dimension_mismatch():
    with pytest.raises(DomainError):
        predict_proba(SoftmaxModel.zeros(4, 2), np.ones((3, 5)))


def test_model_blob_round_trip(tmp_path, rng):
    model = SoftmaxModel(rng.standard_normal((4, 3)), rng.standard_normal(4))
    path = tmp_path / "m.amdl"
    save_model(model, path)
    data = path.read_bytes()
    assert data[:4] == b"AMDL" and len(data) == 14 + 8 * (12 + 4)
    back = load_model(path)
    assert np.array_equal(back.weights, model.weights) and np.array_equal(back.bias, model.bias)
    path.write_bytes(b"XXXX" + data[4:])
    with pytest.raises(FormatError):
        load_model(path)
