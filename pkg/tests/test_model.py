import numpy as np
import pytest

from src.config import Optimizer, TrainConfig
from src.model import (
    EmptyTestSetError,
    NonFiniteInputError,
    ShapeMismatchError,
    TrainingDivergedError,
    component_magnitudes,
    evaluate,
    evaluate_loss,
    frobenius_norm,
    init_params,
    load_checkpoint,
    local_train,
    loss_and_gradients,
    params_from_buffer,
    params_to_buffer,
    save_checkpoint,
    train_epochs,
    update_magnitude,
)
from src.types import GradientUpdate, LabeledDataset, ModelParams


def _toy_data(seed=0, n=40, dim=3, n_classes=3):
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % n_classes
    means = rng.standard_normal((n_classes, dim)) * 4
    return LabeledDataset(means[labels] + rng.standard_normal((n, dim)), labels, n_classes)


def test_frobenius_norm():
    assert frobenius_norm(np.array([[3.0, 4.0], [0.0, 0.0]])) == 5.0
    assert frobenius_norm(np.eye(2)) == pytest.approx(np.sqrt(2))
    assert frobenius_norm(np.zeros((3, 3))) == 0.0
    assert frobenius_norm(np.zeros((0, 4))) == 0.0
    with pytest.raises(NonFiniteInputError):
        frobenius_norm(np.array([[np.nan]]))


def test_update_magnitude():
    update = GradientUpdate([np.array([[3.0]]), np.array([4.0])], 0.0)
    assert update_magnitude(update) == pytest.approx(5.0)
    zero = GradientUpdate([np.zeros((2, 3)), np.zeros(3)], 0.0)
    assert update_magnitude(zero) == 0.0

    rng = np.random.default_rng(0)
    dw, db = rng.standard_normal((4, 3)), rng.standard_normal(3)
    flat = np.linalg.norm(np.concatenate([dw.ravel(), db]))
    assert update_magnitude(GradientUpdate([dw, db], 0.0)) == pytest.approx(flat, rel=1e-12)
    assert component_magnitudes(GradientUpdate([dw, db], 0.0)) == pytest.approx(
        (np.linalg.norm(dw), np.linalg.norm(db)), rel=1e-12
    )


def test_update_magnitude_rejects_wrong_shapes():
    with pytest.raises(ShapeMismatchError):
        update_magnitude(GradientUpdate([np.zeros((2, 3)), np.zeros(2)], 0.0))
    final = (np.zeros((2, 3)), np.zeros(3))
    with pytest.raises(ShapeMismatchError):
        update_magnitude(GradientUpdate([np.zeros((3, 3)), np.zeros(3)], 0.0), final)


def _numeric_gradient(params, x, y, layer, which, anchor=None, mu=0.0, eps=1e-5):
    grad = np.zeros_like(params.layers[layer][which])
    it = np.nditer(grad, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        plus, minus = params.copy(), params.copy()
        plus.layers[layer][which][idx] += eps
        minus.layers[layer][which][idx] -= eps
        f_plus, _ = loss_and_gradients(plus, x, y, anchor, mu)
        f_minus, _ = loss_and_gradients(minus, x, y, anchor, mu)
        grad[idx] = (f_plus - f_minus) / (2 * eps)
    return grad


@pytest.mark.parametrize("hidden", [(), (3,)])
def test_analytic_gradients_match_finite_differences(hidden):
    for seed in range(50):
        rng = np.random.default_rng(seed)
        params = init_params(dim=2, n_classes=3, hidden_dims=hidden, seed=seed)
        x = rng.standard_normal((5, 2))
        y = rng.integers(0, 3, size=5)
        _, grads = loss_and_gradients(params, x, y)
        for layer in range(len(params.layers)):
            for which in (0, 1):
                numeric = _numeric_gradient(params, x, y, layer, which)
                analytic = grads[layer][which]
                scale = np.maximum(np.abs(numeric) + np.abs(analytic), 1e-4)
                assert np.max(np.abs(numeric - analytic) / scale) < 1e-4


def test_proximal_term_adds_mu_times_distance():
    data = _toy_data()
    anchor = init_params(3, 3, seed=1)
    params = init_params(3, 3, seed=2)
    _, plain = loss_and_gradients(params, data.features, data.labels, anchor, 0.0)
    _, prox = loss_and_gradients(params, data.features, data.labels, anchor, 0.1)
    for (gw, gb), (pw, pb), (w, b), (aw, ab) in zip(plain, prox, params.layers, anchor.layers):
        np.testing.assert_allclose(pw - gw, 0.1 * (w - aw), atol=1e-8)
        np.testing.assert_allclose(pb - gb, 0.1 * (b - ab), atol=1e-8)


def test_zero_mu_matches_fedavg_trajectory():
    data = _toy_data()
    params = init_params(3, 3, seed=0)
    a, _, ua = local_train(params, data, TrainConfig(epochs=2, batch_size=8, mu=0.0, seed=5))
    b, _, ub = local_train(params, data, TrainConfig(epochs=2, batch_size=8, mu=0.0, seed=5))
    assert a.flatten().tobytes() == b.flatten().tobytes()
    assert ua.magnitude == ub.magnitude


def test_zero_learning_rate_leaves_model_unchanged():
    data = _toy_data()
    params = init_params(3, 3, seed=0)
    local, _, update = local_train(params, data, TrainConfig(learning_rate=0.0, seed=1))
    assert local.flatten().tobytes() == params.flatten().tobytes()
    assert update.magnitude == 0.0
    assert all(not np.any(d) for d in update.deltas)


def test_single_full_batch_sgd_step():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((4, 2))
    y = np.array([0, 1, 0, 1])
    data = LabeledDataset(x, y, 2)
    params = init_params(2, 2, seed=4)
    lr = 0.5
    local, _, _ = local_train(params, data, TrainConfig(epochs=1, batch_size=4, learning_rate=lr, seed=0))
    _, grads = loss_and_gradients(params, x, y)
    (w, b), (gw, gb) = params.final_layer, grads[-1]
    np.testing.assert_allclose(local.final_layer[0], w - lr * gw, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(local.final_layer[1], b - lr * gb, rtol=1e-12, atol=1e-14)
    numeric = _numeric_gradient(params, x, y, 0, 0)
    assert np.max(np.abs(numeric - gw) / np.maximum(np.abs(numeric) + np.abs(gw), 1e-4)) < 1e-4


@pytest.mark.parametrize("optimizer", [Optimizer.SGD, Optimizer.ADAM])
def test_local_update_identity_is_exact(optimizer):
    data = _toy_data()
    params = init_params(3, 3, hidden_dims=(4,), seed=0)
    cfg = TrainConfig(epochs=2, batch_size=16, learning_rate=0.05, mu=0.1, optimizer=optimizer, seed=3)
    local, loss, update = local_train(params, data, cfg)
    gw, gb = params.final_layer
    assert np.array_equal(gw - update.weight_delta, local.final_layer[0])
    assert np.array_equal(gb - update.bias_delta, local.final_layer[1])
    assert update.magnitude > 0
    assert loss >= 0


def test_loss_decreases_on_separable_data():
    improved = 0
    for seed in range(10):
        data = _toy_data(seed=seed, n=120)
        params = init_params(3, 3, seed=seed)
        _, losses = train_epochs(params, data, TrainConfig(epochs=5, batch_size=16, learning_rate=0.1, seed=seed))
        improved += losses[-1] <= losses[0]
    assert improved >= 9


def test_divergence_reports_step():
    data = LabeledDataset(np.full((4, 2), np.inf), np.array([0, 1, 0, 1]), 2)
    with pytest.raises(TrainingDivergedError) as info:
        local_train(init_params(2, 2, seed=0), data, TrainConfig(seed=0))
    assert info.value.step == 0


def test_evaluate():
    x = np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 2.0], [3.0, 1.0]])
    balanced = LabeledDataset(x, np.array([0, 1, 0, 1]), 2)
    constant = ModelParams([(np.zeros((2, 2)), np.array([1.0, 0.0]))])
    assert evaluate(constant, [balanced]) == 0.5

    separable = LabeledDataset(np.array([[-2.0], [-1.0], [1.0], [2.0]]), np.array([0, 0, 1, 1]), 2)
    perfect = ModelParams([(np.array([[-1.0, 1.0]]), np.zeros(2))])
    assert evaluate(perfect, [separable]) == 1.0
    assert evaluate(perfect, [separable]) == evaluate(perfect, [separable])


def test_evaluate_pools_by_sample_count():
    perfect = ModelParams([(np.array([[-1.0, 1.0]]), np.zeros(2))])
    right = LabeledDataset(np.array([[-1.0], [1.0], [2.0]]), np.array([0, 1, 1]), 2)
    wrong = LabeledDataset(np.array([[-1.0]]), np.array([1]), 2)
    assert evaluate(perfect, [right, wrong]) == 0.75


def test_evaluate_needs_test_samples():
    empty = LabeledDataset(np.zeros((0, 2)), np.zeros(0, dtype=int), 2)
    with pytest.raises(EmptyTestSetError):
        evaluate(init_params(2, 2), [empty, empty])
    with pytest.raises(EmptyTestSetError):
        evaluate_loss(init_params(2, 2), empty)


def test_buffer_format(tmp_path):
    params = init_params(4, 3, hidden_dims=(5,), seed=9)
    buffer = params_to_buffer(params)
    assert np.frombuffer(buffer, dtype="<i8", count=5).tolist() == [2, 4, 5, 5, 3]
    restored = params_from_buffer(buffer)
    assert restored.shapes == params.shapes
    assert restored.flatten().tobytes() == params.flatten().tobytes()
    with pytest.raises(ShapeMismatchError):
        params_from_buffer(buffer + b"\x00" * 8)

    path = save_checkpoint(params, tmp_path / "ckpt" / "model.bin")
    assert load_checkpoint(path).flatten().tobytes() == params.flatten().tobytes()
