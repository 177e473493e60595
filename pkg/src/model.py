import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from src.config import Optimizer, TrainConfig
from src.constants import ADAM_DEFAULTS
from src.helpers import derive_seed
from src.types import GradientUpdate, LabeledDataset, Layer, ModelParams

logger = logging.getLogger("model")


class ModelError(Exception):
    """Base exception for model and local-training errors"""
    pass


class NonFiniteInputError(ModelError, ValueError):
    pass


class ShapeMismatchError(ModelError, ValueError):
    pass


class EmptyTestSetError(ModelError):
    pass


class TrainingDivergedError(ModelError):
    """Raised when the training loss or parameters stop being finite"""

    def __init__(self, step: int, loss: float):
        self.step = step
        self.loss = loss
        super().__init__(f"Training diverged at step {step} (loss={loss})")


def client_seed(seed: int, round_index: int, iteration: int, client_id: int) -> int:
    """Independent RNG seed per (experiment seed, round, iteration, client)"""
    return derive_seed(seed, round_index, iteration, client_id)


def init_params(dim: int, n_classes: int, hidden_dims: Sequence[int] = (), seed: int = 0) -> ModelParams:
    """Softmax regression when hidden_dims is empty, otherwise a tanh MLP"""
    rng = np.random.default_rng(seed)
    widths = [dim, *hidden_dims, n_classes]
    layers = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        w = rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)
        layers.append((w, np.zeros(fan_out)))
    return ModelParams(layers)


def _forward(params: ModelParams, x: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
    activations = [x]
    a = x
    for w, b in params.layers[:-1]:
        a = np.tanh(a @ w + b)
        activations.append(a)
    w, b = params.final_layer
    return a @ w + b, activations


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def predict(params: ModelParams, x: np.ndarray) -> np.ndarray:
    logits, _ = _forward(params, x)
    return np.argmax(logits, axis=1)


def loss_and_gradients(
    params: ModelParams,
    x: np.ndarray,
    y: np.ndarray,
    anchor: Optional[ModelParams] = None,
    mu: float = 0.0,
) -> Tuple[float, List[Layer]]:
    """
    Mean cross-entropy plus (mu/2)*||theta - anchor||^2, with analytic gradients.

    Returns:
        (objective, [(dW, db) per layer])
    """
    n = x.shape[0]
    logits, activations = _forward(params, x)
    log_probs = _log_softmax(logits)
    loss = float(-log_probs[np.arange(n), y].mean())

    dz = np.exp(log_probs)
    dz[np.arange(n), y] -= 1.0
    dz /= n

    grads: List[Layer] = []
    for layer_index in range(len(params.layers) - 1, -1, -1):
        w, _ = params.layers[layer_index]
        a_prev = activations[layer_index]
        grads.append((a_prev.T @ dz, dz.sum(axis=0)))
        if layer_index:
            dz = (dz @ w.T) * (1.0 - a_prev ** 2)
    grads.reverse()

    if mu > 0 and anchor is not None:
        for i, ((w, b), (aw, ab)) in enumerate(zip(params.layers, anchor.layers)):
            dw, db = grads[i]
            grads[i] = (dw + mu * (w - aw), db + mu * (b - ab))
            loss += 0.5 * mu * (float(np.sum((w - aw) ** 2)) + float(np.sum((b - ab) ** 2)))
    return loss, grads


def frobenius_norm(a: np.ndarray) -> float:
    """sqrt of the sum of squared entries; 0 for an empty matrix"""
    a = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise NonFiniteInputError("frobenius_norm received non-finite entries")
    return float(np.sqrt(np.sum(np.square(a))))


def update_magnitude(update: GradientUpdate, final_layer: Optional[Layer] = None) -> float:
    """sqrt(sum_i ||delta_i||_F^2) over the final layer's parameter deltas"""
    if len(update.deltas) != 2:
        raise ShapeMismatchError(f"expected weight and bias deltas, got {len(update.deltas)} tensors")
    dw, db = update.deltas
    if dw.ndim != 2 or db.shape != (dw.shape[1],):
        raise ShapeMismatchError(f"delta shapes {dw.shape} and {db.shape} do not form a layer")
    if final_layer is not None and (dw.shape != final_layer[0].shape or db.shape != final_layer[1].shape):
        raise ShapeMismatchError(
            f"delta shapes {dw.shape}/{db.shape} do not match final layer {final_layer[0].shape}/{final_layer[1].shape}"
        )
    return float(np.sqrt(sum(frobenius_norm(d) ** 2 for d in update.deltas)))


def component_magnitudes(update: GradientUpdate) -> Tuple[float, float]:
    """(||delta_W||_F, ||delta_b||_F) of the final layer"""
    return frobenius_norm(update.weight_delta), frobenius_norm(update.bias_delta)


def _step_sgd(params: ModelParams, grads: List[Layer], lr: float) -> None:
    params.layers = [(w - lr * gw, b - lr * gb) for (w, b), (gw, gb) in zip(params.layers, grads)]


class _Adam:
    def __init__(self, params: ModelParams, lr: float):
        self.lr = lr
        self.t = 0
        self.m = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params.layers]
        self.v = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params.layers]

    def step(self, params: ModelParams, grads: List[Layer]) -> None:
        beta1, beta2, eps = ADAM_DEFAULTS["beta1"], ADAM_DEFAULTS["beta2"], ADAM_DEFAULTS["eps"]
        self.t += 1
        new_layers = []
        for i, (layer, grad) in enumerate(zip(params.layers, grads)):
            updated = []
            m_pair, v_pair = [], []
            for p, g, m, v in zip(layer, grad, self.m[i], self.v[i]):
                m = beta1 * m + (1 - beta1) * g
                v = beta2 * v + (1 - beta2) * g * g
                m_hat = m / (1 - beta1 ** self.t)
                v_hat = v / (1 - beta2 ** self.t)
                updated.append(p - self.lr * m_hat / (np.sqrt(v_hat) + eps))
                m_pair.append(m)
                v_pair.append(v)
            new_layers.append(tuple(updated))
            self.m[i] = tuple(m_pair)
            self.v[i] = tuple(v_pair)
        params.layers = new_layers


def train_epochs(
    global_params: ModelParams,
    data: LabeledDataset,
    cfg: TrainConfig,
) -> Tuple[ModelParams, List[float]]:
    """Mini-batch training from global_params; returns the trained copy and per-epoch mean loss"""
    if len(data) == 0:
        raise ModelError("cannot train on an empty dataset")
    if not global_params.is_finite():
        raise NonFiniteInputError("global parameters contain non-finite entries")

    rng = np.random.default_rng(cfg.seed)
    params = global_params.copy()
    adam = _Adam(params, cfg.learning_rate) if cfg.optimizer == Optimizer.ADAM else None
    anchor = global_params if cfg.mu > 0 else None

    n = len(data)
    step = 0
    epoch_losses = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss, grads = loss_and_gradients(params, data.features[batch], data.labels[batch], anchor, cfg.mu)
            if not np.isfinite(loss):
                raise TrainingDivergedError(step, loss)
            if adam is not None:
                adam.step(params, grads)
            else:
                _step_sgd(params, grads, cfg.learning_rate)
            if not params.is_finite():
                raise TrainingDivergedError(step, loss)
            total += loss * len(batch)
            step += 1
        epoch_losses.append(total / n)
    return params, epoch_losses


def local_train(
    global_params: ModelParams,
    data: LabeledDataset,
    cfg: TrainConfig,
) -> Tuple[ModelParams, float, GradientUpdate]:
    """
    Train one client from the global model.

    The returned update holds final-layer deltas (global minus local), and the
    local final layer is stored as global - delta so the two agree bitwise.

    Returns:
        (local params, mean loss of the last epoch, final-layer GradientUpdate)

    Raises:
        TrainingDivergedError: loss or parameters became non-finite
    """
    local, epoch_losses = train_epochs(global_params, data, cfg)
    gw, gb = global_params.final_layer
    lw, lb = local.final_layer
    deltas = [gw - lw, gb - lb]
    local.layers[-1] = (gw - deltas[0], gb - deltas[1])
    update = GradientUpdate(deltas=deltas, magnitude=0.0)
    update.magnitude = update_magnitude(update, global_params.final_layer)
    return local, epoch_losses[-1], update


def evaluate(params: ModelParams, tests: Sequence[LabeledDataset]) -> float:
    """Sample-weighted accuracy pooled over every provided test set"""
    correct = 0
    total = 0
    for test in tests:
        if len(test) == 0:
            continue
        correct += int(np.sum(predict(params, test.features) == test.labels))
        total += len(test)
    if total == 0:
        raise EmptyTestSetError("no test samples across the provided datasets")
    return correct / total


def evaluate_loss(params: ModelParams, data: LabeledDataset) -> float:
    """Mean cross-entropy of params on data (no proximal term)"""
    if len(data) == 0:
        raise EmptyTestSetError("cannot score an empty dataset")
    logits, _ = _forward(params, data.features)
    return float(-_log_softmax(logits)[np.arange(len(data)), data.labels].mean())


def params_to_buffer(params: ModelParams) -> bytes:
    """Little-endian int64 header (layer count, in/out dims per layer) then float64 W,b per layer"""
    header = [len(params.layers)]
    for w, _ in params.layers:
        header.extend(w.shape)
    body = [np.ascontiguousarray(t, dtype="<f8").tobytes() for layer in params.layers for t in layer]
    return np.asarray(header, dtype="<i8").tobytes() + b"".join(body)


def params_from_buffer(buffer: bytes) -> ModelParams:
    n_layers = int(np.frombuffer(buffer, dtype="<i8", count=1)[0])
    dims = np.frombuffer(buffer, dtype="<i8", count=1 + 2 * n_layers)[1:]
    offset = 8 * (1 + 2 * n_layers)
    layers = []
    for i in range(n_layers):
        fan_in, fan_out = int(dims[2 * i]), int(dims[2 * i + 1])
        w = np.frombuffer(buffer, dtype="<f8", count=fan_in * fan_out, offset=offset).reshape(fan_in, fan_out)
        offset += 8 * fan_in * fan_out
        b = np.frombuffer(buffer, dtype="<f8", count=fan_out, offset=offset)
        offset += 8 * fan_out
        layers.append((w.astype(np.float64), b.astype(np.float64)))
    if offset != len(buffer):
        raise ShapeMismatchError(f"buffer has {len(buffer) - offset} trailing bytes")
    return ModelParams(layers)


def save_checkpoint(params: ModelParams, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(params_to_buffer(params))
    return path


def load_checkpoint(path: Union[str, Path]) -> ModelParams:
    return params_from_buffer(Path(path).read_bytes())
