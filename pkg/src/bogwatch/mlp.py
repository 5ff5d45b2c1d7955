"""Multilayer perceptron regression trained by mini-batch gradient descent.

tanh hidden layers, identity output, squared-error loss. Inputs and the
target are standardized internally (the stored mean/scale travel with the
model). The output layer starts at zero, so an untrained model predicts the
training-set mean.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, DivergenceError, ShapeError


@dataclass(frozen=True)
class MlpConfig:
    hidden: tuple[int, ...] = (32, 16)
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0


@dataclass
class MlpModel:
    weights: list[np.ndarray]  # layer l: (fan_in, fan_out)
    biases: list[np.ndarray]
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_scale: float

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]


def _forward(weights, biases, X):
    """Activations per layer; tanh on hidden layers, identity output."""
    acts = [X]
    for i, (W, b) in enumerate(zip(weights, biases)):
        z = acts[-1] @ W + b
        acts.append(z if i == len(weights) - 1 else np.tanh(z))
    return acts


def mlp_loss_and_gradients(weights, biases, X, y):
    """Mean-squared-error loss and its gradients w.r.t. every parameter.

    X and y are already standardized; used by both the trainer and the
    finite-difference checks.
    """
    n = X.shape[0]
    acts = _forward(weights, biases, X)
    pred = acts[-1][:, 0]
    err = pred - y
    loss = float((err**2).mean())
    delta = (2.0 / n) * err[:, None]  # d loss / d output
    grads_w, grads_b = [], []
    for layer in range(len(weights) - 1, -1, -1):
        a_in = acts[layer]
        grads_w.append(a_in.T @ delta)
        grads_b.append(delta.sum(axis=0))
        if layer > 0:
            delta = (delta @ weights[layer].T) * (1.0 - acts[layer] ** 2)
    return loss, grads_w[::-1], grads_b[::-1]


def _init_params(n_features, hidden, rng):
    sizes = [n_features, *hidden, 1]
    weights, biases = [], []
    for i in range(len(sizes) - 1):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        if i == len(sizes) - 2:
            W = np.zeros((fan_in, fan_out))  # mean prediction at epoch 0
        else:
            W = rng.normal(0.0, np.sqrt(1.0 / fan_in), (fan_in, fan_out))
        weights.append(W)
        biases.append(np.zeros(fan_out))
    return weights, biases


def train_mlp(X, y, cfg: MlpConfig = MlpConfig()) -> MlpModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.size or y.size == 0:
        raise DataError(f"bad training data: X {X.shape}, y {y.shape}")
    if not np.isfinite(X).all() or not np.isfinite(y).all():
        raise DataError("training data contains non-finite values")

    x_mean = X.mean(axis=0)
    x_scale = X.std(axis=0)
    x_scale[x_scale == 0.0] = 1.0
    y_mean = float(y.mean())
    y_scale = float(y.std()) or 1.0
    Xs = (X - x_mean) / x_scale
    ys = (y - y_mean) / y_scale

    rng = np.random.default_rng([cfg.seed, 1])
    weights, biases = _init_params(X.shape[1], cfg.hidden, rng)
    n = y.size
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        with np.errstate(over="ignore", invalid="ignore"):
            for start in range(0, n, cfg.batch_size):
                batch = order[start : start + cfg.batch_size]
                loss, gw, gb = mlp_loss_and_gradients(
                    weights, biases, Xs[batch], ys[batch]
                )
                epoch_loss += loss * batch.size
                for l in range(len(weights)):
                    weights[l] -= cfg.learning_rate * gw[l]
                    biases[l] -= cfg.learning_rate * gb[l]
        if not np.isfinite(epoch_loss):
            raise DivergenceError(epoch)
    return MlpModel(weights=weights, biases=biases, x_mean=x_mean,
                    x_scale=x_scale, y_mean=y_mean, y_scale=y_scale)


def predict_mlp(model: MlpModel, x) -> float | np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != model.x_mean.size:
        raise ShapeError(f"expected {model.x_mean.size} features, got {X.shape[1]}")
    Xs = (X - model.x_mean) / model.x_scale
    out = _forward(model.weights, model.biases, Xs)[-1][:, 0]
    out = out * model.y_scale + model.y_mean
    return float(out[0]) if single else out


def save_mlp(model: MlpModel, path, feature_names=None) -> None:
    doc = {
        "type": "mlp",
        "layer_sizes": model.layer_sizes,
        "feature_names": list(feature_names) if feature_names else None,
        "weights": [w.tolist() for w in model.weights],  # row-major per layer
        "biases": [b.tolist() for b in model.biases],
        "x_mean": model.x_mean.tolist(),
        "x_scale": model.x_scale.tolist(),
        "y_mean": model.y_mean,
        "y_scale": model.y_scale,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def load_mlp(path) -> tuple[MlpModel, list[str] | None]:
    doc = json.loads(Path(path).read_text())
    if doc.get("type") != "mlp":
        raise DataError(f"{path}: not an MLP model file")
    model = MlpModel(
        weights=[np.array(w, dtype=np.float64) for w in doc["weights"]],
        biases=[np.array(b, dtype=np.float64) for b in doc["biases"]],
        x_mean=np.array(doc["x_mean"], dtype=np.float64),
        x_scale=np.array(doc["x_scale"], dtype=np.float64),
        y_mean=float(doc["y_mean"]),
        y_scale=float(doc["y_scale"]),
    )
    sizes = model.layer_sizes
    if sizes != list(doc["layer_sizes"]):
        raise DataError(f"{path}: inconsistent layer sizes")
    return model, doc.get("feature_names")
