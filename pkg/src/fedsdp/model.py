"""Minimal trainable model: an MLP over a flat parameter vector.

The whole model lives in one float64 vector so that clipping, noising, and
aggregation operate on a single L2 ball. The layout records one
(fan_in, fan_out) pair per dense layer; each layer owns fan_in*fan_out
weights plus fan_out biases. Hidden layers use tanh, the output layer is
linear, and training minimizes softmax cross-entropy with hand-derived
gradients. With no hidden layers the model degenerates to multinomial
logistic regression.

All operations are pure: they never mutate their inputs, and every
stochastic step is a function of the generator passed in.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, EmptyDataError
from .data import LabeledDataset

Layout = tuple[tuple[int, int], ...]


def mlp_layout(n_features: int, hidden: tuple[int, ...], n_classes: int) -> Layout:
    """Build the layer layout for an MLP, e.g. (12, (32,), 4) -> ((12,32),(32,4))."""
    dims = (n_features, *hidden, n_classes)
    return tuple((dims[i], dims[i + 1]) for i in range(len(dims) - 1))


def layout_size(layout: Layout) -> int:
    return sum(fi * fo + fo for fi, fo in layout)


@dataclass(frozen=True)
class ModelParams:
    """Flat parameter vector plus the layer layout needed to unflatten it."""

    values: np.ndarray
    layout: Layout

    def __post_init__(self):
        if self.values.shape != (layout_size(self.layout),):
            raise ConfigurationError(
                f"parameter vector has {self.values.size} entries, "
                f"layout {self.layout} needs {layout_size(self.layout)}"
            )

    @property
    def n_features(self) -> int:
        return self.layout[0][0]

    @property
    def n_classes(self) -> int:
        return self.layout[-1][1]

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.values).all())

    def with_values(self, values: np.ndarray) -> "ModelParams":
        return ModelParams(np.asarray(values, dtype=np.float64), self.layout)

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Unflatten into [(W, b), ...] views of the underlying vector."""
        out = []
        pos = 0
        for fan_in, fan_out in self.layout:
            w = self.values[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out)
            pos += fan_in * fan_out
            b = self.values[pos:pos + fan_out]
            pos += fan_out
            out.append((w, b))
        return out


@dataclass(frozen=True)
class TrainConfig:
    """Local-training hyper-parameters.

    learning_rate and local_epochs admit the degenerate values 0 so that
    no-op training rounds stay expressible; real experiment configs enforce
    strictly positive training.
    """

    learning_rate: float
    local_epochs: int
    batch_size: int
    clip_bound: float

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ConfigurationError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.local_epochs < 0:
            raise ConfigurationError(f"local_epochs must be >= 0, got {self.local_epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.clip_bound <= 0:
            raise ConfigurationError(f"clip_bound must be > 0, got {self.clip_bound}")


def init_params(layout: Layout, rng: np.random.Generator) -> ModelParams:
    """Initialize weights and biases uniformly in [-1/sqrt(fan_in), 1/sqrt(fan_in)]."""
    chunks = []
    for fan_in, fan_out in layout:
        bound = 1.0 / np.sqrt(fan_in)
        chunks.append(rng.uniform(-bound, bound, size=fan_in * fan_out + fan_out))
    return ModelParams(np.concatenate(chunks), layout)


def forward(params: ModelParams, batch: np.ndarray) -> np.ndarray:
    """Raw class scores (logits), one row per input row."""
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.n_features:
        raise ConfigurationError(
            f"batch has {x.shape[-1] if x.ndim == 2 else x.shape} columns, "
            f"model expects {params.n_features}"
        )
    layers = params.layers()
    h = x
    for w, b in layers[:-1]:
        h = np.tanh(h @ w + b)
    w, b = layers[-1]
    return h @ w + b


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def predict_proba(params: ModelParams, batch: np.ndarray) -> np.ndarray:
    """Softmax class probabilities; each row sums to 1."""
    return _softmax(forward(params, batch))


def loss_and_gradient(params: ModelParams, features: np.ndarray,
                      labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its gradient as a flat vector."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if x.shape[0] == 0:
        raise EmptyDataError("cannot compute a gradient on an empty batch")
    layers = params.layers()

    activations = [x]
    h = x
    for w, b in layers[:-1]:
        h = np.tanh(h @ w + b)
        activations.append(h)
    w, b = layers[-1]
    probs = _softmax(h @ w + b)

    n = x.shape[0]
    loss = float(-np.log(probs[np.arange(n), y] + 1e-300).mean())

    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n

    grads: list[np.ndarray] = []
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        a = activations[i]
        grads.append(np.concatenate([(a.T @ delta).ravel(), delta.sum(axis=0)]))
        if i > 0:
            # tanh'(z) = 1 - tanh(z)^2, and activations[i] already holds tanh(z)
            delta = (delta @ w.T) * (1.0 - a * a)
    return loss, np.concatenate(grads[::-1])


def cross_entropy(params: ModelParams, data: LabeledDataset) -> float:
    """Mean softmax cross-entropy over a dataset."""
    if data.n == 0:
        raise EmptyDataError("cannot evaluate loss on an empty dataset")
    probs = predict_proba(params, data.features)
    return float(-np.log(probs[np.arange(data.n), data.labels] + 1e-300).mean())


def sgd_epoch(params: ModelParams, data: LabeledDataset, cfg: TrainConfig,
              rng: np.random.Generator) -> ModelParams:
    """One full pass over the data in shuffled mini-batches.

    Deterministic given (params, data, cfg, generator state); the generator
    is consumed for the shuffle only.
    """
    if data.n == 0:
        raise EmptyDataError("cannot train on an empty dataset")
    order = rng.permutation(data.n)
    values = params.values.copy()
    current = params.with_values(values)
    for start in range(0, data.n, cfg.batch_size):
        idx = order[start:start + cfg.batch_size]
        _, grad = loss_and_gradient(current, data.features[idx], data.labels[idx])
        values = values - cfg.learning_rate * grad
        current = params.with_values(values)
    return current


def train_epochs(params: ModelParams, data: LabeledDataset, cfg: TrainConfig,
                 rng: np.random.Generator) -> ModelParams:
    """Run cfg.local_epochs passes of sgd_epoch; zero epochs is a no-op."""
    current = params
    for _ in range(cfg.local_epochs):
        current = sgd_epoch(current, data, cfg, rng)
    return current


def clip(params: ModelParams, clip_bound: float) -> ModelParams:
    """Project the parameter vector onto the L2 ball of radius clip_bound.

    Rescaling can land a fraction of an ulp above the bound, so the scale
    is reapplied until the norm is truly <= clip_bound; this makes clipping
    exactly idempotent.
    """
    if clip_bound <= 0:
        raise ConfigurationError(f"clip bound must be > 0, got {clip_bound}")
    norm = params.norm()
    if norm <= clip_bound:
        return params
    values = params.values
    while norm > clip_bound:
        values = values * (clip_bound / norm)
        norm = float(np.linalg.norm(values))
    return params.with_values(values)


def add_gaussian_noise(params: ModelParams, sigma: float,
                       rng: np.random.Generator) -> ModelParams:
    """Perturb each coordinate independently with N(0, sigma^2)."""
    if sigma < 0:
        raise ConfigurationError(f"noise scale must be >= 0, got {sigma}")
    if sigma == 0:
        return params
    return params.with_values(params.values + rng.normal(0.0, sigma, size=params.values.shape))


def evaluate(params: ModelParams, data: LabeledDataset) -> float:
    """Fraction of samples whose top score matches the label."""
    if data.n == 0:
        raise EmptyDataError("cannot evaluate on an empty dataset")
    predicted = forward(params, data.features).argmax(axis=1)
    return float((predicted == data.labels).mean())
