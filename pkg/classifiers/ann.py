"""Feed-forward sigmoid network trained by per-sample backpropagation of squared error."""
import logging
import math

import numpy as np
from rest_framework.exceptions import ValidationError

from featuresets.schema import Dataset

from .base import Prediction, TrainedModel, VectorEncoder, require_samples
from .constants import (
    AnnPreset,
    DEFAULT_DECAY,
    DEFAULT_EPOCHS,
    DEFAULT_LEARNING_RATE,
    Method,
    WEIGHT_INIT_RANGE,
)

logger = logging.getLogger(__name__)


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))


class Network:
    """Fully connected layers; `weights[l]` is (out x in) and `biases[l]` has length out."""

    def __init__(self, weights, biases):
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]

    @classmethod
    def initialise(cls, sizes: list[int], rng: np.random.Generator) -> 'Network':
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            weights.append(rng.uniform(-WEIGHT_INIT_RANGE, WEIGHT_INIT_RANGE, size=(fan_out, fan_in)))
            biases.append(rng.uniform(-WEIGHT_INIT_RANGE, WEIGHT_INIT_RANGE, size=fan_out))
        return cls(weights, biases)

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def forward(self, X: np.ndarray) -> list[np.ndarray]:
        """Activations of every layer, input first, for a batch of rows."""
        activations = [np.atleast_2d(X)]
        for w, b in zip(self.weights, self.biases):
            activations.append(sigmoid(activations[-1] @ w.T + b))
        return activations

    def output(self, X: np.ndarray) -> np.ndarray:
        return self.forward(X)[-1]

    def loss(self, X: np.ndarray, T: np.ndarray) -> float:
        """Mean over rows of 0.5 * squared error against the targets."""
        out = self.output(X)
        return float(0.5 * ((out - np.atleast_2d(T)) ** 2).sum() / out.shape[0])

    def gradients(self, X: np.ndarray, T: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Analytic gradients of `loss` with respect to every weight and bias."""
        activations = self.forward(X)
        n = activations[0].shape[0]
        out = activations[-1]
        delta = (out - np.atleast_2d(T)) * out * (1.0 - out)
        grad_w = [None] * len(self.weights)
        grad_b = [None] * len(self.weights)
        for layer in range(len(self.weights) - 1, -1, -1):
            grad_w[layer] = delta.T @ activations[layer] / n
            grad_b[layer] = delta.sum(axis=0) / n
            if layer:
                a = activations[layer]
                delta = (delta @ self.weights[layer]) * a * (1.0 - a)
        return grad_w, grad_b

    def step(self, x: np.ndarray, t: np.ndarray, rate: float):
        grad_w, grad_b = self.gradients(x, t)
        for layer in range(len(self.weights)):
            self.weights[layer] -= rate * grad_w[layer]
            self.biases[layer] -= rate * grad_b[layer]


def hidden_layers(n_inputs: int, n_classes: int, hidden=None, preset: str = AnnPreset.DEFAULT) -> list[int]:
    if hidden:
        sizes = [int(size) for size in hidden]
    else:
        width = math.ceil((n_inputs + n_classes) / 2)
        sizes = [width] * (3 if preset == AnnPreset.THREE_LAYER else 1)
    if any(size < 1 for size in sizes):
        raise ValidationError("Hidden layer sizes must be at least 1.")
    return sizes


class AnnModel(TrainedModel):
    method = Method.ANN

    def __init__(self, schema, class_names, encoder: VectorEncoder, network: Network,
                 epochs: int, learning_rate: float, decay: float, loss_history):
        super().__init__(schema, class_names)
        self.encoder = encoder
        self.network = network
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.decay = decay
        self.loss_history = list(loss_history)

    def predict(self, values) -> Prediction:
        return Prediction.from_scores(self.network.output(self.encoder.encode(values))[0])

    def get_params(self) -> dict:
        return {
            'encoder': self.encoder.to_params(),
            'weights': [w.tolist() for w in self.network.weights],
            'biases': [b.tolist() for b in self.network.biases],
            'epochs': self.epochs,
            'learning_rate': self.learning_rate,
            'decay': self.decay,
            'loss_history': self.loss_history,
        }

    @classmethod
    def from_params(cls, schema, class_names, params):
        return cls(
            schema, class_names,
            encoder=VectorEncoder.from_params(params['encoder']),
            network=Network(params['weights'], params['biases']),
            epochs=params['epochs'],
            learning_rate=params['learning_rate'],
            decay=params['decay'],
            loss_history=params['loss_history'],
        )


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    return np.eye(n_classes)[labels]


def train_ann(
    ds: Dataset,
    hidden=None,
    preset: str = AnnPreset.DEFAULT,
    epochs: int = DEFAULT_EPOCHS,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    decay: float = DEFAULT_DECAY,
    seed: int = 0,
) -> AnnModel:
    if epochs < 0:
        raise ValidationError("epochs must be non-negative.")
    if learning_rate <= 0 or not 0 < decay <= 1:
        raise ValidationError("learning_rate must be positive and decay in (0, 1].")
    require_samples(ds)

    encoder = VectorEncoder.fit(ds)
    X = encoder.encode_dataset(ds)
    T = one_hot(ds.labels(), ds.n_classes)
    sizes = [encoder.width, *hidden_layers(encoder.width, ds.n_classes, hidden, preset), ds.n_classes]
    network = Network.initialise(sizes, np.random.default_rng(seed))

    rate = learning_rate
    history = []
    for _ in range(epochs):
        for row in range(X.shape[0]):
            network.step(X[row:row + 1], T[row:row + 1], rate)
        history.append(network.loss(X, T))
        rate *= decay
    if history:
        logger.debug("ANN %s trained for %d epochs, final loss %.6f", sizes, epochs, history[-1])
    return AnnModel(ds.schema, ds.class_names, encoder, network, epochs, learning_rate, decay, history)
