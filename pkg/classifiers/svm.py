"""Binary soft-margin SVM trained by sequential minimal optimization.

The dual is solved in terms of beta_i = y_i * alpha_i, which lives in
[A_i, B_i] = [0, C] for positive and [-C, 0] for negative samples. Each step
moves the maximal violating pair (i from the "up" set, j from the "low" set)
along the equality constraint sum(beta) = 0.
"""
import logging

import numpy as np
from rest_framework.exceptions import ValidationError

from featuresets.schema import Dataset

from .base import Prediction, TrainedModel, VectorEncoder, require_samples
from .constants import (
    CURVATURE_FLOOR,
    DEFAULT_C,
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_TOLERANCE,
    Method,
    SUPPORT_VECTOR_EPSILON,
    SvmKernel,
)

logger = logging.getLogger(__name__)


def kernel_matrix(X: np.ndarray, Z: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
    if kernel == SvmKernel.LINEAR:
        return X @ Z.T
    squared = (X ** 2).sum(axis=1)[:, None] + (Z ** 2).sum(axis=1)[None, :] - 2.0 * X @ Z.T
    return np.exp(-gamma * np.maximum(squared, 0.0))


class SmoSolver:
    """Maximal-violating-pair SMO on a precomputed kernel matrix."""

    def __init__(self, K: np.ndarray, y: np.ndarray, C: float, tol: float, max_iterations: int):
        self.K = K
        self.y = y
        self.C = C
        self.tol = tol
        self.max_iterations = max_iterations
        self.lower = np.where(y > 0, 0.0, -C)
        self.upper = np.where(y > 0, C, 0.0)

    def solve(self) -> tuple[np.ndarray, float, bool, int]:
        """Returns (alpha, b, converged, iterations)."""
        K, y = self.K, self.y
        beta = np.zeros(y.size)
        g = np.ones(y.size)
        converged = False
        iterations = 0
        i = j = 0
        while iterations < self.max_iterations:
            crit = y * g
            up = beta < self.upper
            low = beta > self.lower
            if not up.any() or not low.any():
                converged = True
                break
            i = int(np.argmax(np.where(up, crit, -np.inf)))
            j = int(np.argmin(np.where(low, crit, np.inf)))
            if crit[i] - crit[j] <= self.tol:
                converged = True
                break
            curvature = max(K[i, i] + K[j, j] - 2.0 * K[i, j], CURVATURE_FLOOR)
            step = min(self.upper[i] - beta[i], beta[j] - self.lower[j], (crit[i] - crit[j]) / curvature)
            g += step * y * (K[j] - K[i])
            beta[i] += step
            beta[j] -= step
            # land exactly on the box when the step was clipped there
            for k in (i, j):
                if abs(beta[k] - self.upper[k]) <= 1e-12 * max(1.0, self.C):
                    beta[k] = self.upper[k]
                if abs(beta[k] - self.lower[k]) <= 1e-12 * max(1.0, self.C):
                    beta[k] = self.lower[k]
            iterations += 1

        crit = y * g
        margin = SUPPORT_VECTOR_EPSILON
        free = (beta > self.lower + margin) & (beta < self.upper - margin)
        if free.any():
            b = float(crit[free].mean())
        else:
            up = beta < self.upper
            low = beta > self.lower
            top = crit[up].max() if up.any() else crit.min()
            bottom = crit[low].min() if low.any() else crit.max()
            b = float((top + bottom) / 2.0)
        return y * beta, b, converged, iterations


class SvmModel(TrainedModel):
    method = Method.SVM

    def __init__(self, schema, class_names, encoder: VectorEncoder, support_vectors, coefficients, alphas,
                 b: float, kernel: str, gamma: float, C: float, tol: float, converged: bool, iterations: int):
        super().__init__(schema, class_names)
        self.encoder = encoder
        self.support_vectors = np.asarray(support_vectors, dtype=float).reshape(-1, encoder.width)
        self.coefficients = np.asarray(coefficients, dtype=float)
        self.alphas = np.asarray(alphas, dtype=float)
        self.b = b
        self.kernel = kernel
        self.gamma = gamma
        self.C = C
        self.tol = tol
        self.converged = converged
        self.iterations = iterations

    def decision(self, encoded: np.ndarray) -> np.ndarray:
        """Signed margin f(x) = sum(alpha_i y_i K(x_i, x)) + b for encoded rows."""
        encoded = np.atleast_2d(encoded)
        if not self.support_vectors.size:
            return np.full(encoded.shape[0], self.b)
        return kernel_matrix(encoded, self.support_vectors, self.kernel, self.gamma) @ self.coefficients + self.b

    def predict(self, values) -> Prediction:
        margin = float(self.decision(self.encoder.encode(values))[0])
        return Prediction.from_scores((-margin, margin))

    def primal_weights(self) -> tuple[np.ndarray, float]:
        """Linear-kernel weights and bias over the encoded columns, in original units."""
        if self.kernel != SvmKernel.LINEAR:
            raise ValidationError("Primal weights exist only for the linear kernel.")
        w = self.coefficients @ self.support_vectors if self.support_vectors.size else np.zeros(self.encoder.width)
        w = w.copy()
        b = self.b
        offset = 0
        for attr, width in enumerate(self.encoder.widths):
            if attr in self.encoder.ranges:
                low, high = self.encoder.ranges[attr]
                if high == low:
                    w[offset] = 0.0
                else:
                    b -= w[offset] * low / (high - low)
                    w[offset] /= high - low
            offset += width
        return w, b

    def get_params(self) -> dict:
        return {
            'encoder': self.encoder.to_params(),
            'support_vectors': self.support_vectors.tolist(),
            'coefficients': self.coefficients.tolist(),
            'alphas': self.alphas.tolist(),
            'b': self.b,
            'kernel': self.kernel,
            'gamma': self.gamma,
            'C': self.C,
            'tol': self.tol,
            'converged': self.converged,
            'iterations': self.iterations,
        }

    @classmethod
    def from_params(cls, schema, class_names, params):
        params = dict(params)
        encoder = VectorEncoder.from_params(params.pop('encoder'))
        return cls(schema, class_names, encoder, **params)


def train_svm(
    ds: Dataset,
    C: float = DEFAULT_C,
    kernel: str = SvmKernel.LINEAR,
    gamma: float | None = None,
    tol: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> SvmModel:
    if ds.n_classes != 2:
        raise ValidationError(f"SVM handles two-class tasks only, got {ds.n_classes} classes.")
    if C <= 0:
        raise ValidationError("C must be positive.")
    if kernel not in SvmKernel.values:
        raise ValidationError(f"Unknown kernel '{kernel}'.")
    require_samples(ds)
    labels = ds.labels()
    if np.unique(labels).size < 2:
        raise ValidationError("SVM training data holds a single class.")

    encoder = VectorEncoder.fit(ds)
    X = encoder.encode_dataset(ds)
    if gamma is None:
        gamma = 1.0 / max(1, encoder.width)
    y = np.where(labels == 1, 1.0, -1.0)

    alphas, b, converged, iterations = SmoSolver(kernel_matrix(X, X, kernel, gamma), y, C, tol, max_iterations).solve()
    if not converged:
        logger.warning("SMO stopped after %d iterations without meeting tolerance %g", iterations, tol)
    support = alphas > SUPPORT_VECTOR_EPSILON
    return SvmModel(
        ds.schema, ds.class_names,
        encoder=encoder,
        support_vectors=X[support],
        coefficients=alphas[support] * y[support],
        alphas=alphas[support],
        b=b,
        kernel=kernel,
        gamma=gamma,
        C=C,
        tol=tol,
        converged=converged,
        iterations=iterations,
    )
