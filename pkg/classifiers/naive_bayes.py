"""Naive Bayes over symbolic attributes with add-`laplace` smoothing."""
import logging

import numpy as np
from rest_framework.exceptions import ValidationError

from featuresets.constants import DEFAULT_DISCRETIZATION_BINS
from featuresets.schema import Dataset

from .base import Prediction, SymbolicEncoder, TrainedModel, require_samples
from .constants import DEFAULT_LAPLACE, Method

logger = logging.getLogger(__name__)


def smoothed(counts: np.ndarray, laplace: float) -> np.ndarray:
    """Normalize counts along the last axis; a 0/0 row becomes uniform."""
    counts = np.asarray(counts, dtype=float) + laplace
    totals = counts.sum(axis=-1, keepdims=True)
    arity = counts.shape[-1]
    with np.errstate(invalid='ignore', divide='ignore'):
        probs = np.where(totals > 0, counts / np.where(totals > 0, totals, 1.0), 1.0 / arity)
    return probs


def class_priors(labels: np.ndarray, n_classes: int, laplace: float) -> np.ndarray:
    return smoothed(np.bincount(labels, minlength=n_classes), laplace)


def class_conditionals(codes: np.ndarray, labels: np.ndarray, arities, n_classes: int, laplace: float) -> list[np.ndarray]:
    """Per attribute a (classes x arity) table of P(value | class), missing rows skipped."""
    tables = []
    for attr, arity in enumerate(arities):
        counts = np.zeros((n_classes, arity))
        present = codes[:, attr] >= 0
        np.add.at(counts, (labels[present], codes[present, attr]), 1.0)
        tables.append(smoothed(counts, laplace))
    return tables


def normalize_log_scores(log_scores: np.ndarray) -> np.ndarray:
    top = log_scores.max()
    if not np.isfinite(top):
        return np.full(log_scores.shape, 1.0 / log_scores.size)
    weights = np.exp(log_scores - top)
    return weights / weights.sum()


def accumulate(log_scores: np.ndarray, column: np.ndarray) -> np.ndarray:
    """Add one attribute's log-likelihoods unless no class can explain the value."""
    with np.errstate(divide='ignore'):
        contribution = np.log(column)
    if np.all(np.isneginf(contribution)):
        return log_scores
    return log_scores + contribution


class NaiveBayesModel(TrainedModel):
    method = Method.NAIVE_BAYES

    def __init__(self, schema, class_names, encoder: SymbolicEncoder, priors, tables, laplace: float):
        super().__init__(schema, class_names)
        self.encoder = encoder
        self.priors = np.asarray(priors, dtype=float)
        self.tables = [np.asarray(t, dtype=float) for t in tables]
        self.laplace = laplace

    def predict(self, values) -> Prediction:
        with np.errstate(divide='ignore'):
            log_scores = np.log(self.priors)
        for attr, code in enumerate(self.encoder.encode(values)):
            if code is not None:
                log_scores = accumulate(log_scores, self.tables[attr][:, code])
        return Prediction.from_scores(normalize_log_scores(log_scores))

    def get_params(self) -> dict:
        return {
            'laplace': self.laplace,
            'encoder': self.encoder.to_params(),
            'priors': self.priors.tolist(),
            'tables': [t.tolist() for t in self.tables],
        }

    @classmethod
    def from_params(cls, schema, class_names, params):
        return cls(
            schema, class_names,
            encoder=SymbolicEncoder.from_params(params['encoder']),
            priors=params['priors'],
            tables=params['tables'],
            laplace=params['laplace'],
        )


def train_naive_bayes(ds: Dataset, laplace: float = DEFAULT_LAPLACE, bins: int = DEFAULT_DISCRETIZATION_BINS) -> NaiveBayesModel:
    if laplace < 0:
        raise ValidationError("laplace must be non-negative.")
    require_samples(ds)
    encoder = SymbolicEncoder.fit(ds, bins=bins)
    codes = encoder.encode_dataset(ds)
    labels = ds.labels()
    model = NaiveBayesModel(
        ds.schema, ds.class_names,
        encoder=encoder,
        priors=class_priors(labels, ds.n_classes, laplace),
        tables=class_conditionals(codes, labels, encoder.arities, ds.n_classes, laplace),
        laplace=laplace,
    )
    logger.debug("Naive Bayes trained on %d samples, %d attributes", len(ds), ds.n_attributes)
    return model
