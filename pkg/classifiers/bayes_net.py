"""Bayesian network classifiers with the class as parentless root.

`naive` gives every attribute the class as its only parent. `tan` adds one
attribute parent per attribute along a maximum spanning tree of conditional
mutual information, rooted at the first attribute.
"""
import logging

import numpy as np
from rest_framework.exceptions import ValidationError

from featuresets.constants import DEFAULT_DISCRETIZATION_BINS
from featuresets.schema import Dataset

from .base import Prediction, SymbolicEncoder, TrainedModel, require_samples
from .constants import BayesNetStructure, DEFAULT_LAPLACE, Method
from .naive_bayes import accumulate, class_conditionals, class_priors, normalize_log_scores, smoothed

logger = logging.getLogger(__name__)


def conditional_mutual_information(x: np.ndarray, y: np.ndarray, labels: np.ndarray, n_classes: int) -> float:
    """I(X;Y | C) in nats from codes, over rows where both values are present."""
    present = (x >= 0) & (y >= 0)
    x, y, labels = x[present], y[present], labels[present]
    if x.size == 0:
        return 0.0
    counts = np.zeros((x.max() + 1, y.max() + 1, n_classes))
    np.add.at(counts, (x, y, labels), 1.0)
    n_xc = counts.sum(axis=1, keepdims=True)
    n_yc = counts.sum(axis=0, keepdims=True)
    n_c = counts.sum(axis=(0, 1), keepdims=True)
    mask = counts > 0
    joint = counts[mask]
    denominator = np.broadcast_to(n_xc, counts.shape)[mask] * np.broadcast_to(n_yc, counts.shape)[mask]
    ratio = joint * np.broadcast_to(n_c, counts.shape)[mask] / denominator
    return float(max(0.0, (joint / x.size * np.log(ratio)).sum()))


def maximum_spanning_tree(weights: np.ndarray) -> list[int | None]:
    """Prim's algorithm from attribute 0; equal weights go to the lowest child, then lowest parent."""
    n = weights.shape[0]
    parents: list[int | None] = [None] * n
    in_tree = [0] if n else []
    while len(in_tree) < n:
        best = None
        for child in range(n):
            if child in in_tree:
                continue
            for parent in sorted(in_tree):
                if best is None or weights[parent, child] > best[0]:
                    best = (weights[parent, child], parent, child)
        _, parent, child = best
        parents[child] = parent
        in_tree.append(child)
    return parents


class BayesNetModel(TrainedModel):
    method = Method.BAYES_NET

    def __init__(self, schema, class_names, encoder, structure, parents, priors, tables, cond_tables, laplace):
        super().__init__(schema, class_names)
        self.encoder = encoder
        self.structure = structure
        self.parents = list(parents)
        self.priors = np.asarray(priors, dtype=float)
        self.tables = [np.asarray(t, dtype=float) for t in tables]
        self.cond_tables = [None if t is None else np.asarray(t, dtype=float) for t in cond_tables]
        self.laplace = laplace

    def predict(self, values) -> Prediction:
        codes = self.encoder.encode(values)
        with np.errstate(divide='ignore'):
            log_scores = np.log(self.priors)
        for attr, code in enumerate(codes):
            if code is None:
                continue
            parent = self.parents[attr]
            if parent is None or codes[parent] is None:
                column = self.tables[attr][:, code]
            else:
                column = self.cond_tables[attr][:, codes[parent], code]
            log_scores = accumulate(log_scores, column)
        return Prediction.from_scores(normalize_log_scores(log_scores))

    def get_params(self) -> dict:
        return {
            'structure': self.structure,
            'laplace': self.laplace,
            'encoder': self.encoder.to_params(),
            'parents': self.parents,
            'priors': self.priors.tolist(),
            'tables': [t.tolist() for t in self.tables],
            'cond_tables': [None if t is None else t.tolist() for t in self.cond_tables],
        }

    @classmethod
    def from_params(cls, schema, class_names, params):
        return cls(
            schema, class_names,
            encoder=SymbolicEncoder.from_params(params['encoder']),
            structure=params['structure'],
            parents=params['parents'],
            priors=params['priors'],
            tables=params['tables'],
            cond_tables=params['cond_tables'],
            laplace=params['laplace'],
        )


def _parent_conditionals(codes, labels, arities, parents, n_classes, laplace):
    """P(value | class, parent value) as (classes x parent arity x arity) tables."""
    tables = []
    for attr, parent in enumerate(parents):
        if parent is None:
            tables.append(None)
            continue
        counts = np.zeros((n_classes, arities[parent], arities[attr]))
        present = (codes[:, attr] >= 0) & (codes[:, parent] >= 0)
        np.add.at(counts, (labels[present], codes[present, parent], codes[present, attr]), 1.0)
        tables.append(smoothed(counts, laplace))
    return tables


def train_bayes_net(
    ds: Dataset,
    structure: str = BayesNetStructure.TAN,
    laplace: float = DEFAULT_LAPLACE,
    bins: int = DEFAULT_DISCRETIZATION_BINS,
) -> BayesNetModel:
    if structure not in BayesNetStructure.values:
        raise ValidationError(f"Unknown BayesNet structure '{structure}'.")
    if laplace < 0:
        raise ValidationError("laplace must be non-negative.")
    require_samples(ds)

    encoder = SymbolicEncoder.fit(ds, bins=bins)
    codes = encoder.encode_dataset(ds)
    labels = ds.labels()
    n_attributes = ds.n_attributes

    if structure == BayesNetStructure.TAN and n_attributes < 2:
        logger.warning("TAN needs at least two attributes, got %d; using the naive structure", n_attributes)
        structure = BayesNetStructure.NAIVE

    parents: list[int | None] = [None] * n_attributes
    if structure == BayesNetStructure.TAN:
        weights = np.zeros((n_attributes, n_attributes))
        for i in range(n_attributes):
            for j in range(i + 1, n_attributes):
                weights[i, j] = weights[j, i] = conditional_mutual_information(
                    codes[:, i], codes[:, j], labels, ds.n_classes
                )
        parents = maximum_spanning_tree(weights)

    return BayesNetModel(
        ds.schema, ds.class_names,
        encoder=encoder,
        structure=structure,
        parents=parents,
        priors=class_priors(labels, ds.n_classes, laplace),
        tables=class_conditionals(codes, labels, encoder.arities, ds.n_classes, laplace),
        cond_tables=_parent_conditionals(codes, labels, encoder.arities, parents, ds.n_classes, laplace),
        laplace=laplace,
    )
