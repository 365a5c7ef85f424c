"""k-nearest-neighbour classifier over min-max scaled instances."""
import numpy as np
from rest_framework.exceptions import ValidationError

from featuresets.constants import AttributeKind
from featuresets.schema import Dataset
from featuresets.services import fit_minmax

from .base import Prediction, TrainedModel, require_samples
from .constants import DEFAULT_K, DISTANCE_EPSILON, KnnWeighting, Method


class KnnModel(TrainedModel):
    method = Method.KNN

    def __init__(self, schema, class_names, instances, labels, ranges, k: int, weighting: str):
        super().__init__(schema, class_names)
        self.instances = np.asarray(instances, dtype=float).reshape(len(labels), len(self.schema))
        self.labels = np.asarray(labels, dtype=np.int64)
        self.ranges = {int(attr): tuple(bounds) for attr, bounds in ranges.items()}
        self.k = k
        self.weighting = weighting
        self.nominal = np.array([attr.kind == AttributeKind.NOMINAL for attr in self.schema], dtype=bool)

    def scale(self, values) -> np.ndarray:
        """Numeric values in training min-max units, NaN where missing."""
        out = np.full(len(values), np.nan)
        for attr, value in enumerate(values):
            if value is None:
                continue
            if attr in self.ranges:
                low, high = self.ranges[attr]
                out[attr] = 0.0 if high == low else (value - low) / (high - low)
            else:
                out[attr] = value
        return out

    def distances(self, values) -> np.ndarray:
        query = self.scale(values)
        diff = np.abs(self.instances - query)
        diff[:, self.nominal] = (self.instances[:, self.nominal] != query[self.nominal]).astype(float)
        diff[np.isnan(self.instances) | np.isnan(query)] = 1.0
        return np.sqrt((diff ** 2).sum(axis=1))

    def neighbours(self, values) -> tuple[np.ndarray, np.ndarray]:
        """Indices and distances of the k nearest instances, distance ties in sample order."""
        if self.k > len(self.labels):
            raise ValidationError(f"k={self.k} exceeds the {len(self.labels)} stored instances.")
        d = self.distances(values)
        order = np.argsort(d, kind='stable')[:self.k]
        return order, d[order]

    def predict(self, values) -> Prediction:
        order, d = self.neighbours(values)
        if self.weighting == KnnWeighting.INVERSE_DISTANCE:
            weights = 1.0 / (d + DISTANCE_EPSILON)
        else:
            weights = np.ones(order.size)
        votes = np.bincount(self.labels[order], weights=weights, minlength=self.n_classes)
        return Prediction.from_scores(votes / votes.sum())

    def get_params(self) -> dict:
        return {
            'k': self.k,
            'weighting': self.weighting,
            'ranges': {str(attr): list(bounds) for attr, bounds in self.ranges.items()},
            'labels': self.labels.tolist(),
            # NaN is not valid JSON
            'instances': [[None if np.isnan(v) else float(v) for v in row] for row in self.instances],
        }

    @classmethod
    def from_params(cls, schema, class_names, params):
        instances = [[np.nan if v is None else v for v in row] for row in params['instances']]
        return cls(schema, class_names, instances, params['labels'], params['ranges'], params['k'], params['weighting'])


def train_knn(ds: Dataset, k: int = DEFAULT_K, weighting: str = KnnWeighting.UNIFORM) -> KnnModel:
    if k < 1:
        raise ValidationError("k must be at least 1.")
    if weighting not in KnnWeighting.values:
        raise ValidationError(f"Unknown weighting '{weighting}'.")
    require_samples(ds)
    normalizer = fit_minmax(ds)
    scaled = normalizer.apply(ds)
    return KnnModel(
        ds.schema, ds.class_names,
        instances=scaled.matrix(),
        labels=ds.labels(),
        ranges=normalizer.ranges,
        k=k,
        weighting=weighting,
    )
