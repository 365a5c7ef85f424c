"""Train/classify contract shared by every classifier.

A trained model is bound to the schema it was fitted on (by fingerprint) and
to the class names of its training set. Models are treated as immutable once
returned by a trainer; `classify` never mutates them.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, ClassVar, Mapping, Sequence

import numpy as np
from rest_framework.exceptions import ValidationError

from featuresets.constants import AttributeKind, DEFAULT_DISCRETIZATION_BINS
from featuresets.schema import AttributeSpec, Dataset, FeatureVector, schema_fingerprint
from featuresets.services import fit_minmax, fit_numeric_discretizer

from .constants import Method


@dataclass(frozen=True)
class ModelSpec:
    method: str
    params: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.method not in Method.values:
            raise ValidationError(f"Unknown method '{self.method}'.")

    @property
    def label(self) -> str:
        return Method(self.method).label


@dataclass(frozen=True)
class Prediction:
    label: int
    scores: tuple[float, ...]

    @classmethod
    def from_scores(cls, scores) -> 'Prediction':
        """Argmax with ties going to the lowest class index."""
        scores = tuple(float(s) for s in scores)
        return cls(label=int(np.argmax(scores)), scores=scores)


def require_samples(ds: Dataset):
    if not ds.samples:
        raise ValidationError("Training dataset is empty.")
    ds.require_labels()


class TrainedModel(ABC):
    method: ClassVar[str]

    def __init__(self, schema: Sequence[AttributeSpec], class_names: Sequence[str]):
        self.schema = tuple(schema)
        self.class_names = tuple(class_names)
        self.fingerprint = schema_fingerprint(self.schema)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def check_values(self, values: Sequence) -> tuple:
        if len(values) != len(self.schema):
            raise ValidationError(
                f"Vector has {len(values)} values, model expects {len(self.schema)}."
            )
        for attr, value in zip(self.schema, values):
            if not attr.accepts(value):
                raise ValidationError(f"Attribute {attr.name}: value {value!r} does not match a {attr.kind} attribute.")
        return tuple(values)

    def classify(self, sample: FeatureVector | Sequence) -> Prediction:
        values = sample.values if isinstance(sample, FeatureVector) else sample
        return self.predict(self.check_values(values))

    @abstractmethod
    def predict(self, values: tuple) -> Prediction:
        """Score an already validated value tuple."""

    @abstractmethod
    def get_params(self) -> dict:
        """JSON-serializable learned parameters."""

    @classmethod
    @abstractmethod
    def from_params(cls, schema, class_names, params: dict) -> 'TrainedModel':
        ...


# ---------------------------------------------------------------------------
# Encoders
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymbolicEncoder:
    """Maps every attribute to a symbol index; numerics go through equal-frequency bins."""

    arities: tuple[int, ...]
    cuts: Mapping[int, tuple[float, ...]]

    @classmethod
    def fit(cls, ds: Dataset, bins: int = DEFAULT_DISCRETIZATION_BINS) -> 'SymbolicEncoder':
        cuts = dict(fit_numeric_discretizer(ds, bins=bins).cuts)
        arities = tuple(len(cuts[i]) + 1 if i in cuts else attr.arity for i, attr in enumerate(ds.schema))
        return cls(arities=arities, cuts=cuts)

    def encode(self, values: Sequence) -> list[int | None]:
        out = []
        for attr, value in enumerate(values):
            if value is None:
                out.append(None)
            elif attr in self.cuts:
                out.append(int(np.searchsorted(self.cuts[attr], value, side='left')))
            else:
                out.append(int(value))
        return out

    def encode_dataset(self, ds: Dataset) -> np.ndarray:
        """Symbol codes with -1 where missing."""
        codes = np.full((len(ds), len(self.arities)), -1, dtype=np.int64)
        for row, sample in enumerate(ds.samples):
            for col, code in enumerate(self.encode(sample.values)):
                if code is not None:
                    codes[row, col] = code
        return codes

    def to_params(self) -> dict:
        return {'arities': list(self.arities), 'cuts': {str(k): list(v) for k, v in self.cuts.items()}}

    @classmethod
    def from_params(cls, params: dict) -> 'SymbolicEncoder':
        return cls(
            arities=tuple(params['arities']),
            cuts={int(k): tuple(v) for k, v in params['cuts'].items()},
        )


@dataclass(frozen=True)
class VectorEncoder:
    """Real-valued encoding for geometric models.

    Numerics are min-max scaled with the training ranges, binaries kept as
    0/1 and nominals one-hot encoded. A missing numeric or binary value takes
    the training mean of its encoded column; a missing nominal is all zeros.
    """

    kinds: tuple[str, ...]
    widths: tuple[int, ...]
    ranges: Mapping[int, tuple[float, float]]
    means: tuple[float, ...]

    @classmethod
    def fit(cls, ds: Dataset) -> 'VectorEncoder':
        kinds = tuple(attr.kind for attr in ds.schema)
        widths = tuple(attr.arity if attr.kind == AttributeKind.NOMINAL else 1 for attr in ds.schema)
        ranges = dict(fit_minmax(ds).ranges)
        partial = cls(kinds=kinds, widths=widths, ranges=ranges, means=(0.0,) * len(kinds))
        means = []
        for attr, kind in enumerate(kinds):
            present = [partial._scale(attr, v) for v in ds.column(attr) if v is not None]
            means.append(float(np.mean(present)) if present and kind != AttributeKind.NOMINAL else 0.0)
        return cls(kinds=kinds, widths=widths, ranges=ranges, means=tuple(means))

    @property
    def width(self) -> int:
        return sum(self.widths)

    def _scale(self, attr: int, value) -> float:
        if attr not in self.ranges:
            return float(value)
        low, high = self.ranges[attr]
        return 0.0 if high == low else (float(value) - low) / (high - low)

    def encode(self, values: Sequence) -> np.ndarray:
        out = np.zeros(self.width)
        offset = 0
        for attr, (kind, width, value) in enumerate(zip(self.kinds, self.widths, values)):
            if kind == AttributeKind.NOMINAL:
                if value is not None:
                    out[offset + int(value)] = 1.0
            else:
                out[offset] = self.means[attr] if value is None else self._scale(attr, value)
            offset += width
        return out

    def encode_dataset(self, ds: Dataset) -> np.ndarray:
        if not ds.samples:
            return np.zeros((0, self.width))
        return np.vstack([self.encode(s.values) for s in ds.samples])

    def to_params(self) -> dict:
        return {
            'kinds': list(self.kinds),
            'widths': list(self.widths),
            'ranges': {str(k): list(v) for k, v in self.ranges.items()},
            'means': list(self.means),
        }

    @classmethod
    def from_params(cls, params: dict) -> 'VectorEncoder':
        return cls(
            kinds=tuple(params['kinds']),
            widths=tuple(params['widths']),
            ranges={int(k): tuple(v) for k, v in params['ranges'].items()},
            means=tuple(params['means']),
        )
