"""In-memory dataset model shared by every other app.

A `Dataset` is a schema (ordered `AttributeSpec`s), an ordered tuple of class
names and a tuple of `FeatureVector`s. Values are stored per attribute kind:

    numeric  -> float (finite)
    binary   -> int in {0, 1}
    nominal  -> int index into AttributeSpec.categories

`None` marks a missing value. All three types are frozen; transformations
return new objects.
"""
from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from rest_framework.exceptions import ValidationError

from .constants import AttributeKind, FLOAT_FORMAT, SYMBOL_SEPARATOR


def is_valid_symbol(text: str) -> bool:
    """Category and class names: non-empty, no surrounding blanks, no `|`."""
    return bool(text) and text == text.strip() and SYMBOL_SEPARATOR not in text


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    kind: str
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.name:
            raise ValidationError("Attribute name must not be empty.")
        if self.kind not in AttributeKind.values:
            raise ValidationError(f"Attribute {self.name}: unknown kind '{self.kind}'.")
        if self.kind == AttributeKind.NOMINAL:
            if len(self.categories) < 2:
                raise ValidationError(f"Attribute {self.name}: nominal kind needs at least two categories.")
            if len(set(self.categories)) != len(self.categories):
                raise ValidationError(f"Attribute {self.name}: duplicate categories.")
            bad = [c for c in self.categories if not is_valid_symbol(c)]
            if bad:
                raise ValidationError(f"Attribute {self.name}: invalid categories {bad}.")
        elif self.categories:
            raise ValidationError(f"Attribute {self.name}: only nominal kinds carry categories.")

    @property
    def is_symbolic(self) -> bool:
        return self.kind != AttributeKind.NUMERIC

    @property
    def arity(self) -> int:
        """Number of distinct symbols (0 for numeric attributes)."""
        if self.kind == AttributeKind.BINARY:
            return 2
        if self.kind == AttributeKind.NOMINAL:
            return len(self.categories)
        return 0

    def accepts(self, value) -> bool:
        if value is None:
            return True
        if self.kind == AttributeKind.NUMERIC:
            return isinstance(value, (int, float, np.integer, np.floating)) and math.isfinite(value)
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            return False
        if self.kind == AttributeKind.BINARY:
            return value in (0, 1)
        return 0 <= value < len(self.categories)

    def render(self, value) -> str:
        """Text form of a value as written to CSV."""
        if value is None:
            return ''
        if self.kind == AttributeKind.NOMINAL:
            return self.categories[value]
        if self.kind == AttributeKind.BINARY:
            return str(int(value))
        return format(float(value), FLOAT_FORMAT)


@dataclass(frozen=True)
class FeatureVector:
    sample_id: str
    label: int | None
    values: tuple


@dataclass(frozen=True)
class Dataset:
    schema: tuple[AttributeSpec, ...]
    class_names: tuple[str, ...]
    samples: tuple[FeatureVector, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, 'schema', tuple(self.schema))
        object.__setattr__(self, 'class_names', tuple(self.class_names))
        object.__setattr__(self, 'samples', tuple(self.samples))
        names = [attr.name for attr in self.schema]
        duplicates = sorted(name for name, count in Counter(names).items() if count > 1)
        if duplicates:
            raise ValidationError(f"Duplicate attribute names: {duplicates}")
        if len(set(self.class_names)) != len(self.class_names):
            raise ValidationError("Duplicate class names.")
        bad = [name for name in self.class_names if not is_valid_symbol(name)]
        if bad:
            raise ValidationError(f"Invalid class names: {bad}")
        for row, sample in enumerate(self.samples):
            self._check_sample(row, sample)

    def _check_sample(self, row: int, sample: FeatureVector):
        if len(sample.values) != len(self.schema):
            raise ValidationError(
                f"Sample {sample.sample_id}: {len(sample.values)} values, "
                f"expected {len(self.schema)}."
            )
        if sample.label is not None and not 0 <= sample.label < len(self.class_names):
            raise ValidationError(f"Sample {sample.sample_id}: label {sample.label} out of range.")
        for attr, value in zip(self.schema, sample.values):
            if not attr.accepts(value):
                raise ValidationError(
                    f"Sample {sample.sample_id}: invalid value {value!r} for attribute {attr.name}."
                )

    def __len__(self):
        return len(self.samples)

    @property
    def n_attributes(self) -> int:
        return len(self.schema)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def attribute_names(self) -> list[str]:
        return [attr.name for attr in self.schema]

    def index_of(self, name: str) -> int:
        for index, attr in enumerate(self.schema):
            if attr.name == name:
                return index
        raise ValidationError(f"Unknown attribute '{name}'.")

    def labels(self) -> np.ndarray:
        """Class indices as an int array; unlabeled samples are -1."""
        return np.array(
            [-1 if s.label is None else s.label for s in self.samples], dtype=np.int64
        )

    def column(self, attr: int) -> list:
        return [s.values[attr] for s in self.samples]

    def matrix(self) -> np.ndarray:
        """Raw values as floats with NaN for missing entries."""
        out = np.full((len(self.samples), len(self.schema)), np.nan)
        for row, sample in enumerate(self.samples):
            for col, value in enumerate(sample.values):
                if value is not None:
                    out[row, col] = value
        return out

    def class_counts(self) -> list[int]:
        counts = Counter(s.label for s in self.samples if s.label is not None)
        return [counts.get(k, 0) for k in range(len(self.class_names))]

    def fingerprint(self) -> str:
        """Stable digest of the schema (names, kinds, categories)."""
        return schema_fingerprint(self.schema)

    def require_labels(self):
        unlabeled = [s.sample_id for s in self.samples if s.label is None]
        if unlabeled:
            raise ValidationError(f"{len(unlabeled)} samples have no class label (first: {unlabeled[0]}).")

    def require_trainable(self):
        """Every declared class must occur at least once and every sample carries a label."""
        if not self.samples:
            raise ValidationError("Training dataset is empty.")
        self.require_labels()
        missing = [name for name, count in zip(self.class_names, self.class_counts()) if count == 0]
        if missing:
            raise ValidationError(f"Classes without training samples: {missing}")

    def subset(self, indices: Iterable[int]) -> Dataset:
        return replace(self, samples=tuple(self.samples[i] for i in indices))

    def select_attributes(self, indices: Sequence[int]) -> Dataset:
        indices = list(indices)
        return Dataset(
            schema=tuple(self.schema[i] for i in indices),
            class_names=self.class_names,
            samples=tuple(
                replace(s, values=tuple(s.values[i] for i in indices)) for s in self.samples
            ),
        )

    def restrict_classes(self, names: Sequence[str]) -> Dataset:
        """Keep only samples of `names`, relabelled in the given order."""
        mapping = {}
        for new_index, name in enumerate(names):
            if name not in self.class_names:
                raise ValidationError(f"Unknown class '{name}'.")
            mapping[self.class_names.index(name)] = new_index
        return Dataset(
            schema=self.schema,
            class_names=tuple(names),
            samples=tuple(
                replace(s, label=mapping[s.label]) for s in self.samples if s.label in mapping
            ),
        )


def schema_fingerprint(schema: Sequence[AttributeSpec]) -> str:
    digest = hashlib.sha256()
    for attr in schema:
        digest.update(f"{attr.name}\x1f{attr.kind}\x1f{'|'.join(attr.categories)}\x1e".encode())
    return digest.hexdigest()[:16]
