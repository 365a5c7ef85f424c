import csv
import io
import logging
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from rest_framework.exceptions import ParseError, ValidationError

from .constants import (
    AttributeKind,
    CLASS_COLUMN,
    DEFAULT_DISCRETIZATION_BINS,
    DiscretizationMethod,
    SAMPLE_ID_COLUMN,
    SYMBOL_SEPARATOR,
)
from .schema import AttributeSpec, Dataset, FeatureVector

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------

_TYPED_ATTRIBUTE = re.compile(r'^(?P<name>.+):(?P<kind>numeric|binary|nominal\{(?P<categories>.*)\})$', re.DOTALL)
_TYPED_CLASS = re.compile(r'^' + re.escape(CLASS_COLUMN) + r'\{(?P<names>.*)\}$', re.DOTALL)


def _symbols(text: str) -> tuple[str, ...]:
    return tuple(text.split(SYMBOL_SEPARATOR)) if text else ()


def attribute_header(attr: AttributeSpec) -> str:
    """`size:numeric`, `is_dll:binary`, `packer:nominal{upx|aspack}`."""
    if attr.kind == AttributeKind.NOMINAL:
        return f"{attr.name}:{AttributeKind.NOMINAL.value}{{{SYMBOL_SEPARATOR.join(attr.categories)}}}"
    return f"{attr.name}:{AttributeKind(attr.kind).value}"


def class_header(class_names: Sequence[str]) -> str:
    """`class{malware|benign}`: the class column with its declared order."""
    return f"{CLASS_COLUMN}{{{SYMBOL_SEPARATOR.join(class_names)}}}"


def _declared_attribute(cell: str) -> AttributeSpec | None:
    match = _TYPED_ATTRIBUTE.match(cell)
    if match is None:
        return None
    if match['categories'] is not None:
        return AttributeSpec(match['name'], AttributeKind.NOMINAL, _symbols(match['categories']))
    return AttributeSpec(match['name'], AttributeKind(match['kind']))


def load_csv(path, class_names: Sequence[str] | None = None) -> Dataset:
    """Read a dataset CSV.

    Header cells written by `dataset_to_csv` declare their kind
    (`name:numeric`, `name:binary`, `name:nominal{a|b}`) and the class column
    declares the class order (`class{a|b}`); such files load back exactly.
    Plain header cells fall back to inference: a column is binary when every
    non-empty cell is `0` or `1`, numeric when every non-empty cell parses as
    a finite float, nominal otherwise (sorted categories), and plain `class`
    labels are sorted. A `sample_id` column gives the sample identifiers.
    With `class_names` given, labels outside it are loaded as unlabeled
    samples.
    """
    source = Path(path)
    if not source.exists():
        raise ValidationError(f"Dataset not found: {source}")
    with source.open(newline='', encoding='utf-8') as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise ParseError(f"{source}: missing header row.")

    stripped = [cell.strip() for cell in rows[0]]
    # cells of a typed file are taken verbatim
    typed = any(_TYPED_ATTRIBUTE.match(cell) or _TYPED_CLASS.match(cell) for cell in stripped)
    header = list(rows[0]) if typed else stripped
    width = len(header)
    declared = [_declared_attribute(cell) for cell in header]
    body = []
    for row_number, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != width:
            raise ParseError(f"row {row_number}: {len(row)} cells, expected {width}")
        body.append(list(row) if typed else [cell.strip() for cell in row])

    class_col = id_col = None
    declared_classes = None
    for index, cell in enumerate(header):
        if declared[index] is not None:
            continue
        if cell == SAMPLE_ID_COLUMN:
            id_col = index
        elif cell == CLASS_COLUMN:
            class_col = index
        elif (match := _TYPED_CLASS.match(cell)) is not None:
            class_col, declared_classes = index, _symbols(match['names'])
    attr_cols = [i for i in range(width) if i not in (class_col, id_col)]

    schema = tuple(
        declared[i] or _infer_attribute(header[i], [row[i] for row in body]) for i in attr_cols
    )

    if class_names is None:
        class_names = declared_classes
    if class_names is None:
        observed = {row[class_col] for row in body if row[class_col]} if class_col is not None else set()
        class_names = tuple(sorted(observed))
    class_index = {name: k for k, name in enumerate(class_names)}

    samples = []
    for offset, row in enumerate(body):
        label = None
        if class_col is not None and row[class_col]:
            label = class_index.get(row[class_col])
            if label is None:
                logger.warning("%s row %d: unknown class '%s' loaded unlabeled", source, offset + 2, row[class_col])
        sample_id = row[id_col] if id_col is not None else f"row{offset + 2}"
        values = tuple(
            _parse_cell(attr, row[col], offset + 2) for attr, col in zip(schema, attr_cols)
        )
        samples.append(FeatureVector(sample_id=sample_id, label=label, values=values))

    return Dataset(schema=schema, class_names=tuple(class_names), samples=tuple(samples))


def _infer_attribute(name: str, cells: list[str]) -> AttributeSpec:
    present = [cell for cell in cells if cell != '']
    if all(cell in ('0', '1') for cell in present) and present:
        return AttributeSpec(name=name, kind=AttributeKind.BINARY)
    if all(_is_finite_number(cell) for cell in present):
        return AttributeSpec(name=name, kind=AttributeKind.NUMERIC)
    categories = tuple(sorted(set(present)))
    if len(categories) < 2:
        raise ParseError(
            f"column {name}: one distinct value '{categories[0]}'; "
            f"declare it as {name}:{AttributeKind.NOMINAL.value}{{...}}"
        )
    return AttributeSpec(name=name, kind=AttributeKind.NOMINAL, categories=categories)


def _is_finite_number(cell: str) -> bool:
    try:
        return math.isfinite(float(cell))
    except ValueError:
        return False


def _parse_cell(attr: AttributeSpec, cell: str, row_number: int):
    if cell == '':
        return None
    try:
        if attr.kind == AttributeKind.BINARY:
            return int(cell)
        if attr.kind == AttributeKind.NUMERIC:
            return float(cell)
        return attr.categories.index(cell)
    except ValueError:
        raise ParseError(f"row {row_number}: '{cell}' is not a valid {attr.kind} value for {attr.name}") from None


def dataset_to_csv(ds: Dataset) -> str:
    """CSV text with a typed header, a `sample_id` column first and the class column last."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow([SAMPLE_ID_COLUMN, *(attribute_header(attr) for attr in ds.schema), class_header(ds.class_names)])
    for sample in ds.samples:
        writer.writerow([
            sample.sample_id,
            *(attr.render(value) for attr, value in zip(ds.schema, sample.values)),
            '' if sample.label is None else ds.class_names[sample.label],
        ])
    return buffer.getvalue()


def save_csv(ds: Dataset, path) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(dataset_to_csv(ds), encoding='utf-8', newline='')


# ---------------------------------------------------------------------------
# Discretization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Discretizer:
    """Cut points per attribute; value v falls in bin #(cuts < v)."""

    method: str
    cuts: Mapping[int, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        for attr, points in self.cuts.items():
            if any(b <= a for a, b in zip(points, points[1:])):
                raise ValidationError(f"Cut points for attribute {attr} are not strictly increasing.")

    def bin_of(self, attr: int, value: float) -> int:
        return int(np.searchsorted(self.cuts[attr], value, side='left'))

    def merge(self, other: 'Discretizer') -> 'Discretizer':
        return Discretizer(method=self.method, cuts={**self.cuts, **other.cuts})

    def apply(self, ds: Dataset) -> Dataset:
        """Replace every fitted numeric attribute by a nominal bin attribute.

        An attribute without cut points falls in a single bin and is carried
        as a binary column that is 0 wherever present.
        """
        schema = list(ds.schema)
        for attr, points in self.cuts.items():
            name = ds.schema[attr].name
            if points:
                schema[attr] = AttributeSpec(name=name, kind=AttributeKind.NOMINAL, categories=bin_labels(points))
            else:
                schema[attr] = AttributeSpec(name=name, kind=AttributeKind.BINARY)
        samples = []
        for sample in ds.samples:
            values = list(sample.values)
            for attr in self.cuts:
                if values[attr] is not None:
                    values[attr] = self.bin_of(attr, values[attr])
            samples.append(replace(sample, values=tuple(values)))
        return Dataset(schema=tuple(schema), class_names=ds.class_names, samples=tuple(samples))


def bin_labels(points: Sequence[float]) -> tuple[str, ...]:
    edges = ['-inf', *(format(p, '.6g') for p in points), 'inf']
    return tuple(f"({lo},{hi}]" if hi != 'inf' else f"({lo},{hi})" for lo, hi in zip(edges, edges[1:]))


def fit_discretizer(
    ds: Dataset,
    attr: int,
    bins: int = DEFAULT_DISCRETIZATION_BINS,
    method: str = DiscretizationMethod.EQUAL_FREQUENCY,
) -> Discretizer:
    spec = ds.schema[attr]
    if spec.kind != AttributeKind.NUMERIC:
        raise ValidationError(f"Attribute {spec.name} is not numeric.")

    if method == DiscretizationMethod.EQUAL_FREQUENCY:
        if bins < 2:
            raise ValidationError("Equal-frequency discretization needs at least 2 bins.")
        values = np.array([v for v in ds.column(attr) if v is not None], dtype=float)
        points = _quantile_cuts(values, bins)
    elif method == DiscretizationMethod.SUPERVISED_THRESHOLD:
        pairs = [
            (s.values[attr], s.label) for s in ds.samples
            if s.values[attr] is not None and s.label is not None
        ]
        if ds.samples and not pairs and any(s.values[attr] is not None for s in ds.samples):
            raise ValidationError("Supervised discretization needs labeled samples.")
        points = _best_threshold(
            np.array([v for v, _ in pairs], dtype=float),
            np.array([k for _, k in pairs], dtype=np.int64),
        )
    else:
        raise ValidationError(f"Unknown discretization method '{method}'.")

    return Discretizer(method=method, cuts={attr: points})


def fit_numeric_discretizer(
    ds: Dataset,
    bins: int = DEFAULT_DISCRETIZATION_BINS,
    method: str = DiscretizationMethod.EQUAL_FREQUENCY,
) -> Discretizer:
    """One discretizer covering every numeric attribute of `ds`."""
    merged = Discretizer(method=method)
    for attr, spec in enumerate(ds.schema):
        if spec.kind == AttributeKind.NUMERIC:
            merged = merged.merge(fit_discretizer(ds, attr, bins=bins, method=method))
    return merged


def _quantile_cuts(values: np.ndarray, bins: int) -> tuple[float, ...]:
    if values.size == 0:
        return ()
    top = values.max()
    quantiles = np.quantile(values, [i / bins for i in range(1, bins)])
    # a cut at the maximum would leave its upper bin empty
    return tuple(float(q) for q in np.unique(quantiles) if q < top)


def _best_threshold(values: np.ndarray, labels: np.ndarray) -> tuple[float, ...]:
    distinct = np.unique(values)
    if distinct.size < 2:
        return ()
    n_classes = int(labels.max()) + 1
    order = np.argsort(values, kind='stable')
    values, labels = values[order], labels[order]
    total = np.bincount(labels, minlength=n_classes)
    base = _entropy_of_counts(total)

    best_gain, best_cut = 0.0, None
    for lo, hi in zip(distinct, distinct[1:]):
        cut = (lo + hi) / 2.0
        left = np.bincount(labels[values <= cut], minlength=n_classes)
        right = total - left
        n = labels.size
        gain = base - (left.sum() / n) * _entropy_of_counts(left) - (right.sum() / n) * _entropy_of_counts(right)
        if gain > best_gain + 1e-12:
            best_gain, best_cut = gain, float(cut)
    return () if best_cut is None else (best_cut,)


def _entropy_of_counts(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


# ---------------------------------------------------------------------------
# Min-max normalization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MinMaxNormalizer:
    """Stored (min, max) per numeric attribute, reapplied verbatim to unseen data."""

    ranges: Mapping[int, tuple[float, float]]

    def scale(self, attr: int, value: float) -> float:
        low, high = self.ranges[attr]
        if high == low:
            return 0.0
        return (value - low) / (high - low)

    def apply(self, ds: Dataset) -> Dataset:
        samples = []
        for sample in ds.samples:
            values = list(sample.values)
            for attr in self.ranges:
                if values[attr] is not None:
                    values[attr] = self.scale(attr, values[attr])
            samples.append(replace(sample, values=tuple(values)))
        return replace(ds, samples=tuple(samples))


def fit_minmax(ds: Dataset) -> MinMaxNormalizer:
    ranges = {}
    for attr, spec in enumerate(ds.schema):
        if spec.kind != AttributeKind.NUMERIC:
            continue
        present = [v for v in ds.column(attr) if v is not None]
        ranges[attr] = (min(present), max(present)) if present else (0.0, 0.0)
    return MinMaxNormalizer(ranges=ranges)


def normalize_minmax(ds: Dataset) -> tuple[Dataset, MinMaxNormalizer]:
    normalizer = fit_minmax(ds)
    return normalizer.apply(ds), normalizer


# ---------------------------------------------------------------------------
# Stratified folds
# ---------------------------------------------------------------------------

def stratified_folds(ds: Dataset, k: int, seed: int) -> list[tuple[int, ...]]:
    """Partition sample indices into `k` class-balanced folds.

    Indices of each class are shuffled with `seed`, the per-class lists are
    concatenated in class order and dealt round-robin, so fold sizes and
    per-class counts both differ by at most one.
    """
    if k < 2:
        raise ValidationError("Cross-validation needs at least 2 folds.")
    if k > len(ds):
        raise ValidationError(f"Cannot build {k} folds from {len(ds)} samples.")
    ds.require_labels()

    rng = np.random.default_rng(seed)
    labels = ds.labels()
    dealt = []
    for klass in range(ds.n_classes):
        members = np.flatnonzero(labels == klass)
        dealt.extend(int(i) for i in rng.permutation(members))

    folds = [[] for _ in range(k)]
    for position, index in enumerate(dealt):
        folds[position % k].append(index)
    return [tuple(sorted(fold)) for fold in folds]
