"""Information Gain ranking and correlation-based subset selection (CFS)."""
import csv
import heapq
import io
import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Hashable, Iterable

import numpy as np
from rest_framework.exceptions import ValidationError

from featuresets.constants import DiscretizationMethod
from featuresets.schema import Dataset
from featuresets.services import fit_numeric_discretizer

from .constants import (
    BEST_FIRST_STALE_LIMIT,
    CfsSearch,
    MERIT_EPSILON,
    MERIT_FORMAT,
    RANKING_COLUMNS,
    SelectionKind,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeatureRanking:
    merits: tuple[float, ...]
    ordering: tuple[int, ...]
    names: tuple[str, ...]

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(RANKING_COLUMNS)
        for index in self.ordering:
            writer.writerow([format(self.merits[index], MERIT_FORMAT), self.names[index]])
        return buffer.getvalue()


@dataclass(frozen=True)
class FeatureSubset:
    indices: tuple[int, ...]
    merit: float
    names: tuple[str, ...] = ()

    def __post_init__(self):
        if len(set(self.indices)) != len(self.indices):
            raise ValidationError("Selected attribute indices must be distinct.")


# ---------------------------------------------------------------------------
# Entropy measures
# ---------------------------------------------------------------------------

def entropy(labels: Iterable[Hashable]) -> float:
    """Shannon entropy in bits of a class multiset."""
    counts = np.array(list(Counter(labels).values()), dtype=float)
    if counts.size == 0:
        raise ValidationError("Entropy of an empty set is undefined.")
    p = counts / counts.sum()
    return float(-(p * np.log2(p)).sum())


def _entropy_of(codes: np.ndarray) -> float:
    if codes.size == 0:
        return 0.0
    _, counts = np.unique(codes, return_counts=True)
    p = counts / codes.size
    return float(-(p * np.log2(p)).sum())


def _conditional_entropy(target: np.ndarray, given: np.ndarray) -> float:
    total = 0.0
    for value in np.unique(given):
        mask = given == value
        total += mask.sum() / given.size * _entropy_of(target[mask])
    return total


def _codes(ds: Dataset, attr: int) -> np.ndarray:
    """Symbol codes of a symbolic column, -1 where missing."""
    return np.array([-1 if v is None else int(v) for v in ds.column(attr)], dtype=np.int64)


def _mutual_information(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """(I(X;Y), H(X), H(Y)) over the rows where both are present."""
    present = (x >= 0) & (y >= 0)
    x, y = x[present], y[present]
    if x.size == 0:
        return 0.0, 0.0, 0.0
    h_y = _entropy_of(y)
    return max(0.0, h_y - _conditional_entropy(y, x)), _entropy_of(x), h_y


def symmetric_uncertainty(x: np.ndarray, y: np.ndarray) -> float:
    """SU = 2·I(X;Y) / (H(X) + H(Y)), 0 when both are constant."""
    gain, h_x, h_y = _mutual_information(x, y)
    if h_x + h_y == 0:
        return 0.0
    return min(1.0, 2.0 * gain / (h_x + h_y))


def symbolic_view(ds: Dataset) -> Dataset:
    """Numeric attributes replaced by their supervised single-threshold bins."""
    if all(attr.is_symbolic for attr in ds.schema):
        return ds
    return fit_numeric_discretizer(ds, method=DiscretizationMethod.SUPERVISED_THRESHOLD).apply(ds)


def info_gain(ds: Dataset, attr: int) -> float:
    """H(class) − H(class | attr) over the labeled samples where attr is present."""
    if not ds.schema[attr].is_symbolic:
        ds = symbolic_view(ds.select_attributes([attr]))
        attr = 0
    gain, _, _ = _mutual_information(_codes(ds, attr), ds.labels())
    return gain


# ---------------------------------------------------------------------------
# Ranking and thresholds
# ---------------------------------------------------------------------------

def rank_features(ds: Dataset, jobs: int = 1) -> FeatureRanking:
    ds.require_labels()
    symbolic = symbolic_view(ds)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        merits = tuple(pool.map(lambda attr: info_gain(symbolic, attr), range(ds.n_attributes)))
    ordering = tuple(sorted(range(len(merits)), key=lambda i: (-merits[i], i)))
    return FeatureRanking(merits=merits, ordering=ordering, names=tuple(ds.attribute_names))


def select_by_threshold(ranking: FeatureRanking, threshold: float) -> FeatureSubset:
    """Attributes with merit ≥ threshold, in ranking order; subset merit is their summed gain."""
    if threshold < 0:
        raise ValidationError("Merit threshold must be non-negative.")
    chosen = tuple(i for i in ranking.ordering if ranking.merits[i] >= threshold)
    return FeatureSubset(
        indices=chosen,
        merit=sum(ranking.merits[i] for i in chosen),
        names=tuple(ranking.names[i] for i in chosen),
    )


# ---------------------------------------------------------------------------
# CFS
# ---------------------------------------------------------------------------

class CfsEvaluator:
    """Subset merit k·r̄cf / √(k + k(k−1)·r̄ff) with symmetric-uncertainty correlations."""

    def __init__(self, ds: Dataset):
        ds.require_labels()
        symbolic = symbolic_view(ds)
        self.columns = [_codes(symbolic, attr) for attr in range(symbolic.n_attributes)]
        labels = symbolic.labels()
        self.class_correlation = tuple(symmetric_uncertainty(col, labels) for col in self.columns)
        self.feature_correlation = lru_cache(maxsize=None)(self._feature_correlation)

    def _feature_correlation(self, i: int, j: int) -> float:
        return symmetric_uncertainty(self.columns[i], self.columns[j])

    def merit(self, subset) -> float:
        subset = sorted(subset)
        k = len(subset)
        if k == 0:
            return 0.0
        rcf = sum(self.class_correlation[i] for i in subset)
        rff = sum(self.feature_correlation(a, b) for pos, a in enumerate(subset) for b in subset[pos + 1:])
        return rcf / math.sqrt(k + 2.0 * rff)


def _greedy_forward(evaluator: CfsEvaluator, n_attributes: int) -> tuple[list[int], float]:
    current, current_merit = [], 0.0
    while True:
        best, best_merit = None, -1.0
        for candidate in range(n_attributes):
            if candidate in current:
                continue
            merit = evaluator.merit(current + [candidate])
            if merit > best_merit:
                best, best_merit = candidate, merit
        if best is None or best_merit <= current_merit + MERIT_EPSILON:
            return current, current_merit
        current.append(best)
        current_merit = best_merit


def _best_first(evaluator: CfsEvaluator, n_attributes: int) -> tuple[list[int], float]:
    best, best_merit = (), 0.0
    frontier = [(-0.0, ())]
    visited = {()}
    stale = 0
    while frontier and stale < BEST_FIRST_STALE_LIMIT:
        _, subset = heapq.heappop(frontier)
        improved = False
        for candidate in range(n_attributes):
            if candidate in subset:
                continue
            child = tuple(sorted(subset + (candidate,)))
            if child in visited:
                continue
            visited.add(child)
            merit = evaluator.merit(child)
            heapq.heappush(frontier, (-merit, child))
            if merit > best_merit + MERIT_EPSILON:
                best, best_merit, improved = child, merit, True
        stale = 0 if improved else stale + 1
    return list(best), best_merit


def cfs_select(ds: Dataset, search: str = CfsSearch.GREEDY) -> FeatureSubset:
    if ds.n_attributes == 0:
        raise ValidationError("CFS needs at least one attribute.")
    evaluator = CfsEvaluator(ds)
    if search == CfsSearch.GREEDY:
        chosen, merit = _greedy_forward(evaluator, ds.n_attributes)
    elif search == CfsSearch.BEST_FIRST:
        chosen, merit = _best_first(evaluator, ds.n_attributes)
    else:
        raise ValidationError(f"Unknown CFS search '{search}'.")
    chosen = tuple(sorted(chosen))
    logger.info("CFS (%s) kept %d of %d attributes, merit %.4f", search, len(chosen), ds.n_attributes, merit)
    return FeatureSubset(indices=chosen, merit=merit, names=tuple(ds.attribute_names[i] for i in chosen))


# ---------------------------------------------------------------------------
# Selection modes as used by the pipeline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SelectionMode:
    kind: str = SelectionKind.NONE
    threshold: float = 0.0
    search: str = CfsSearch.GREEDY

    @property
    def label(self) -> str:
        return SelectionKind(self.kind).label

    def __str__(self):
        if self.kind == SelectionKind.INFOGAIN:
            return f"infogain:{self.threshold:g}"
        if self.kind == SelectionKind.CFS and self.search == CfsSearch.BEST_FIRST:
            return 'cfs:best_first'
        return str(self.kind)


def parse_selection(text: str) -> SelectionMode:
    """`none`, `infogain:<threshold>`, `cfs` or `cfs:best_first`."""
    kind, _, argument = text.strip().partition(':')
    if kind == SelectionKind.NONE and not argument:
        return SelectionMode()
    if kind == SelectionKind.INFOGAIN:
        try:
            threshold = float(argument)
        except ValueError as exc:
            raise ValidationError(f"Selection '{text}': threshold is not a number.") from exc
        if threshold < 0:
            raise ValidationError(f"Selection '{text}': threshold must be non-negative.")
        return SelectionMode(kind=SelectionKind.INFOGAIN, threshold=threshold)
    if kind == SelectionKind.CFS and argument in ('', *CfsSearch.values):
        return SelectionMode(kind=SelectionKind.CFS, search=argument or CfsSearch.GREEDY)
    raise ValidationError(f"Unknown selection '{text}'.")


@dataclass(frozen=True)
class SelectionResult:
    dataset: Dataset
    subset: FeatureSubset
    ranking: FeatureRanking | None = None


def apply_selection(ds: Dataset, mode: SelectionMode, jobs: int = 1) -> SelectionResult:
    if mode.kind == SelectionKind.NONE:
        every = tuple(range(ds.n_attributes))
        return SelectionResult(ds, FeatureSubset(every, 0.0, tuple(ds.attribute_names)))
    if mode.kind == SelectionKind.INFOGAIN:
        ranking = rank_features(ds, jobs=jobs)
        subset = select_by_threshold(ranking, mode.threshold)
    else:
        ranking = None
        subset = cfs_select(ds, search=mode.search)
    if not subset.indices:
        raise ValidationError(f"Selection {mode} kept no attributes.")
    # keep the original column order
    return SelectionResult(ds.select_attributes(sorted(subset.indices)), subset, ranking)
