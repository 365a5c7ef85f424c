"""C4.5 decision tree: gain-ratio splits, numeric thresholds, pessimistic pruning."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from rest_framework.exceptions import ValidationError
from scipy.stats import norm

from featuresets.constants import AttributeKind
from featuresets.schema import Dataset

from .base import Prediction, TrainedModel, require_samples
from .constants import DEFAULT_MIN_LEAF, DEFAULT_PRUNE_CF, Method

logger = logging.getLogger(__name__)

GAIN_EPSILON = 1e-12


@dataclass
class TreeNode:
    counts: tuple[float, ...]
    support: int
    attr: int | None = None
    threshold: float | None = None
    majority: int = 0
    children: list[TreeNode] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def label(self) -> int:
        return int(np.argmax(self.counts))

    def depth(self) -> int:
        return 0 if self.is_leaf else 1 + max(child.depth() for child in self.children)

    def leaves(self) -> int:
        return 1 if self.is_leaf else sum(child.leaves() for child in self.children)

    def branch_of(self, value) -> int:
        if value is None or (isinstance(value, float) and math.isnan(value)):
            return self.majority
        if self.threshold is not None:
            return 0 if value <= self.threshold else 1
        return int(value)

    def to_dict(self) -> dict:
        data = {'counts': list(self.counts), 'support': self.support}
        if not self.is_leaf:
            data.update(
                attr=self.attr,
                threshold=self.threshold,
                majority=self.majority,
                children=[child.to_dict() for child in self.children],
            )
        return data

    @classmethod
    def from_dict(cls, data: dict) -> TreeNode:
        return cls(
            counts=tuple(data['counts']),
            support=data['support'],
            attr=data.get('attr'),
            threshold=data.get('threshold'),
            majority=data.get('majority', 0),
            children=[cls.from_dict(child) for child in data.get('children', [])],
        )


def _entropy_rows(counts: np.ndarray) -> np.ndarray:
    """Entropy in bits of each row of a count matrix."""
    counts = np.atleast_2d(counts).astype(float)
    totals = counts.sum(axis=1, keepdims=True)
    with np.errstate(invalid='ignore', divide='ignore'):
        p = np.where(totals > 0, counts / np.where(totals > 0, totals, 1.0), 0.0)
        terms = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=1)


@dataclass(frozen=True)
class SplitCandidate:
    attr: int
    gain: float
    ratio: float
    threshold: float | None
    n_branches: int


def _score_partition(branch_counts: np.ndarray, n_rows: int) -> tuple[float, float]:
    """(gain, gain ratio) of a partition of the present rows; gain scaled by the known fraction."""
    sizes = branch_counts.sum(axis=1)
    n_present = sizes.sum()
    base = _entropy_rows(branch_counts.sum(axis=0))[0]
    remainder = float((sizes / n_present * _entropy_rows(branch_counts)).sum())
    gain = (n_present / n_rows) * (base - remainder)
    split_info = float(_entropy_rows(sizes[sizes > 0])[0])
    return gain, (gain / split_info if split_info > 0 else 0.0)


def best_numeric_threshold(values: np.ndarray, labels: np.ndarray, n_classes: int) -> tuple[float, np.ndarray] | None:
    """Midpoint cut with the highest gain (lowest cut on ties) and its 2-branch class counts."""
    present = ~np.isnan(values)
    values, labels = values[present], labels[present]
    if np.unique(values).size < 2:
        return None
    order = np.argsort(values, kind='stable')
    values, labels = values[order], labels[order]
    left = np.cumsum(np.eye(n_classes)[labels], axis=0)
    total = left[-1]
    boundaries = np.flatnonzero(values[:-1] < values[1:])
    left_counts = left[boundaries]
    right_counts = total - left_counts
    n = values.size
    gains = (
        _entropy_rows(total)[0]
        - left_counts.sum(axis=1) / n * _entropy_rows(left_counts)
        - right_counts.sum(axis=1) / n * _entropy_rows(right_counts)
    )
    best = int(np.argmax(gains))
    cut = boundaries[best]
    threshold = float((values[cut] + values[cut + 1]) / 2.0)
    return threshold, np.vstack([left_counts[best], right_counts[best]])


def evaluate_split(X: np.ndarray, labels: np.ndarray, kinds, arities, attr: int, n_classes: int) -> SplitCandidate | None:
    """Gain and gain ratio of splitting rows on `attr`, or None if it yields fewer than two branches."""
    values = X[:, attr]
    n_rows = values.size
    if kinds[attr] == AttributeKind.NUMERIC:
        found = best_numeric_threshold(values, labels, n_classes)
        if found is None:
            return None
        threshold, branch_counts = found
    else:
        present = ~np.isnan(values)
        branch_counts = np.zeros((arities[attr], n_classes))
        np.add.at(branch_counts, (values[present].astype(np.int64), labels[present]), 1.0)
        threshold = None
    if np.count_nonzero(branch_counts.sum(axis=1)) < 2:
        return None
    gain, ratio = _score_partition(branch_counts, n_rows)
    return SplitCandidate(attr, gain, ratio, threshold, branch_counts.shape[0])


def choose_split(candidates: list[SplitCandidate]) -> SplitCandidate | None:
    """Highest gain ratio among attributes whose gain reaches the mean positive gain.

    With no positive gain anywhere the lowest-index usable attribute is split,
    which lets interactions such as XOR be separated one level further down.
    """
    if not candidates:
        return None
    positive = [c for c in candidates if c.gain > GAIN_EPSILON]
    if not positive:
        return candidates[0]
    mean_gain = sum(c.gain for c in positive) / len(positive)
    eligible = [c for c in positive if c.gain >= mean_gain - GAIN_EPSILON]
    return max(eligible, key=lambda c: (c.ratio, -c.attr))


def added_errors(n: float, errors: float, cf: float) -> float:
    """Upper confidence bound on extra errors at a leaf of `n` samples (pessimistic estimate)."""
    if n <= 0:
        return 0.0
    if errors < 1:
        base = n * (1 - cf ** (1.0 / n))
        if errors == 0:
            return base
        return base + errors * (added_errors(n, 1.0, cf) - base)
    if errors + 0.5 >= n:
        return max(n - errors, 0.0)
    z = norm.ppf(1 - cf)
    f = (errors + 0.5) / n
    r = (f + z * z / (2 * n) + z * math.sqrt(f / n - f * f / n + z * z / (4 * n * n))) / (1 + z * z / n)
    return r * n - errors


def _leaf_estimate(node: TreeNode, cf: float) -> float:
    if node.support == 0:
        return 0.0
    errors = node.support - max(node.counts)
    return errors + added_errors(node.support, errors, cf)


def prune(node: TreeNode, cf: float) -> tuple[TreeNode, float]:
    """Bottom-up subtree replacement; returns the pruned node and its estimated errors."""
    if node.is_leaf:
        return node, _leaf_estimate(node, cf)
    subtree = 0.0
    children = []
    for child in node.children:
        pruned, estimate = prune(child, cf)
        children.append(pruned)
        subtree += estimate
    as_leaf = _leaf_estimate(node, cf)
    if as_leaf <= subtree + 1e-9:
        return TreeNode(counts=node.counts, support=node.support), as_leaf
    return TreeNode(node.counts, node.support, node.attr, node.threshold, node.majority, children), subtree


class TreeBuilder:
    def __init__(self, ds: Dataset, min_leaf: int):
        self.X = ds.matrix()
        self.labels = ds.labels()
        self.kinds = [attr.kind for attr in ds.schema]
        self.arities = [attr.arity for attr in ds.schema]
        self.n_classes = ds.n_classes
        self.min_leaf = min_leaf

    def build(self, rows: np.ndarray) -> TreeNode:
        labels = self.labels[rows]
        counts = np.bincount(labels, minlength=self.n_classes).astype(float)
        node = TreeNode(counts=tuple(counts), support=int(rows.size))
        if np.count_nonzero(counts) <= 1 or rows.size < self.min_leaf:
            return node

        X = self.X[rows]
        candidates = [
            c for attr in range(len(self.kinds))
            if (c := evaluate_split(X, labels, self.kinds, self.arities, attr, self.n_classes)) is not None
        ]
        best = choose_split(candidates)
        if best is None:
            return node

        values = X[:, best.attr]
        present = ~np.isnan(values)
        branches = np.full(rows.size, -1, dtype=np.int64)
        if best.threshold is not None:
            branches[present] = (values[present] > best.threshold).astype(np.int64)
        else:
            branches[present] = values[present].astype(np.int64)
        sizes = np.bincount(branches[present], minlength=best.n_branches)
        majority = int(np.argmax(sizes))
        branches[~present] = majority

        node.attr, node.threshold, node.majority = best.attr, best.threshold, majority
        for branch in range(best.n_branches):
            child_rows = rows[branches == branch]
            if child_rows.size == 0:
                node.children.append(TreeNode(counts=node.counts, support=0))
            else:
                node.children.append(self.build(child_rows))
        return node


class C45Model(TrainedModel):
    method = Method.C45

    def __init__(self, schema, class_names, root: TreeNode, min_leaf: int, prune_cf: float | None):
        super().__init__(schema, class_names)
        self.root = root
        self.min_leaf = min_leaf
        self.prune_cf = prune_cf

    def leaf_for(self, values) -> TreeNode:
        node = self.root
        while not node.is_leaf:
            node = node.children[node.branch_of(values[node.attr])]
        return node

    def predict(self, values) -> Prediction:
        counts = np.asarray(self.leaf_for(values).counts, dtype=float)
        return Prediction.from_scores(counts / counts.sum())

    def get_params(self) -> dict:
        return {'min_leaf': self.min_leaf, 'prune_cf': self.prune_cf, 'tree': self.root.to_dict()}

    @classmethod
    def from_params(cls, schema, class_names, params):
        return cls(schema, class_names, TreeNode.from_dict(params['tree']), params['min_leaf'], params['prune_cf'])


def train_c45(ds: Dataset, min_leaf: int = DEFAULT_MIN_LEAF, prune_cf: float | None = DEFAULT_PRUNE_CF) -> C45Model:
    if min_leaf < 1:
        raise ValidationError("min_leaf must be at least 1.")
    if prune_cf is not None and not 0 < prune_cf <= 0.5:
        raise ValidationError("prune_cf must lie in (0, 0.5].")
    require_samples(ds)

    root = TreeBuilder(ds, min_leaf).build(np.arange(len(ds)))
    grown = root.leaves()
    if prune_cf is not None:
        root, _ = prune(root, prune_cf)
    logger.debug("C4.5 tree: %d leaves grown, %d after pruning, depth %d", grown, root.leaves(), root.depth())
    return C45Model(ds.schema, ds.class_names, root, min_leaf, prune_cf)
