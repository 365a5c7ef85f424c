import itertools
import math
import random
from collections import Counter

import numpy as np
from django.test import SimpleTestCase
from rest_framework.exceptions import ValidationError

from featuresets.constants import AttributeKind
from featuresets.schema import AttributeSpec, Dataset, FeatureVector

from .constants import CfsSearch, SelectionKind
from .services import (
    CfsEvaluator,
    FeatureRanking,
    apply_selection,
    cfs_select,
    entropy,
    info_gain,
    parse_selection,
    rank_features,
    select_by_threshold,
    symmetric_uncertainty,
)


def symbolic_dataset(rows, labels, arity=3, class_names=('A', 'B')):
    """Nominal attributes with `arity` categories; `None` cells are missing."""
    width = len(rows[0]) if rows else 0
    categories = tuple(f"v{i}" for i in range(arity))
    return Dataset(
        schema=tuple(AttributeSpec(f"a{j}", AttributeKind.NOMINAL, categories) for j in range(width)),
        class_names=class_names,
        samples=tuple(FeatureVector(f"s{i}", label, tuple(row)) for i, (row, label) in enumerate(zip(rows, labels))),
    )


def oracle_gain(values, labels):
    """IG by explicit partition counting over rows where the value is present."""
    pairs = [(v, y) for v, y in zip(values, labels) if v is not None]
    if not pairs:
        return 0.0

    def h(items):
        counts = Counter(items)
        total = sum(counts.values())
        return -sum(c / total * math.log2(c / total) for c in counts.values())

    partitions = {}
    for v, y in pairs:
        partitions.setdefault(v, []).append(y)
    return h([y for _, y in pairs]) - sum(len(part) / len(pairs) * h(part) for part in partitions.values())


class EntropyTests(SimpleTestCase):
    """Tests for entropy"""

    def test_pure(self):
        self.assertEqual(entropy(['A', 'A', 'A']), 0)

    def test_uniform_binary(self):
        self.assertEqual(entropy(['A', 'B']), 1.0)

    def test_one_third(self):
        self.assertAlmostEqual(entropy(['A', 'A', 'B', 'B', 'B', 'B']), 0.9183, delta=1e-4)

    def test_empty(self):
        with self.assertRaises(ValidationError):
            entropy([])


class InfoGainTests(SimpleTestCase):
    """Tests for info_gain"""

    def test_perfect_predictor(self):
        labels = [0, 1, 1, 0, 1, 0, 0]
        ds = symbolic_dataset([[y] for y in labels], labels)
        self.assertAlmostEqual(info_gain(ds, 0), entropy(labels), delta=1e-12)

    def test_constant_attribute(self):
        ds = symbolic_dataset([[2]] * 6, [0, 1, 0, 1, 1, 1])
        self.assertEqual(info_gain(ds, 0), 0.0)

    def test_numeric_attribute_uses_best_threshold(self):
        ds = Dataset(
            schema=(AttributeSpec('f1', AttributeKind.NUMERIC),),
            class_names=('A', 'B'),
            samples=tuple(FeatureVector(f"s{i}", y, (float(v),)) for i, (v, y) in enumerate(zip([1, 2, 9, 10], [0, 0, 1, 1]))),
        )
        self.assertAlmostEqual(info_gain(ds, 0), 1.0, delta=1e-12)

    def test_matches_partition_oracle(self):
        """Test 100 random 12-sample datasets with missing values against the oracle"""
        rng = random.Random(41)
        for _ in range(100):
            labels = [rng.randrange(3) for _ in range(12)]
            rows = [[rng.choice([None, 0, 1, 2, 3]) for _ in range(3)] for _ in range(12)]
            ds = symbolic_dataset(rows, labels, arity=4, class_names=('A', 'B', 'C'))
            for attr in range(3):
                expected = oracle_gain([r[attr] for r in rows], labels)
                self.assertAlmostEqual(info_gain(ds, attr), max(0.0, expected), delta=1e-9)

    def test_permutation_invariant(self):
        rng = random.Random(2)
        rows = [[rng.randrange(3)] for _ in range(30)]
        labels = [rng.randrange(2) for _ in range(30)]
        order = list(range(30))
        rng.shuffle(order)
        shuffled = symbolic_dataset([rows[i] for i in order], [labels[i] for i in order])

        self.assertAlmostEqual(info_gain(symbolic_dataset(rows, labels), 0), info_gain(shuffled, 0), delta=1e-12)


class ThresholdTests(SimpleTestCase):
    """Tests for select_by_threshold"""

    def setUp(self):
        self.ranking = FeatureRanking(
            merits=(0.377, 0.278, 0.118, 0.099),
            ordering=(0, 1, 2, 3),
            names=('ShortInfo_Directories', 'ShortInfo_FileSize', 'SuspiciousAPI', 'Url'),
        )

    def test_merit_cut(self):
        subset = select_by_threshold(self.ranking, 0.1)
        self.assertEqual(subset.names, ('ShortInfo_Directories', 'ShortInfo_FileSize', 'SuspiciousAPI'))

    def test_zero_keeps_all(self):
        self.assertEqual(select_by_threshold(self.ranking, 0).indices, (0, 1, 2, 3))

    def test_above_max_is_empty(self):
        self.assertEqual(select_by_threshold(self.ranking, 0.5).indices, ())

    def test_ranking_csv(self):
        ds = symbolic_dataset([[0, 1], [1, 1], [0, 0], [1, 0]], [0, 1, 0, 1])
        ranking = rank_features(ds)

        self.assertEqual(ranking.ordering, (0, 1))
        self.assertEqual(ranking.to_csv().splitlines(), ['merit,attribute', '1.00000,a0', '0.00000,a1'])


class SymmetricUncertaintyTests(SimpleTestCase):
    def test_bounds_and_identity(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            x = rng.integers(-1, 4, size=25)
            y = rng.integers(-1, 3, size=25)
            su = symmetric_uncertainty(x, y)
            self.assertTrue(0.0 <= su <= 1.0)
            if len(set(x[x >= 0])) > 1:
                self.assertAlmostEqual(symmetric_uncertainty(x, x), 1.0, delta=1e-12)


class CfsTests(SimpleTestCase):
    """Tests for cfs_select"""

    def _noise_with_predictor(self, rng, n=40, noise=3):
        labels = [i % 2 for i in range(n)]
        rng.shuffle(labels)
        rows = [[rng.randrange(3) for _ in range(noise)] for _ in range(n)]
        for row, label in zip(rows, labels):
            row.insert(1, label)
        return symbolic_dataset(rows, labels)

    def test_predictor_among_noise(self):
        ds = self._noise_with_predictor(random.Random(12))
        for search in CfsSearch.values:
            self.assertEqual(cfs_select(ds, search=search).indices, (1,))

    def test_duplicate_predictors(self):
        labels = [0, 1, 1, 0, 1, 0, 0, 1]
        ds = symbolic_dataset([[y, 2, y] for y in labels], labels)
        subset = cfs_select(ds)

        self.assertEqual(len(subset.indices), 1)
        self.assertIn(subset.indices[0], (0, 2))

    def test_all_constant(self):
        ds = symbolic_dataset([[1, 0]] * 6, [0, 1, 0, 1, 0, 1])
        self.assertEqual(cfs_select(ds).indices, ())

    def test_beats_rejected_singletons(self):
        """Test greedy merit against every subset of up to five attributes"""
        rng = random.Random(77)
        for _ in range(40):
            width = rng.randint(1, 5)
            labels = [rng.randrange(2) for _ in range(20)]
            rows = [[y if rng.random() < 0.3 * j else rng.randrange(3) for j in range(width)] for y in labels]
            ds = symbolic_dataset(rows, labels)
            evaluator = CfsEvaluator(ds)
            subset = cfs_select(ds)

            self.assertAlmostEqual(subset.merit, evaluator.merit(subset.indices), delta=1e-12)
            for attr in range(width):
                self.assertGreaterEqual(subset.merit + 1e-12, evaluator.merit([attr]))
            best_overall = max(
                evaluator.merit(c) for k in range(1, width + 1) for c in itertools.combinations(range(width), k)
            )
            self.assertLessEqual(subset.merit, best_overall + 1e-12)


class SelectionModeTests(SimpleTestCase):
    """Tests for parse_selection and apply_selection"""

    def test_parse(self):
        self.assertEqual(parse_selection('none').kind, SelectionKind.NONE)
        self.assertEqual(parse_selection('infogain:0.02').threshold, 0.02)
        self.assertEqual(parse_selection('cfs').search, CfsSearch.GREEDY)
        self.assertEqual(parse_selection('cfs:best_first').search, CfsSearch.BEST_FIRST)
        self.assertEqual(str(parse_selection('infogain:0.1')), 'infogain:0.1')

    def test_parse_errors(self):
        for text in ('infogain:x', 'infogain:-1', 'gini', 'cfs:beam'):
            with self.assertRaises(ValidationError):
                parse_selection(text)

    def test_infogain_keeps_column_order(self):
        labels = [0, 1, 0, 1, 1, 0]
        ds = symbolic_dataset([[2, y, 1 - y] for y in labels], labels)
        result = apply_selection(ds, parse_selection('infogain:0.5'))

        self.assertEqual(result.dataset.attribute_names, ['a1', 'a2'])
        self.assertIsNotNone(result.ranking)

    def test_empty_selection_is_an_error(self):
        ds = symbolic_dataset([[1]] * 4, [0, 1, 0, 1])
        with self.assertRaises(ValidationError):
            apply_selection(ds, parse_selection('infogain:0.1'))
