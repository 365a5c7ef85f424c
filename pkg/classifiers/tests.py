import math
import random
from collections import Counter

import numpy as np
from django.test import SimpleTestCase
from rest_framework.exceptions import ParseError, ValidationError

from featuresets.constants import AttributeKind
from featuresets.schema import AttributeSpec, Dataset, FeatureVector

from .ann import Network, hidden_layers, train_ann
from .base import ModelSpec, Prediction
from .bayes_net import train_bayes_net
from .c45 import added_errors, train_c45
from .constants import AnnPreset, BayesNetStructure, KnnWeighting, Method, SvmKernel
from .knn import train_knn
from .naive_bayes import train_naive_bayes
from .services import classify, dump_model, load_model, train_model, validate_params
from .svm import SmoSolver, train_svm


def nominal_dataset(rows, labels, arities, class_names=('A', 'B')):
    schema = tuple(
        AttributeSpec(f"a{j}", AttributeKind.NOMINAL, tuple(f"v{i}" for i in range(arity)))
        for j, arity in enumerate(arities)
    )
    samples = tuple(FeatureVector(f"s{i}", y, tuple(row)) for i, (row, y) in enumerate(zip(rows, labels)))
    return Dataset(schema=schema, class_names=class_names, samples=samples)


def binary_dataset(rows, labels, class_names=('A', 'B')):
    width = len(rows[0]) if rows else 0
    schema = tuple(AttributeSpec(f"b{j}", AttributeKind.BINARY) for j in range(width))
    samples = tuple(FeatureVector(f"s{i}", y, tuple(row)) for i, (row, y) in enumerate(zip(rows, labels)))
    return Dataset(schema=schema, class_names=class_names, samples=samples)


def numeric_dataset(rows, labels, class_names=('A', 'B')):
    width = len(rows[0]) if len(rows) else 0
    schema = tuple(AttributeSpec(f"f{j}", AttributeKind.NUMERIC) for j in range(width))
    samples = tuple(
        FeatureVector(f"s{i}", int(y), tuple(float(v) for v in row)) for i, (row, y) in enumerate(zip(rows, labels))
    )
    return Dataset(schema=schema, class_names=class_names, samples=samples)


def training_accuracy(model, ds) -> float:
    hits = sum(1 for s in ds.samples if model.classify(s).label == s.label)
    return hits / len(ds)


def random_nominal(rng, n_samples, arities, n_classes, missing=0.0):
    labels = [rng.randrange(n_classes) for _ in range(n_samples)]
    rows = [
        [None if rng.random() < missing else rng.randrange(arity) for arity in arities]
        for _ in range(n_samples)
    ]
    names = ('A', 'B', 'C')[:n_classes]
    return nominal_dataset(rows, labels, arities, names)


def naive_bayes_oracle(ds, values, laplace=1.0):
    """Posterior by explicit count-and-multiply over the training samples."""
    m = ds.n_classes
    n = len(ds)
    scores = []
    for k in range(m):
        members = [s for s in ds.samples if s.label == k]
        p = (len(members) + laplace) / (n + m * laplace)
        for attr, value in enumerate(values):
            if value is None:
                continue
            present = [s.values[attr] for s in members if s.values[attr] is not None]
            arity = ds.schema[attr].arity
            p *= (present.count(value) + laplace) / (len(present) + arity * laplace)
        scores.append(p)
    total = sum(scores)
    return [s / total for s in scores]


class PredictionTests(SimpleTestCase):
    def test_ties_go_to_lowest_class(self):
        self.assertEqual(Prediction.from_scores([0.25, 0.5, 0.5]).label, 1)

    def test_model_spec_rejects_unknown_method(self):
        with self.assertRaises(ValidationError):
            ModelSpec(method='random_forest')
        self.assertEqual(ModelSpec(Method.KNN).label, 'k-NN')


class NaiveBayesTests(SimpleTestCase):
    """Tests for train_naive_bayes"""

    def test_single_class(self):
        ds = nominal_dataset([[0], [1], [1]], [0, 0, 0], [2], class_names=('A',))
        model = train_naive_bayes(ds)
        for value in (0, 1, None):
            self.assertEqual(model.classify((value,)).scores, (1.0,))

    def test_raw_counts(self):
        ds = nominal_dataset([[0], [1]], [0, 1], [2])
        prediction = train_naive_bayes(ds, laplace=0).classify((0,))

        self.assertEqual(prediction.label, 0)
        self.assertAlmostEqual(prediction.scores[0], 1.0, delta=1e-12)

    def test_matches_count_oracle(self):
        """Test 100 random datasets against the count-and-multiply oracle"""
        rng = random.Random(3)
        for _ in range(100):
            arities = [rng.randint(2, 3) for _ in range(rng.randint(1, 4))]
            ds = random_nominal(rng, rng.randint(1, 10), arities, rng.randint(2, 3), missing=0.1)
            model = train_naive_bayes(ds)
            for _ in range(5):
                query = [rng.choice([None, *range(a)]) for a in arities]
                expected = naive_bayes_oracle(ds, query)
                scores = model.classify(query).scores
                for got, want in zip(scores, expected):
                    self.assertAlmostEqual(got, want, delta=1e-9)
                self.assertAlmostEqual(sum(scores), 1.0, delta=1e-9)

    def test_uninformative_features_give_uniform_scores(self):
        ds = nominal_dataset([[0], [1], [0], [1]], [0, 0, 1, 1], [2])
        for score in train_naive_bayes(ds).classify((1,)).scores:
            self.assertAlmostEqual(score, 0.5, delta=1e-12)

    def test_tables_are_distributions(self):
        ds = random_nominal(random.Random(9), 10, [3, 2], 2)
        model = train_naive_bayes(ds)
        self.assertAlmostEqual(model.priors.sum(), 1.0, delta=1e-9)
        for table in model.tables:
            np.testing.assert_allclose(table.sum(axis=1), 1.0, atol=1e-9)

    def test_class_independent_scaling_keeps_argmax(self):
        ds = random_nominal(random.Random(4), 10, [3, 3], 2)
        model = train_naive_bayes(ds)
        before = [model.classify((a, b)).label for a in range(3) for b in range(3)]
        model.tables[0] = model.tables[0] * 3.0
        after = [model.classify((a, b)).label for a in range(3) for b in range(3)]
        self.assertEqual(before, after)

    def test_numeric_attributes_are_discretized(self):
        ds = numeric_dataset([[v] for v in range(20)], [0] * 10 + [1] * 10)
        model = train_naive_bayes(ds)
        self.assertEqual(model.classify((2.0,)).label, 0)
        self.assertEqual(model.classify((17.0,)).label, 1)


class BayesNetTests(SimpleTestCase):
    """Tests for train_bayes_net"""

    def test_naive_structure_matches_naive_bayes(self):
        rng = random.Random(5)
        for _ in range(100):
            arities = [rng.randint(2, 3) for _ in range(rng.randint(1, 4))]
            ds = random_nominal(rng, rng.randint(1, 10), arities, 2, missing=0.1)
            nb = train_naive_bayes(ds)
            bn = train_bayes_net(ds, structure=BayesNetStructure.NAIVE)
            for _ in range(3):
                query = [rng.choice([None, *range(a)]) for a in arities]
                self.assertEqual(nb.classify(query).label, bn.classify(query).label)
                np.testing.assert_allclose(nb.classify(query).scores, bn.classify(query).scores, atol=1e-12)

    def test_tan_links_copied_feature(self):
        rng = random.Random(8)
        labels = [i % 2 for i in range(24)]
        rows = []
        for y in labels:
            a = y if rng.random() < 0.75 else 1 - y
            rows.append([a, a, rng.randrange(2)])
        ds = binary_dataset(rows, labels)
        model = train_bayes_net(ds, structure=BayesNetStructure.TAN)

        self.assertEqual(model.parents[0], None)
        self.assertEqual(model.parents[1], 0)

        def p_given(attr, value, k, parent):
            rows_k = [s.values for s in ds.samples if s.label == k]
            if parent is not None:
                rows_k = [r for r in rows_k if r[parent] == query[parent]]
            return (sum(1 for r in rows_k if r[attr] == value) + 1) / (len(rows_k) + 2)

        for query in [(a, b, c) for a in (0, 1) for b in (0, 1) for c in (0, 1)]:
            joint = []
            for k in (0, 1):
                p = (labels.count(k) + 1) / (len(labels) + 2)
                for attr in range(3):
                    p *= p_given(attr, query[attr], k, model.parents[attr])
                joint.append(p)
            expected = [p / sum(joint) for p in joint]
            np.testing.assert_allclose(model.classify(query).scores, expected, atol=1e-9)

        nb = train_naive_bayes(ds)
        self.assertNotAlmostEqual(model.classify((1, 1, 0)).scores[1], nb.classify((1, 1, 0)).scores[1], places=6)

    def test_empty_feature_set_returns_priors(self):
        ds = Dataset(schema=(), class_names=('A', 'B'), samples=tuple(FeatureVector(f"s{i}", y, ()) for i, y in enumerate([0, 0, 0, 1])))
        with self.assertLogs('classifiers.bayes_net', level='WARNING'):
            model = train_bayes_net(ds, structure=BayesNetStructure.TAN)
        self.assertEqual(model.structure, BayesNetStructure.NAIVE)
        np.testing.assert_allclose(model.classify(()).scores, [4 / 6, 2 / 6], atol=1e-12)

    def test_missing_parent_value_uses_class_conditional(self):
        ds = binary_dataset([[y, y] for y in [0, 1, 0, 1, 1]], [0, 1, 0, 1, 1])
        model = train_bayes_net(ds, structure=BayesNetStructure.TAN)
        self.assertAlmostEqual(sum(model.classify((None, 1)).scores), 1.0, delta=1e-9)


def gain_ratio_oracle(ds):
    """Root attribute per gain ratio over attributes with at least the mean positive gain."""
    labels = list(ds.labels())

    def h(items):
        counts = Counter(items)
        return -sum(c / len(items) * math.log2(c / len(items)) for c in counts.values())

    scored = []
    for attr in range(ds.n_attributes):
        column = ds.column(attr)
        if len(set(column)) < 2:
            continue
        parts = {}
        for v, y in zip(column, labels):
            parts.setdefault(v, []).append(y)
        gain = h(labels) - sum(len(p) / len(labels) * h(p) for p in parts.values())
        ratio = gain / h(column)
        scored.append((attr, gain, ratio))
    positive = [s for s in scored if s[1] > 1e-12]
    if not positive:
        return None, 0.0
    mean = sum(s[1] for s in positive) / len(positive)
    eligible = sorted((s for s in positive if s[1] >= mean - 1e-12), key=lambda s: (-s[2], s[0]))
    margin = eligible[0][2] - eligible[1][2] if len(eligible) > 1 else 1.0
    return eligible[0][0], margin


class C45Tests(SimpleTestCase):
    """Tests for train_c45"""

    def test_xor(self):
        ds = binary_dataset([[0, 0], [0, 1], [1, 0], [1, 1]], [0, 1, 1, 0])
        model = train_c45(ds, prune_cf=None)

        self.assertEqual(model.root.depth(), 2)
        self.assertEqual(training_accuracy(model, ds), 1.0)

    def test_numeric_threshold(self):
        ds = numeric_dataset([[1], [2], [9], [10]], [0, 0, 1, 1])
        model = train_c45(ds)

        self.assertEqual(model.root.attr, 0)
        self.assertEqual(model.root.threshold, 5.5)
        self.assertEqual(model.classify((5.0,)).label, 0)
        self.assertEqual(model.classify((6.0,)).label, 1)

    def test_identical_labels(self):
        ds = binary_dataset([[0, 1], [1, 0], [1, 1]], [1, 1, 1])
        model = train_c45(ds)
        self.assertTrue(model.root.is_leaf)
        self.assertEqual(model.root.support, 3)

    def test_root_matches_gain_ratio_oracle(self):
        """Test 50 random datasets against an exhaustive gain-ratio oracle"""
        rng = random.Random(21)
        checked = 0
        while checked < 50:
            arities = [rng.randint(2, 3) for _ in range(rng.randint(2, 4))]
            ds = random_nominal(rng, rng.randint(6, 12), arities, 2)
            expected, margin = gain_ratio_oracle(ds)
            if expected is None or margin < 1e-9:
                continue
            self.assertEqual(train_c45(ds, prune_cf=None).root.attr, expected)
            checked += 1

    def test_consistent_data_is_fit_exactly(self):
        rng = random.Random(13)
        for _ in range(20):
            rows = [[rng.randrange(3) for _ in range(3)] for _ in range(25)]
            labels = [(a + b * c) % 2 for a, b, c in rows]
            ds = nominal_dataset(rows, labels, [3, 3, 3])
            model = train_c45(ds, prune_cf=None)
            self.assertEqual(training_accuracy(model, ds), 1.0)

    def test_internal_nodes_have_two_children(self):
        ds = random_nominal(random.Random(1), 40, [3, 2, 3], 2)

        def walk(node):
            if not node.is_leaf:
                self.assertGreaterEqual(len(node.children), 2)
                for child in node.children:
                    walk(child)

        walk(train_c45(ds, prune_cf=None).root)

    def test_pruning_shrinks_noise_tree(self):
        ds = random_nominal(random.Random(30), 60, [3, 3, 3], 2)
        unpruned = train_c45(ds, prune_cf=None).root.leaves()
        self.assertLessEqual(train_c45(ds).root.leaves(), unpruned)

    def test_added_errors(self):
        self.assertAlmostEqual(added_errors(6, 0, 0.25), 6 * (1 - 0.25 ** (1 / 6)), delta=1e-12)
        self.assertEqual(added_errors(4, 4, 0.25), 0.0)
        self.assertGreater(added_errors(20, 3, 0.25), 0.0)

    def test_missing_value_follows_majority_branch(self):
        ds = numeric_dataset([[1], [2], [3], [9]], [0, 0, 0, 1])
        model = train_c45(ds, min_leaf=1, prune_cf=None)
        self.assertEqual(model.classify((None,)).label, 0)

    def test_invalid_parameters(self):
        ds = binary_dataset([[0], [1]], [0, 1])
        with self.assertRaises(ValidationError):
            train_c45(ds, prune_cf=0.9)
        with self.assertRaises(ValidationError):
            train_c45(ds, min_leaf=0)


class KnnTests(SimpleTestCase):
    """Tests for train_knn"""

    def test_query_on_training_point(self):
        ds = numeric_dataset([[0, 0], [5, 5], [0, 5]], [0, 1, 1])
        self.assertEqual(train_knn(ds).classify((5.0, 5.0)).label, 1)

    def test_majority_vote(self):
        ds = numeric_dataset([[0], [1], [2], [10]], [0, 0, 1, 1])
        prediction = train_knn(ds, k=3).classify((0.5,))
        self.assertEqual(prediction.label, 0)
        np.testing.assert_allclose(prediction.scores, [2 / 3, 1 / 3])

    def test_inverse_distance(self):
        ds = numeric_dataset([[0], [9], [10]], [1, 0, 0])
        self.assertEqual(train_knn(ds, k=3).classify((0.1,)).label, 0)
        self.assertEqual(train_knn(ds, k=3, weighting=KnnWeighting.INVERSE_DISTANCE).classify((0.1,)).label, 1)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(14)
        points = rng.uniform(-3, 3, size=(20, 2))
        labels = rng.integers(0, 2, size=20)
        ds = numeric_dataset(points, labels)
        model = train_knn(ds, k=5)
        low, high = points.min(axis=0), points.max(axis=0)
        scaled = (points - low) / (high - low)
        for query in rng.uniform(-4, 4, size=(50, 2)):
            q = (query - low) / (high - low)
            d = [math.dist(q, p) for p in scaled]
            nearest = sorted(range(20), key=lambda i: (d[i], i))[:5]
            votes = [sum(1 for i in nearest if labels[i] == k) for k in (0, 1)]
            prediction = model.classify(tuple(query))
            self.assertEqual(prediction.label, 0 if votes[0] >= votes[1] else 1)
            np.testing.assert_allclose(prediction.scores, [v / 5 for v in votes])

    def test_k_larger_than_training_set(self):
        model = train_knn(numeric_dataset([[0], [1]], [0, 1]), k=3)
        with self.assertRaises(ValidationError):
            model.classify((0.0,))

    def test_one_nearest_neighbour_fits_training_data(self):
        rng = np.random.default_rng(2)
        ds = numeric_dataset(rng.normal(size=(30, 3)), rng.integers(0, 2, size=30))
        self.assertEqual(training_accuracy(train_knn(ds), ds), 1.0)

    def test_nominal_mismatch_and_missing(self):
        ds = nominal_dataset([[0, 1], [2, 2]], [0, 1], [3, 3])
        model = train_knn(ds)
        np.testing.assert_allclose(model.distances((0, None)), [1.0, math.sqrt(2)])


class SvmTests(SimpleTestCase):
    """Tests for train_svm"""

    def test_symmetric_pair(self):
        ds = numeric_dataset([[-1, 0], [1, 0]], [0, 1])
        model = train_svm(ds, C=1000.0)
        w, b = model.primal_weights()

        self.assertLessEqual(np.linalg.norm(w - np.array([1.0, 0.0])), 1e-3)
        self.assertLessEqual(abs(b), 1e-3)
        self.assertEqual(len(model.support_vectors), 2)
        self.assertAlmostEqual(2 / np.linalg.norm(w), 2.0, delta=1e-3)
        self.assertTrue(model.converged)

    def test_flipped_label_gets_slack(self):
        xs = [-1.0, -0.8, -0.6, 0.6, 0.8, 1.0]
        labels = [1, 0, 0, 1, 1, 1]
        ds = numeric_dataset([[x] for x in xs], labels)
        model = train_svm(ds, C=0.1)
        margins = model.decision(model.encoder.encode_dataset(ds))

        slack = max(0.0, 1 - margins[0])
        self.assertGreater(slack, 0.0)

    def test_kkt_conditions(self):
        """Test KKT residuals on 20 random separable problems"""
        rng = np.random.default_rng(17)
        C, tol = 10.0, 1e-3
        for _ in range(20):
            X = np.vstack([rng.normal(-2, 0.7, size=(15, 2)), rng.normal(2, 0.7, size=(15, 2))])
            y = np.array([-1.0] * 15 + [1.0] * 15)
            K = X @ X.T
            alpha, b, converged, _ = SmoSolver(K, y, C, tol, 100_000).solve()
            self.assertTrue(converged)

            self.assertTrue(np.all(alpha >= -1e-12) and np.all(alpha <= C + 1e-12))
            self.assertAlmostEqual(float(alpha @ y), 0.0, delta=1e-6)
            margins = y * (K @ (alpha * y) + b)
            for a, m in zip(alpha, margins):
                if a <= 1e-8:
                    self.assertGreaterEqual(m, 1 - tol)
                elif a >= C - 1e-8:
                    self.assertLessEqual(m, 1 + tol)
                else:
                    self.assertAlmostEqual(m, 1.0, delta=tol)

    def test_xor(self):
        ds = binary_dataset([[0, 0], [1, 1], [0, 1], [1, 0]], [0, 0, 1, 1])
        self.assertEqual(training_accuracy(train_svm(ds, kernel=SvmKernel.RBF), ds), 1.0)
        self.assertLess(training_accuracy(train_svm(ds, kernel=SvmKernel.LINEAR), ds), 1.0)

    def test_class_count_errors(self):
        with self.assertRaises(ValidationError):
            train_svm(numeric_dataset([[0], [1]], [0, 0]))
        with self.assertRaises(ValidationError):
            train_svm(numeric_dataset([[0], [1], [2]], [0, 1, 2], class_names=('A', 'B', 'C')))

    def test_iteration_cap_sets_flag(self):
        rng = np.random.default_rng(3)
        ds = numeric_dataset(rng.normal(size=(30, 2)), rng.integers(0, 2, size=30))
        with self.assertLogs('classifiers.svm', level='WARNING'):
            model = train_svm(ds, C=100.0, max_iterations=1)
        self.assertFalse(model.converged)


class AnnTests(SimpleTestCase):
    """Tests for train_ann"""

    def _blobs(self, n=100):
        rng = np.random.default_rng(0)
        labels = np.arange(n) % 2
        centers = np.where(labels[:, None] == 0, -2.0, 2.0)
        return numeric_dataset(centers + rng.normal(0, 0.5, size=(n, 2)), labels)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        network = Network.initialise([2, 3, 2], rng)
        X = rng.uniform(0, 1, size=(10, 2))
        T = np.eye(2)[rng.integers(0, 2, size=10)]
        grad_w, grad_b = network.gradients(X, T)
        eps = 1e-5
        worst = 0.0
        for params, grads in ((network.weights, grad_w), (network.biases, grad_b)):
            for layer, array in enumerate(params):
                for index in np.ndindex(array.shape):
                    original = array[index]
                    array[index] = original + eps
                    up = network.loss(X, T)
                    array[index] = original - eps
                    down = network.loss(X, T)
                    array[index] = original
                    numeric = (up - down) / (2 * eps)
                    analytic = grads[layer][index]
                    worst = max(worst, abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-7))
        self.assertLessEqual(worst, 1e-4)

    def test_blobs(self):
        ds = self._blobs()
        model = train_ann(ds, seed=1)
        self.assertGreaterEqual(training_accuracy(model, ds), 0.99)

        history = model.loss_history
        non_increasing = sum(1 for a, b in zip(history, history[1:]) if b <= a + 1e-12)
        self.assertGreaterEqual(non_increasing / (len(history) - 1), 0.95)

    def test_zero_epochs_is_reproducible(self):
        ds = self._blobs(20)
        first = train_ann(ds, epochs=0, seed=4)
        second = train_ann(ds, epochs=0, seed=4)
        self.assertEqual(first.loss_history, [])
        for sample in ds.samples:
            self.assertEqual(first.classify(sample), second.classify(sample))

    def test_architecture(self):
        self.assertEqual(hidden_layers(5, 2), [4])
        self.assertEqual(hidden_layers(5, 2, preset=AnnPreset.THREE_LAYER), [4, 4, 4])
        self.assertEqual(hidden_layers(5, 2, hidden=[7, 3]), [7, 3])
        with self.assertRaises(ValidationError):
            hidden_layers(5, 2, hidden=[4, 0])


class ServiceTests(SimpleTestCase):
    """Tests for train_model, classify and model persistence"""

    def setUp(self):
        rng = np.random.default_rng(5)
        labels = np.arange(24) % 2
        numeric = labels[:, None] * 3.0 + rng.normal(0, 0.4, size=(24, 1))
        schema = (
            AttributeSpec('size', AttributeKind.NUMERIC),
            AttributeSpec('signed', AttributeKind.BINARY),
            AttributeSpec('packer', AttributeKind.NOMINAL, ('none', 'upx', 'aspack')),
        )
        samples = tuple(
            FeatureVector(f"s{i}", int(y), (float(numeric[i, 0]), int(y) if i % 5 else 1 - int(y), (i + int(y)) % 3))
            for i, y in enumerate(labels)
        )
        self.ds = Dataset(schema=schema, class_names=('benign', 'malware'), samples=samples)

    def test_validate_params_defaults(self):
        self.assertEqual(validate_params(Method.KNN, {}), {'k': 1, 'weighting': 'uniform'})
        self.assertEqual(validate_params(Method.KNN, {'k': '3'})['k'], 3)
        self.assertIsNone(validate_params(Method.C45, {'prune_cf': 'none'})['prune_cf'])
        self.assertEqual(validate_params(Method.ANN, {'hidden': '6, 6'})['hidden'], [6, 6])

    def test_validate_params_errors(self):
        bad = [
            (Method.KNN, {'k': 0}),
            (Method.KNN, {'neighbours': 3}),
            (Method.SVM, {'C': 0}),
            (Method.C45, {'prune_cf': 0.7}),
            (Method.ANN, {'hidden': '4,0'}),
            (Method.BAYES_NET, {'structure': 'k2'}),
        ]
        for method, params in bad:
            with self.assertRaises(ValidationError):
                validate_params(method, params)

    def test_every_method_round_trips(self):
        for method in Method.values:
            spec = ModelSpec(method, {'epochs': 20} if method == Method.ANN else {}, seed=2)
            model = train_model(self.ds, spec)
            restored = load_model(dump_model(model))

            self.assertEqual(restored.fingerprint, model.fingerprint)
            self.assertEqual(dump_model(restored), dump_model(model))
            for sample in self.ds.samples:
                self.assertEqual(classify(restored, sample), classify(model, sample))

    def test_load_rejects_foreign_documents(self):
        for text in ('not json', '{"format": "other"}', '{"format": "malwarelab-model", "version": 9}'):
            with self.assertRaises(ParseError):
                load_model(text)

    def test_schema_mismatch_names_attribute(self):
        model = train_model(self.ds, ModelSpec(Method.NAIVE_BAYES))
        with self.assertRaisesMessage(ValidationError, 'packer'):
            model.classify((1.0, 0, 7))
        with self.assertRaises(ValidationError):
            model.classify((1.0, 0))

    def test_repeated_queries_are_identical(self):
        for method in (Method.C45, Method.SVM, Method.BAYES_NET):
            model = train_model(self.ds, ModelSpec(method))
            sample = self.ds.samples[3]
            self.assertEqual(classify(model, sample), classify(model, sample))
