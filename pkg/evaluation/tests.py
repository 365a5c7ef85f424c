import random
from collections import Counter
from unittest.mock import patch

import numpy as np
from django.test import SimpleTestCase

from classifiers.base import ModelSpec
from classifiers.constants import Method
from classifiers.services import dump_model
from featuresets.constants import AttributeKind
from featuresets.schema import AttributeSpec, Dataset, FeatureVector
from ngrams.services import class_frequencies
from ngrams.vocabulary import NgramVocabulary

from .reports import frequency_report, grid_report, render_accuracy
from .services import CrossValidationError, EvalReport, cross_validate, fold_splits, train_fold


def make_dataset(n=60, seed=0, informative=True, class_names=('benign', 'malware')):
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % len(class_names)
    noise = rng.normal(size=(n, 2))
    first = labels.astype(float) if informative else rng.integers(0, 2, size=n).astype(float)
    schema = (
        AttributeSpec('flag', AttributeKind.NUMERIC),
        AttributeSpec('x1', AttributeKind.NUMERIC),
        AttributeSpec('x2', AttributeKind.NUMERIC),
    )
    samples = tuple(
        FeatureVector(f"s{i}", int(labels[i]), (float(first[i]), float(noise[i, 0]), float(noise[i, 1])))
        for i in range(n)
    )
    return Dataset(schema=schema, class_names=class_names, samples=samples)


def fake_report(mean, task='Bn vs Ml', method=Method.C45):
    return EvalReport(
        task=task,
        spec=ModelSpec(method),
        class_names=('A', 'B'),
        fold_accuracies=(mean,),
        confusion=((1, 0), (0, 1)),
    )


class CrossValidateTests(SimpleTestCase):
    """Tests for cross_validate"""

    def test_perfect_attribute(self):
        report = cross_validate(make_dataset(), ModelSpec(Method.C45), k=5, seed=1)
        self.assertEqual(report.mean_accuracy, 100.0)
        self.assertEqual(len(report.fold_accuracies), 5)

    def test_shuffled_labels_are_near_chance(self):
        ds = make_dataset(n=200, seed=3, informative=False)
        for method in (Method.NAIVE_BAYES, Method.KNN):
            report = cross_validate(ds, ModelSpec(method), k=5, seed=4)
            self.assertTrue(40.0 <= report.mean_accuracy <= 60.0, report.mean_accuracy)

    def test_deterministic(self):
        ds = make_dataset(seed=5)
        spec = ModelSpec(Method.ANN, {'epochs': 5}, seed=3)
        first = cross_validate(ds, spec, seed=7)
        second = cross_validate(ds, spec, seed=7, jobs=3)
        self.assertEqual(first, second)
        self.assertEqual(first.render(), second.render())

    def test_confusion_matrix(self):
        ds = make_dataset(n=47, seed=6, informative=False)
        report = cross_validate(ds, ModelSpec(Method.KNN, {'k': 3}), k=5, seed=2)
        matrix = np.asarray(report.confusion)

        self.assertEqual(matrix.sum(axis=1).tolist(), ds.class_counts())
        self.assertAlmostEqual(report.mean_accuracy, sum(report.fold_accuracies) / 5, delta=1e-9)

        correct = 0
        for train, test in fold_splits(ds, 5, 2):
            model = train_fold(ds, ModelSpec(Method.KNN, {'k': 3}), train)
            correct += sum(1 for i in test if model.classify(ds.samples[i]).label == ds.samples[i].label)
        self.assertAlmostEqual(report.pooled_accuracy, 100.0 * correct / len(ds), delta=1e-9)

    def test_test_fold_does_not_reach_training(self):
        ds = make_dataset(n=30, seed=8)
        train, test = fold_splits(ds, 5, 0)[0]
        victim = test[0]
        samples = list(ds.samples)
        samples[victim] = FeatureVector(samples[victim].sample_id, samples[victim].label, (9.0, 9.0, 9.0))
        altered = Dataset(schema=ds.schema, class_names=ds.class_names, samples=tuple(samples))

        self.assertEqual(fold_splits(altered, 5, 0)[0], (train, test))
        for method in (Method.NAIVE_BAYES, Method.KNN, Method.SVM):
            spec = ModelSpec(method)
            self.assertEqual(dump_model(train_fold(ds, spec, train)), dump_model(train_fold(altered, spec, train)))

    def test_training_error_carries_fold(self):
        ds = make_dataset(n=30, class_names=('a', 'b', 'c'))
        with self.assertRaises(CrossValidationError) as caught:
            cross_validate(ds, ModelSpec(Method.SVM), k=3)
        self.assertEqual(caught.exception.fold, 0)

    def test_unexpected_error_carries_fold(self):
        ds = make_dataset(n=30)
        with patch('evaluation.services.train_model', side_effect=ValueError('singular matrix')):
            with self.assertRaises(CrossValidationError) as caught:
                cross_validate(ds, ModelSpec(Method.C45), k=3)
        self.assertEqual(caught.exception.fold, 0)
        self.assertIn('ValueError: singular matrix', str(caught.exception.detail))

    def test_report_csv(self):
        report = cross_validate(make_dataset(), ModelSpec(Method.C45), k=2)
        lines = report.to_csv().splitlines()
        self.assertEqual(lines[0], 'fold,accuracy,seconds')
        self.assertEqual(lines[3], 'mean,100.00,')
        self.assertIn('true\\predicted,benign,malware', lines)


class GridReportTests(SimpleTestCase):
    """Tests for grid_report"""

    def test_one_task_two_methods(self):
        grid = grid_report(
            {('All features', 'Bn vs Ml'): {Method.C45: fake_report(97.631), Method.KNN: fake_report(95.0)}},
            methods=(Method.C45, Method.KNN),
        )
        lines = grid.to_csv().splitlines()

        self.assertEqual(lines, ['selection,task,C4.5,k-NN,best', 'All features,Bn vs Ml,97.63,95.00,C4.5'])
        self.assertEqual(grid.n_cells, 2)

    def test_rendering(self):
        self.assertEqual(render_accuracy(97.631), '97.63')
        self.assertEqual(render_accuracy(None), '—')

    def test_ties_are_all_flagged(self):
        grid = grid_report(
            {('Cfs', 't'): {Method.NAIVE_BAYES: fake_report(90.001), Method.SVM: fake_report(89.999), Method.ANN: fake_report(80.0)}},
            methods=(Method.NAIVE_BAYES, Method.SVM, Method.ANN),
        )
        self.assertEqual(grid.rows[0].best, (0, 1))
        self.assertIn('| t | **90.00** | **90.00** | 80.00 |', grid.to_markdown())

    def test_missing_cell(self):
        grid = grid_report({('Cfs', 't'): {Method.C45: None, Method.KNN: fake_report(70.0)}}, methods=(Method.C45, Method.KNN))
        self.assertEqual(grid.to_csv().splitlines()[1], 'Cfs,t,—,70.00,k-NN')

    def test_independent_of_evaluation_order(self):
        cells = [(Method.C45, fake_report(91.0)), (Method.KNN, fake_report(92.0)), (Method.SVM, fake_report(93.0))]
        forward = grid_report({('All features', 't'): dict(cells)})
        backward = grid_report({('All features', 't'): dict(reversed(cells))})
        self.assertEqual(forward.to_csv(), backward.to_csv())

    def test_three_tasks_six_methods(self):
        reports = {
            ('All features', task): {m: fake_report(50.0 + i) for i, m in enumerate(Method.values)}
            for task in ('Bn vs Ml_000', 'Bn vs Ml_207', 'Ml_000 vs Ml_207')
        }
        self.assertEqual(grid_report(reports).n_cells, 18)


class FrequencyReportTests(SimpleTestCase):
    """Tests for frequency_report"""

    def setUp(self):
        self.files = {
            'benign': [['push', 'mov', 'call', 'ret'], ['push', 'mov', 'call', 'pop']],
            'malware': [['xor', 'jmp', 'push', 'mov'], ['xor', 'xor', 'jmp']],
        }
        self.vocab = NgramVocabulary(n=2, grams=(('push', 'mov'), ('mov', 'call'), ('xor', 'jmp'), ('call', 'ret')))

    def test_reference_only_token(self):
        report = frequency_report(self.vocab, class_frequencies(self.vocab, self.files), 'benign')
        row = report.fractions[report.tokens.index('movcall')]
        self.assertEqual(row, (1.0, 0.0))
        self.assertEqual(report.class_names, ('benign', 'malware'))

    def test_short_vocabulary_emits_everything(self):
        report = frequency_report(self.vocab, class_frequencies(self.vocab, self.files), 'malware')
        self.assertEqual(len(report.tokens), 4)
        self.assertEqual(report.tokens[0], 'xorjmp')

    def test_matches_recount(self):
        rng = random.Random(19)
        ops = ['push', 'mov', 'xor', 'call', 'ret', 'jmp']
        files = {c: [[rng.choice(ops) for _ in range(rng.randint(2, 15))] for _ in range(12)] for c in ('a', 'b', 'c')}
        grams = tuple(dict.fromkeys((x, y) for x in ops for y in ops))[:25]
        vocab = NgramVocabulary(n=2, grams=grams)
        report = frequency_report(vocab, class_frequencies(vocab, files), 'b')
        self.assertEqual(len(report.tokens), 20)

        lookup = dict(zip(vocab.column_names(), grams))
        for token, row in zip(report.tokens, report.fractions):
            gram = lookup[token]
            for class_name, value in zip(report.class_names, row):
                hits = Counter(any(tuple(f[i:i + 2]) == gram for i in range(len(f) - 1)) for f in files[class_name])
                self.assertEqual(value, hits[True] / len(files[class_name]))

        lines = report.to_csv().splitlines()
        self.assertEqual(lines[0], 'ngram,b,a,c')
