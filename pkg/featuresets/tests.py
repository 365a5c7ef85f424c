import random
import tempfile
from collections import Counter
from pathlib import Path

from django.test import SimpleTestCase
from rest_framework.exceptions import ParseError, ValidationError

from .constants import AttributeKind, DiscretizationMethod
from .schema import AttributeSpec, Dataset, FeatureVector
from .services import (
    fit_discretizer,
    load_csv,
    normalize_minmax,
    save_csv,
    stratified_folds,
)


def numeric_dataset(values, labels=None, class_names=('A', 'B')):
    """Single numeric attribute dataset helper."""
    labels = labels or [None] * len(values)
    return Dataset(
        schema=(AttributeSpec('f1', AttributeKind.NUMERIC),),
        class_names=class_names,
        samples=tuple(
            FeatureVector(f"s{i}", None if lab is None else class_names.index(lab), (float(v),))
            for i, (v, lab) in enumerate(zip(values, labels))
        ),
    )


def random_dataset(rng, n_samples):
    """Random schema and class orders, 0/1-only numerics and number-like categories included."""
    class_names = rng.sample(['malware', 'benign', 'c0', 'c1', '10', '2'], rng.randint(2, 4))
    schema = [
        AttributeSpec('size', AttributeKind.NUMERIC),
        AttributeSpec('flag', AttributeKind.NUMERIC),
        AttributeSpec('is_dll', AttributeKind.BINARY),
        AttributeSpec('packer', AttributeKind.NOMINAL, categories=tuple(rng.sample(['upx', 'aspack', 'none'], 3))),
        AttributeSpec('version', AttributeKind.NOMINAL, categories=tuple(rng.sample(['10', '2', '1.5'], rng.randint(2, 3)))),
    ]
    rng.shuffle(schema)
    samples = []
    for i in range(n_samples):
        values = []
        for attr in schema:
            if rng.random() < 0.2:
                values.append(None)
            elif attr.name == 'size':
                values.append(rng.choice([rng.uniform(-1e6, 1e6), rng.random(), 0.0]))
            elif attr.name == 'flag':
                values.append(float(rng.randint(0, 1)))
            elif attr.kind == AttributeKind.BINARY:
                values.append(rng.randint(0, 1))
            else:
                values.append(rng.randrange(len(attr.categories)))
        label = None if rng.random() < 0.1 else rng.randrange(len(class_names))
        samples.append(FeatureVector(f"s{i}", label, tuple(values)))
    return Dataset(schema=tuple(schema), class_names=tuple(class_names), samples=tuple(samples))


class CsvInterchangeTests(SimpleTestCase):
    """Tests for load_csv / save_csv."""

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def _write(self, text, name='data.csv'):
        path = self.tmp / name
        path.write_text(text, encoding='utf-8')
        return path

    def test_minimal_file(self):
        """Test two rows give two samples, one numeric attribute and two classes"""
        ds = load_csv(self._write("f1,class\n1,benign\n2,malware\n"))

        self.assertEqual(len(ds), 2)
        self.assertEqual(ds.n_attributes, 1)
        self.assertEqual(ds.schema[0].kind, AttributeKind.NUMERIC)
        self.assertEqual(ds.class_names, ('benign', 'malware'))
        self.assertEqual([s.label for s in ds.samples], [0, 1])

    def test_row_arity_error(self):
        """Test a row with an extra cell is reported with its row number"""
        with self.assertRaises(ParseError) as ctx:
            load_csv(self._write("f1,class\n1,benign,extra\n"))
        self.assertIn("row 2: 3 cells, expected 2", str(ctx.exception.detail))

    def test_binary_inference(self):
        """Test a 0/1 column is inferred as binary"""
        ds = load_csv(self._write("flag,class\n0,a\n1,a\n1,b\n0,b\n"))
        self.assertEqual(ds.schema[0].kind, AttributeKind.BINARY)

    def test_nominal_and_missing_cells(self):
        """Test text columns become nominal and empty cells missing"""
        ds = load_csv(self._write("packer,size,class\nupx,,a\n,3.5,b\naspack,1,a\n"))

        self.assertEqual(ds.schema[0].kind, AttributeKind.NOMINAL)
        self.assertEqual(ds.schema[0].categories, ('aspack', 'upx'))
        self.assertIsNone(ds.samples[0].values[1])
        self.assertIsNone(ds.samples[1].values[0])

    def test_single_valued_text_column_is_rejected(self):
        """Test an untyped text column with one distinct value asks for a declared header"""
        with self.assertRaises(ParseError) as ctx:
            load_csv(self._write("packer,class\nupx,a\nupx,b\n"))
        self.assertIn("packer:nominal{...}", str(ctx.exception.detail))

    def test_typed_header_is_written(self):
        """Test the header declares kinds, category order and class order"""
        ds = Dataset(
            schema=(
                AttributeSpec('flag', AttributeKind.NUMERIC),
                AttributeSpec('is_dll', AttributeKind.BINARY),
                AttributeSpec('packer', AttributeKind.NOMINAL, categories=('upx', 'aspack')),
            ),
            class_names=('malware', 'benign'),
            samples=(FeatureVector('a', 0, (0.0, 1, 0)), FeatureVector('b', 1, (1.0, 0, 1))),
        )
        path = self.tmp / 'typed.csv'
        save_csv(ds, path)

        self.assertEqual(
            path.read_text().splitlines(),
            [
                'sample_id,flag:numeric,is_dll:binary,packer:nominal{upx|aspack},class{malware|benign}',
                'a,0,1,upx,malware',
                'b,1,0,aspack,benign',
            ],
        )
        loaded = load_csv(path)
        self.assertEqual(loaded.schema, ds.schema)
        self.assertEqual(loaded.class_names, ('malware', 'benign'))
        self.assertEqual(loaded.samples, ds.samples)

    def test_typed_header_keeps_number_like_categories(self):
        """Test declared nominal categories that look like numbers stay nominal"""
        ds = load_csv(self._write("sample_id,version:nominal{10|2},class{b|a}\nx,2,a\ny,10,b\n"))

        self.assertEqual(ds.schema, (AttributeSpec('version', AttributeKind.NOMINAL, ('10', '2')),))
        self.assertEqual(ds.class_names, ('b', 'a'))
        self.assertEqual([(s.values, s.label) for s in ds.samples], [((1,), 1), ((0,), 0)])

    def test_typed_cell_outside_categories(self):
        """Test a cell that is not a declared category is reported with its row"""
        with self.assertRaises(ParseError) as ctx:
            load_csv(self._write("sample_id,packer:nominal{upx|aspack},class{a|b}\nx,mpress,a\n"))
        self.assertIn("row 2", str(ctx.exception.detail))

    def test_declared_classes_yield_to_requested_ones(self):
        """Test explicit class_names override the order declared in the header"""
        ds = load_csv(self._write("sample_id,f:numeric,class{a|b}\nx,1,a\ny,2,b\n"), class_names=('b', 'a'))
        self.assertEqual([s.label for s in ds.samples], [1, 0])

    def test_crlf_and_no_class_column(self):
        """Test CRLF files load and a missing class column gives unlabeled samples"""
        ds = load_csv(self._write("f1,f2\r\n1,2\r\n3,4\r\n"))

        self.assertEqual(ds.class_names, ())
        self.assertTrue(all(s.label is None for s in ds.samples))

    def test_unknown_class_with_declared_classes(self):
        """Test labels outside the declared classes load unlabeled"""
        ds = load_csv(self._write("f1,class\n1,benign\n2,other\n"), class_names=('benign', 'malware'))
        self.assertEqual([s.label for s in ds.samples], [0, None])

    def test_empty_dataset_writes_header_only(self):
        """Test saving an empty dataset writes just the header line"""
        ds = Dataset(schema=(AttributeSpec('f1', AttributeKind.NUMERIC),), class_names=('a', 'b'))
        path = self.tmp / 'empty.csv'
        save_csv(ds, path)

        self.assertEqual(path.read_text().splitlines(), ['sample_id,f1:numeric,class{a|b}'])

    def test_float_survives_round_trip(self):
        """Test 0.1 is restored bit-exactly"""
        ds = numeric_dataset([0.1, 1 / 3], ['A', 'B'])
        path = self.tmp / 'floats.csv'
        save_csv(ds, path)
        loaded = load_csv(path)

        self.assertEqual([s.values[0] for s in loaded.samples], [0.1, 1 / 3])

    def test_random_round_trips(self):
        """Test load(save(ds)) reproduces randomly generated datasets"""
        rng = random.Random(7)
        for trial in range(40):
            ds = random_dataset(rng, rng.randint(0, 30))
            path = self.tmp / f"rt{trial}.csv"
            save_csv(ds, path)
            loaded = load_csv(path)

            self.assertEqual(loaded.schema, ds.schema)
            self.assertEqual(loaded.class_names, ds.class_names)
            self.assertEqual(loaded.samples, ds.samples)


class DiscretizerTests(SimpleTestCase):
    """Tests for fit_discretizer"""

    def test_equal_frequency_median_cut(self):
        ds = numeric_dataset([1, 2, 3, 4])
        disc = fit_discretizer(ds, 0, bins=2, method=DiscretizationMethod.EQUAL_FREQUENCY)
        self.assertEqual(disc.cuts[0], (2.5,))

    def test_constant_attribute_has_no_cuts(self):
        ds = numeric_dataset([5, 5, 5], ['A', 'B', 'A'])
        for method in DiscretizationMethod.values:
            self.assertEqual(fit_discretizer(ds, 0, bins=4, method=method).cuts[0], ())

    def test_supervised_threshold(self):
        ds = numeric_dataset([1, 2, 9, 10], ['A', 'A', 'B', 'B'])
        disc = fit_discretizer(ds, 0, method=DiscretizationMethod.SUPERVISED_THRESHOLD)
        self.assertEqual(disc.cuts[0], (5.5,))

    def test_bins_cover_the_line(self):
        """Test every value maps to a contiguous bin index"""
        rng = random.Random(3)
        values = [rng.gauss(0, 10) for _ in range(200)]
        disc = fit_discretizer(numeric_dataset(values), 0, bins=10)
        cuts = disc.cuts[0]

        self.assertTrue(all(a < b for a, b in zip(cuts, cuts[1:])))
        seen = {disc.bin_of(0, v) for v in values + [-1e300, 1e300]}
        self.assertEqual(seen, set(range(len(cuts) + 1)))

    def test_apply_produces_nominal_bins(self):
        ds = numeric_dataset([1, 2, 9, 10], ['A', 'A', 'B', 'B'])
        binned = fit_discretizer(ds, 0, method=DiscretizationMethod.SUPERVISED_THRESHOLD).apply(ds)

        self.assertEqual(binned.schema[0].kind, AttributeKind.NOMINAL)
        self.assertEqual([s.values[0] for s in binned.samples], [0, 0, 1, 1])

    def test_apply_keeps_single_bin_as_constant_binary(self):
        """Test a constant attribute without cuts becomes an all-zero binary column"""
        ds = numeric_dataset([5, 5, 5], ['A', 'B', 'A'])
        binned = fit_discretizer(ds, 0, method=DiscretizationMethod.SUPERVISED_THRESHOLD).apply(ds)

        self.assertEqual(binned.schema[0], AttributeSpec('f1', AttributeKind.BINARY))
        self.assertEqual([s.values[0] for s in binned.samples], [0, 0, 0])

    def test_rejects_symbolic_attribute(self):
        ds = Dataset(
            schema=(AttributeSpec('flag', AttributeKind.BINARY),),
            class_names=('A',),
            samples=(FeatureVector('s', 0, (1,)),),
        )
        with self.assertRaises(ValidationError):
            fit_discretizer(ds, 0)


class NormalizationTests(SimpleTestCase):
    """Tests for normalize_minmax"""

    def test_endpoints(self):
        scaled, _ = normalize_minmax(numeric_dataset([0, 5, 10]))
        self.assertEqual([s.values[0] for s in scaled.samples], [0.0, 0.5, 1.0])

    def test_constant_maps_to_zero(self):
        scaled, _ = normalize_minmax(numeric_dataset([7, 7]))
        self.assertEqual([s.values[0] for s in scaled.samples], [0.0, 0.0])

    def test_stored_range_applies_to_unseen_data(self):
        _, normalizer = normalize_minmax(numeric_dataset([0, 10]))
        unseen = normalizer.apply(numeric_dataset([15]))
        self.assertEqual(unseen.samples[0].values[0], 1.5)

    def test_idempotent_on_normalized_data(self):
        rng = random.Random(11)
        scaled, _ = normalize_minmax(numeric_dataset([rng.uniform(-50, 50) for _ in range(40)]))
        again, _ = normalize_minmax(scaled)
        for a, b in zip(scaled.samples, again.samples):
            self.assertAlmostEqual(a.values[0], b.values[0], delta=1e-12)


class StratifiedFoldTests(SimpleTestCase):
    """Tests for stratified_folds"""

    def _dataset(self, labels):
        return numeric_dataset(list(range(len(labels))), labels)

    def test_divisible_stratification(self):
        folds = stratified_folds(self._dataset(['A'] * 5 + ['B'] * 5), k=5, seed=1)
        ds = self._dataset(['A'] * 5 + ['B'] * 5)
        for fold in folds:
            self.assertEqual(sorted(ds.samples[i].label for i in fold), [0, 1])

    def test_pigeonhole_sizes(self):
        folds = stratified_folds(self._dataset(['A'] * 4 + ['B'] * 3), k=5, seed=0)
        self.assertEqual(sorted(len(f) for f in folds), [1, 1, 1, 2, 2])

    def test_deterministic(self):
        ds = self._dataset(['A', 'B'] * 10)
        self.assertEqual(stratified_folds(ds, 5, seed=42), stratified_folds(ds, 5, seed=42))

    def test_too_many_folds(self):
        with self.assertRaises(ValidationError):
            stratified_folds(self._dataset(['A', 'B']), k=5, seed=0)

    def test_partition_invariants_on_random_datasets(self):
        """Test union, disjointness, size and class balance on 1000 random datasets"""
        rng = random.Random(2024)
        for _ in range(1000):
            n_classes = rng.randint(2, 4)
            n = rng.randint(n_classes * 2, 200)
            labels = [f"c{k}" for k in range(n_classes)] + [f"c{rng.randrange(n_classes)}" for _ in range(n - n_classes)]
            class_names = tuple(f"c{k}" for k in range(n_classes))
            ds = numeric_dataset(list(range(n)), labels, class_names=class_names)
            k = rng.randint(2, min(10, n))
            folds = stratified_folds(ds, k, seed=rng.randrange(10_000))

            flat = [i for fold in folds for i in fold]
            self.assertEqual(sorted(flat), list(range(n)))
            sizes = [len(f) for f in folds]
            self.assertLessEqual(max(sizes) - min(sizes), 1)
            for klass in range(n_classes):
                per_fold = [Counter(ds.samples[i].label for i in fold)[klass] for fold in folds]
                self.assertLessEqual(max(per_fold) - min(per_fold), 1)


class SchemaTests(SimpleTestCase):
    """Tests for AttributeSpec and Dataset validation"""

    def test_nominal_needs_two_categories(self):
        for categories in ((), ('only',)):
            with self.subTest(categories), self.assertRaises(ValidationError):
                AttributeSpec('packer', AttributeKind.NOMINAL, categories)
        self.assertEqual(AttributeSpec('packer', AttributeKind.NOMINAL, ('upx', 'none')).arity, 2)

    def test_symbols_must_fit_a_typed_header(self):
        for categories in (('upx', ''), ('upx|aspack', 'none'), (' upx', 'none')):
            with self.subTest(categories), self.assertRaises(ValidationError):
                AttributeSpec('packer', AttributeKind.NOMINAL, categories)
        with self.assertRaises(ValidationError):
            Dataset(schema=(), class_names=('benign', 'mal|ware'))
