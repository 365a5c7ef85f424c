import csv
import io
import shutil
import tempfile
from pathlib import Path
from unittest.mock import patch

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase
from rest_framework.exceptions import ValidationError

from binaries.builder import FixtureSpec, build_pe32
from binaries.parser import extract_report
from binaries.signatures import default_signatures
from classifiers.constants import Method
from classifiers.services import load_model
from ngrams.sequences import parse_disassembly
from ngrams.vocabulary import NgramVocabulary
from selection.services import SelectionMode, parse_selection

from .config import config_from_payload, load_config
from .constants import ExitCode
from .services import (
    AuditService,
    ExtractService,
    IngestService,
    error_text,
    load_task_dataset,
    slug,
)
from .synthetic import generate_demo_corpus, render_listing
from .writer import ArtifactWriter


def write(path: Path, data: bytes | str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        path.write_text(data, encoding='utf-8')
    else:
        path.write_bytes(data)
    return path


def read_rows(path: Path) -> list[list[str]]:
    with path.open(newline='', encoding='utf-8') as handle:
        return list(csv.reader(handle))


class TempDirTestCase(SimpleTestCase):
    def setUp(self):
        scratch = tempfile.TemporaryDirectory()
        self.addCleanup(scratch.cleanup)
        self.root = Path(scratch.name).resolve()

    def demo_config(self, per_class=10, seed=3, **keys):
        """Config payload over a freshly generated demo corpus, with `keys` layered on top."""
        generate_demo_corpus(self.root / 'demo', per_class=per_class, seed=seed)
        payload = {
            'classes': 'benign, malware',
            'corpora': {'benign': 'demo/corpus/benign', 'malware': 'demo/corpus/malware'},
            'listings': 'demo/listings',
            'out': 'out',
        }
        payload.update(keys)
        return config_from_payload(payload, base_dir=self.root)


class ConfigTests(TempDirTestCase):
    """Tests for load_config and PipelineConfigSerializer"""

    def load(self, text, overrides=None):
        return load_config(write(self.root / 'pipeline.env', text), overrides)

    def test_minimal_file(self):
        config = self.load("classes = a, b\ncorpus.a = ca\ncorpus.b = cb\n")

        self.assertEqual(config.classes, ('a', 'b'))
        self.assertEqual(config.corpora['a'], self.root / 'ca')
        self.assertEqual(config.tasks, {'a vs b': ('a', 'b')})
        self.assertEqual(config.models, tuple(Method.values))
        self.assertEqual(config.selections, (SelectionMode(),))
        self.assertEqual(config.reference_class, 'a')
        self.assertEqual(config.family_tag, 'pe_header')

    def test_dotted_keys(self):
        config = self.load(
            "classes = a, b, c\n"
            "corpus.a = ca\ncorpus.b = cb\ncorpus.c = cc\n"
            "task.b_vs_a = b, a  # reversed on purpose\n"
            "task.all = a, b, c\n"
            "family = opcode_ngram\nngram.n = 3\n"
            "selection = none, infogain:0.1, cfs\n"
            "models = knn, c45\nmodel.knn.k = 3\n"
            "listings = listings\n"
        )
        self.assertEqual(config.tasks, {'b_vs_a': ('b', 'a'), 'all': ('a', 'b', 'c')})
        self.assertEqual(config.family_tag, 'opcode_ngram_3')
        self.assertEqual(config.models, ('knn', 'c45'))
        self.assertEqual(config.model_spec('knn').params, {'k': '3'})
        self.assertEqual(config.model_spec('c45').params, {})
        self.assertEqual(config.listings, self.root / 'listings')
        self.assertEqual([config.section_label(m) for m in config.selections], ['All features', 'Information Gain', 'Cfs'])

    def test_rejected_configs(self):
        base = "classes = a, b\ncorpus.a = ca\ncorpus.b = cb\n"
        cases = {
            'single class': "classes = a\ncorpus.a = ca\n",
            'negative threshold': base + "selection = infogain:-0.1\n",
            'n out of range': base + "family = opcode_ngram\nngram.n = 5\n",
            'api n': base + "family = api_ngram\nngram.n = 3\n",
            'unknown key': base + "colour = blue\n",
            'unknown hyperparameter': base + "model.knn.depth = 3\n",
            'model not selected': base + "models = c45\nmodel.knn.k = 3\n",
            'unknown task class': base + "task.t = a, z\n",
            'missing corpus': "classes = a, b\ncorpus.a = ca\n",
            'bad cutoff': base + "cutoff = yesterday\n",
            'bad method': base + "models = c45, random_forest\n",
        }
        for name, text in cases.items():
            with self.subTest(name), self.assertRaises(ValidationError):
                self.load(text)

    def test_overrides(self):
        config = self.load("classes = a, b\ncorpus.a = ca\ncorpus.b = cb\nseed = 1\n", {'seed': 7, 'jobs': None})
        self.assertEqual(config.seed, 7)

    def test_missing_file(self):
        with self.assertRaises(ValidationError):
            load_config(self.root / 'absent.env')


class ArtifactWriterTests(TempDirTestCase):
    """Tests for ArtifactWriter"""

    def test_refuses_paths_outside_root(self):
        writer = ArtifactWriter(self.root / 'out')
        for parts in (('..', 'escape.txt'), ('a', '..', '..', 'b.txt'), (str(self.root / 'elsewhere.txt'),)):
            with self.subTest(parts), self.assertRaises(ValidationError):
                writer.write_text(*parts, text='x')
        self.assertFalse((self.root / 'escape.txt').exists())

    def test_writes_below_root(self):
        writer = ArtifactWriter(self.root / 'out')
        target = writer.write_text('reports', 'grid.csv', text='a,b\n')

        self.assertEqual(target.read_text(), 'a,b\n')
        self.assertEqual(writer.written, [target])
        self.assertEqual(writer.read_text('reports', 'grid.csv'), 'a,b\n')


class IngestTests(TempDirTestCase):
    """Tests for IngestService"""

    def setUp(self):
        super().setUp()
        twin = build_pe32(FixtureSpec())
        write(self.root / 'ca' / 'x.exe', twin)
        write(self.root / 'ca' / 'y.exe', twin)
        write(self.root / 'ca' / 'z.exe', build_pe32(FixtureSpec(timestamp=1_300_000_000)))
        write(self.root / 'cb' / 'one.exe', build_pe32(FixtureSpec(is_dll=True)))
        write(self.root / 'cb' / 'notes.txt', "not a binary\n")
        write(self.root / 'text_only' / 'readme.txt', "hello\n")
        self.writer = ArtifactWriter(self.root / 'out')

    def config(self, **corpora):
        corpora = corpora or {'a': 'ca', 'b': 'cb'}
        return config_from_payload(
            {'classes': list(corpora), 'corpora': corpora, 'out': 'out'}, base_dir=self.root
        )

    def test_duplicates_are_dropped(self):
        manifests = IngestService(self.config(), self.writer).execute()

        self.assertEqual([e.path for e in manifests['a'].accepted], ['x.exe', 'z.exe'])
        self.assertEqual(manifests['a'].verdict_counts()['duplicate'], 1)
        self.assertEqual([e.path for e in manifests['b'].accepted], ['one.exe'])

    def test_summary(self):
        manifests = IngestService(self.config(), self.writer).execute()
        rows = read_rows(self.writer.path('manifests', 'corpus_summary.csv'))

        self.assertEqual(rows[0], ['class', 'files', 'size_bytes', 'excluded'])
        self.assertEqual(rows[1], ['a', '2', str(manifests['a'].total_size), '1'])
        self.assertEqual(rows[2][3], '1')

    def test_class_without_pe32_files(self):
        with self.assertRaises(ValidationError) as caught:
            IngestService(self.config(a='ca', x='text_only'), self.writer).execute()
        self.assertEqual(error_text(caught.exception), 'class x: 0 PE32 files')
        self.assertFalse(self.writer.exists('manifests', 'a.csv'))

    def test_rerun_is_identical(self):
        IngestService(self.config(), self.writer).execute()
        first = self.writer.read_text('manifests', 'a.csv')
        IngestService(self.config(), self.writer).execute()
        self.assertEqual(self.writer.read_text('manifests', 'a.csv'), first)

    def test_missing_directory(self):
        with self.assertRaises(ValidationError):
            IngestService(self.config(a='ca', b='nowhere'), self.writer).execute()


class ExtractTests(TempDirTestCase):
    """Tests for ExtractService"""

    def extract(self, config):
        writer = ArtifactWriter(config.out)
        IngestService(config, writer).execute()
        return ExtractService(config, writer).execute(), writer

    def test_pe_header_columns(self):
        config = self.demo_config()
        extraction, writer = self.extract(config)

        self.assertEqual(extraction.dataset.n_attributes, 13)
        self.assertEqual(len(extraction.dataset), 20)
        header = read_rows(writer.path('features', 'pe_header', 'benign-vs-malware.csv'))[0]
        self.assertEqual((header[0], header[-1], len(header)), ('sample_id', 'class{benign|malware}', 15))
        self.assertIn('ShortInfo_DLL:binary', header)
        reloaded = load_task_dataset(config, writer, 'benign vs malware')
        self.assertEqual(reloaded.schema, extraction.dataset.schema)
        self.assertEqual(reloaded.samples, extraction.dataset.samples)

    def test_byte_randomness_columns(self):
        extraction, _ = self.extract(self.demo_config(family='byte_randomness'))
        self.assertEqual(extraction.dataset.n_attributes, 30)

    def test_opcode_ngrams_from_listings(self):
        extraction, writer = self.extract(self.demo_config(family='opcode_ngram', ngram_n=2))

        vocab = NgramVocabulary.from_text(writer.read_text('features', 'opcode_ngram_2', 'vocabulary.txt'))
        self.assertEqual(vocab, extraction.vocabulary)
        self.assertEqual(extraction.dataset.attribute_names, vocab.column_names())
        self.assertTrue(writer.exists('features', 'opcode_ngram_2', 'class_frequencies.csv'))

    def test_disassembler_output_is_cached(self):
        listing = render_listing('sample.exe', ['push', 'mov', 'call', 'ret'] * 5)
        config = self.demo_config(family='opcode_ngram', listings='', disassembler='objdump -d {path}')
        with patch('pipeline.services.disassemble', return_value=listing) as disassembler:
            _, writer = self.extract(config)
            calls = disassembler.call_count
            ExtractService(config, writer).execute()

        self.assertEqual(calls, 20)
        self.assertEqual(disassembler.call_count, calls)
        self.assertEqual(writer.read_text('listings', 'malware', 'malware_000.exe.asm'), listing)

    def test_opcode_family_needs_a_source(self):
        with self.assertRaises(ValidationError):
            self.extract(self.demo_config(family='opcode_ngram', listings=''))

    def test_api_bigrams_without_pairs(self):
        for name in ('a', 'b'):
            for i in range(3):
                spec = FixtureSpec(imports={'KERNEL32.dll': ['ExitProcess']}, timestamp=1_200_000_000 + i)
                write(self.root / name / f"{i}.exe", build_pe32(spec))
        config = config_from_payload(
            {'classes': 'a, b', 'corpora': {'a': 'a', 'b': 'b'}, 'family': 'api_ngram', 'ngram_n': 2, 'out': 'out'},
            base_dir=self.root,
        )
        with self.assertRaises(ValidationError) as caught:
            self.extract(config)
        self.assertIn('no 2-grams minable', error_text(caught.exception))

    def test_failures_below_ceiling_are_excluded(self):
        config = self.demo_config(family='opcode_ngram')
        victim = sorted((self.root / 'demo' / 'listings' / 'benign').iterdir())[4]
        victim.unlink()
        missing = victim.name.removesuffix('.asm')

        extraction, writer = self.extract(config)

        self.assertEqual(len(extraction.dataset), 19)
        self.assertEqual([f.path for f in extraction.failures], [missing])
        failures = read_rows(writer.path('features', 'opcode_ngram_2', 'failures.csv'))
        self.assertEqual(failures[1][:2], ['benign', missing])

    def test_failures_above_ceiling(self):
        config = self.demo_config(family='opcode_ngram')
        for path in sorted((self.root / 'demo' / 'listings' / 'malware').iterdir())[:3]:
            path.unlink()
        with self.assertRaises(ValidationError) as caught:
            self.extract(config)
        self.assertIn('class malware: 3 of 10 files failed extraction', error_text(caught.exception))


class SyntheticCorpusTests(TempDirTestCase):
    """Tests for generate_demo_corpus"""

    def test_reproducible(self):
        generate_demo_corpus(self.root / 'one', per_class=3, seed=5)
        generate_demo_corpus(self.root / 'two', per_class=3, seed=5)
        for name in ('corpus/malware/malware_002.exe', 'listings/benign/benign_001.exe.asm', 'demo.env'):
            self.assertEqual((self.root / 'one' / name).read_bytes(), (self.root / 'two' / name).read_bytes())

    def test_class_traits(self):
        generate_demo_corpus(self.root, per_class=15, seed=1)
        sigs = default_signatures()
        for path in sorted((self.root / 'corpus' / 'benign').iterdir()):
            report = extract_report(path.read_bytes(), sigs, path.name)
            self.assertEqual((report.packer, report.suspicious_api, report.urls), (0, 0, 0), path.name)
        for path in sorted((self.root / 'corpus' / 'malware').iterdir()):
            report = extract_report(path.read_bytes(), sigs, path.name)
            self.assertEqual(report.packer, 1, path.name)
            self.assertGreaterEqual(report.suspicious_api, 1)
            self.assertGreaterEqual(report.urls, 1)

    def test_listing_parses(self):
        text = render_listing('f.exe', ['push', 'int3', 'call', 'ret'])
        self.assertEqual(parse_disassembly(text), ('push', 'int3', 'call', 'ret'))


class AuditTests(TempDirTestCase):
    """Tests for AuditService"""

    def test_histograms(self):
        config = self.demo_config(per_class=30)
        writer = ArtifactWriter(config.out)
        IngestService(config, writer).execute()

        audits = AuditService(config, writer).execute()

        self.assertEqual(sum(audits['benign'].histogram.values()), 30)
        self.assertEqual(audits['benign'].tampered, ())
        for sample_id in audits['malware'].tampered:
            self.assertTrue(sample_id.startswith('malware/'))
        self.assertEqual(read_rows(writer.path('audit', 'malware_years.csv'))[0], ['year', 'count'])
        self.assertTrue(writer.exists('audit', 'benign_tampered.txt'))


class RunTests(SimpleTestCase):
    """End-to-end runs over the 200 + 200 demo corpus"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.root = Path(tempfile.mkdtemp())
        cls.config_path = generate_demo_corpus(cls.root / 'demo', per_class=200, seed=0)
        call_command('run', config=str(cls.config_path), stdout=io.StringIO())
        cls.out = cls.root / 'demo' / 'out'

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.root, ignore_errors=True)
        super().tearDownClass()

    def test_grid(self):
        rows = read_rows(self.out / 'reports' / 'grid.csv')

        self.assertEqual(rows[0], ['selection', 'task', 'C4.5', 'k-NN', 'best'])
        self.assertEqual([row[0] for row in rows[1:]], ['All features', 'Information Gain', 'Cfs'])
        for row in rows[1:]:
            for cell in row[2:4]:
                self.assertRegex(cell, r'^\d+\.\d{2}$')
        self.assertEqual(rows[1][1], 'bn_vs_ml')
        self.assertGreaterEqual(float(rows[1][2]), 95.0)
        self.assertGreaterEqual(float(rows[1][3]), 95.0)

    def test_infogain_subset_respects_threshold(self):
        ranking = read_rows(self.out / 'selection' / 'bn_vs_ml' / 'infogain-0-1_ranking.csv')
        merits = {name: float(merit) for merit, name in ranking[1:]}
        kept = (self.out / 'selection' / 'bn_vs_ml' / 'infogain-0-1_attributes.txt').read_text().splitlines()[1:]

        self.assertTrue(kept)
        self.assertEqual(set(kept), {name for name, merit in merits.items() if merit >= 0.1})

    def test_best_models_load(self):
        for mode in ('none', 'infogain:0.1', 'cfs'):
            text = (self.out / 'models' / 'best' / slug(mode) / 'bn_vs_ml.json').read_text()
            self.assertIn(load_model(text).method, (Method.C45, Method.KNN))

    def test_rerun_is_byte_identical(self):
        other = self.root / 'second'
        call_command('run', config=str(self.config_path), out=str(other), stdout=io.StringIO())
        self.assertEqual(
            (other / 'reports' / 'grid.csv').read_bytes(), (self.out / 'reports' / 'grid.csv').read_bytes()
        )


class CommandTests(TempDirTestCase):
    """Tests for the management commands and their exit codes"""

    def test_missing_config(self):
        with self.assertRaises(CommandError) as caught:
            call_command('ingest', config=str(self.root / 'absent.env'), stdout=io.StringIO())
        self.assertEqual(caught.exception.returncode, ExitCode.CONFIG_ERROR)

    def test_invalid_config(self):
        path = write(self.root / 'bad.env', "classes = a\ncorpus.a = ca\n")
        with self.assertRaises(CommandError) as caught:
            call_command('run', config=str(path), stdout=io.StringIO())
        self.assertEqual(caught.exception.returncode, ExitCode.CONFIG_ERROR)

    def test_step_by_step(self):
        config = generate_demo_corpus(self.root / 'demo', per_class=10, seed=2)
        out = self.root / 'out'
        for name in ('ingest', 'extract', 'select', 'train', 'eval', 'audit'):
            call_command(name, config=str(config), out=str(out), stdout=io.StringIO())

        model = load_model((out / 'models' / 'bn_vs_ml' / 'cfs' / 'knn.json').read_text())
        self.assertEqual(model.class_names, ('benign', 'malware'))
        self.assertTrue((out / 'reports' / 'grid.md').is_file())
        self.assertTrue((out / 'selection' / 'bn_vs_ml' / 'none_attributes.txt').is_file())

    def test_extract_family_flag(self):
        config = generate_demo_corpus(self.root / 'demo', per_class=5, seed=2)
        out = self.root / 'out'
        call_command('ingest', config=str(config), out=str(out), stdout=io.StringIO())
        call_command('extract', config=str(config), out=str(out), family='byte_randomness', stdout=io.StringIO())
        self.assertTrue((out / 'features' / 'byte_randomness' / 'bn_vs_ml.csv').is_file())

    def demo_env(self, *lines):
        generate_demo_corpus(self.root / 'demo', per_class=10, seed=4)
        return write(
            self.root / 'pipeline.env',
            "classes = benign, malware\n"
            "corpus.benign = demo/corpus/benign\n"
            "corpus.malware = demo/corpus/malware\n"
            "out = out\n" + ''.join(f"{line}\n" for line in lines),
        )

    def test_empty_selection_fails_only_its_section(self):
        path = self.demo_env("selection = none, infogain:5", "models = c45")
        with self.assertRaises(CommandError) as caught:
            call_command('run', config=str(path), stdout=io.StringIO())

        self.assertEqual(caught.exception.returncode, ExitCode.PARTIAL_FAILURE)
        rows = read_rows(self.root / 'out' / 'reports' / 'grid.csv')
        self.assertEqual([row[0] for row in rows[1:]], ['All features', 'Information Gain'])
        self.assertRegex(rows[1][2], r'^\d+\.\d{2}$')
        self.assertEqual(rows[2][2:], ['—', ''])
        self.assertTrue((self.root / 'out' / 'models' / 'best' / 'none' / 'benign-vs-malware.json').is_file())

        with self.assertRaises(CommandError) as caught:
            call_command('select', config=str(path), stdout=io.StringIO())
        self.assertEqual(caught.exception.returncode, ExitCode.PARTIAL_FAILURE)

    def test_best_model_failure_keeps_the_grid(self):
        path = self.demo_env("models = c45")
        with patch('pipeline.services.train_model', side_effect=ValueError('singular matrix')):
            call_command('run', config=str(path), stdout=io.StringIO())

        rows = read_rows(self.root / 'out' / 'reports' / 'grid.csv')
        self.assertEqual(rows[1][3], 'C4.5')
        self.assertFalse((self.root / 'out' / 'models' / 'best').exists())

    def test_failed_cell_gives_partial_exit(self):
        path = self.demo_env("models = c45, knn", "model.knn.k = 100")
        with self.assertRaises(CommandError) as caught:
            call_command('run', config=str(path), stdout=io.StringIO())

        self.assertEqual(caught.exception.returncode, ExitCode.PARTIAL_FAILURE)
        row = read_rows(self.root / 'out' / 'reports' / 'grid.csv')[1]
        self.assertEqual(row[3], '—')
        self.assertEqual(row[4], 'C4.5')

    def test_demo_corpus_command(self):
        call_command('demo_corpus', dest=str(self.root / 'demo'), per_class=2, seed=0, stdout=io.StringIO())
        config = load_config(self.root / 'demo' / 'demo.env')
        self.assertEqual(config.selections, tuple(parse_selection(s) for s in ('none', 'infogain:0.1', 'cfs')))
        self.assertEqual(len(list((self.root / 'demo' / 'corpus' / 'malware').iterdir())), 2)
