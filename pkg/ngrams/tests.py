import itertools
import random
from fractions import Fraction

from django.test import SimpleTestCase
from rest_framework.exceptions import ValidationError

from featuresets.constants import AttributeKind

from .constants import NgramSource
from .huffman import code_lengths, huffman_lengths, randomness_profile
from .sequences import api_ngrams, ngrams, parse_disassembly
from .services import class_frequencies, presence_dataset, profile_dataset
from .vocabulary import NgramVocabulary, class_frequency, mine_vocabulary, presence_vector, render_token

OBJDUMP_LISTING = """
sample.exe:     file format pei-i386


Disassembly of section .text:

00401000 <.text>:
  401000:\t55                   \tpush   %ebp
  401001:\t89 e5                \tmov    %esp,%ebp
  401003:\t83 ec 08             \tsub    $0x8,%esp
  401006:\tff                   \t(bad)
  401007:\tc7 04 24 00 00 00 00 \tmovl   $0x0,(%esp)
  40100e:\t00 00
  401010:\tcc                   \tint3
  401011:\tC3                   \tRET
"""


def optimal_length(frequencies):
    """Exhaustive minimum of Σ f·len over all prefix-code length assignments."""
    symbols = list(frequencies)
    best = None
    for lengths in itertools.product(range(1, len(symbols) + 1), repeat=len(symbols)):
        if sum(Fraction(1, 2 ** l) for l in lengths) <= 1:
            total = sum(frequencies[s] * l for s, l in zip(symbols, lengths))
            best = total if best is None else min(best, total)
    return best


class HuffmanTests(SimpleTestCase):
    """Tests for huffman_lengths / code_lengths"""

    def test_single_symbol(self):
        table = huffman_lengths(b'A' * 50)
        self.assertEqual(table.lengths[ord('A')], 1)
        self.assertEqual(sum(1 for length in table.lengths if length is not None), 1)

    def test_two_equal_symbols(self):
        table = huffman_lengths(b'AB')
        self.assertEqual((table.lengths[ord('A')], table.lengths[ord('B')]), (1, 1))

    def test_skewed_three_symbols(self):
        table = huffman_lengths(b'AAAAABC')
        self.assertEqual([table.lengths[ord(c)] for c in 'ABC'], [1, 2, 2])

    def test_empty_input(self):
        with self.assertRaises(ValidationError):
            huffman_lengths(b'')

    def test_kraft_equality(self):
        """Test Σ 2^-len = 1 on 1000 random frequency tables"""
        rng = random.Random(17)
        for _ in range(1000):
            symbols = rng.sample(range(256), rng.randint(2, 64))
            table = code_lengths({s: rng.randint(1, 1000) for s in symbols})
            self.assertEqual(table.kraft_sum(), 1)

    def test_optimal_for_small_alphabets(self):
        rng = random.Random(23)
        for _ in range(300):
            symbols = rng.sample(range(256), rng.randint(2, 4))
            frequencies = {s: rng.randint(1, 50) for s in symbols}
            table = code_lengths(frequencies)
            self.assertEqual(table.encoded_length(frequencies), optimal_length(frequencies))

    def test_deterministic_ties(self):
        frequencies = {s: 7 for s in range(10)}
        self.assertEqual(code_lengths(frequencies), code_lengths(dict(reversed(frequencies.items()))))


class RandomnessProfileTests(SimpleTestCase):
    """Tests for randomness_profile"""

    def test_single_window_of_one_byte(self):
        profile = randomness_profile(b'\x90' * 32)
        self.assertEqual(profile.scores, (32,) + (0,) * 29)

    def test_offset_order_is_kept(self):
        """Test the alternating window outscores the uniform one and order follows the file"""
        data = b'A' * 32 + b'BC' * 16
        profile = randomness_profile(data)

        self.assertEqual(profile.scores[:2], (32, 64))
        self.assertEqual(randomness_profile(data, count=1).offsets, (32,))

    def test_partial_last_window(self):
        profile = randomness_profile(b'AB' * 20, window=32, skip=32, count=2)
        self.assertEqual(profile.scores, (32, 8))

    def test_invalid_parameters(self):
        for kwargs in ({'window': 0}, {'skip': 0}, {'count': 0}):
            with self.assertRaises(ValidationError):
                randomness_profile(b'abc', **kwargs)

    def test_matches_brute_force(self):
        """Test scores and selection against direct window sums on 100 random files"""
        rng = random.Random(31)
        for trial in range(100):
            if trial % 3:
                size, window, skip = rng.randint(1, 64 * 1024), 32, 32
            else:
                size, window, skip = rng.randint(1, 4096), rng.randint(1, 64), rng.randint(1, 64)
            alphabet = rng.randint(1, 256)
            data = bytes(rng.randrange(alphabet) for _ in range(size)) if size < 4096 else rng.randbytes(size)
            lengths = huffman_lengths(data).lengths

            scores = [sum(lengths[b] for b in data[o:o + window]) for o in range(0, size, skip)]
            top = sorted(range(len(scores)), key=lambda i: (-scores[i], i))[:30]
            expected = [scores[i] for i in sorted(top)]
            expected += [0] * (30 - len(expected))

            profile = randomness_profile(data, window=window, skip=skip, count=30)
            self.assertEqual(list(profile.scores), expected, trial)
            self.assertEqual(len(profile.scores), 30)


class DisassemblyTests(SimpleTestCase):
    """Tests for parse_disassembly"""

    def test_single_instruction(self):
        self.assertEqual(parse_disassembly('  401000: 55  push %ebp'), ('push',))

    def test_one_mnemonic_per_line(self):
        self.assertEqual(parse_disassembly('pop\nret\nint3\n'), ('pop', 'ret', 'int3'))

    def test_objdump_listing(self):
        """Test headers, labels, byte continuations and (bad) are dropped"""
        self.assertEqual(
            parse_disassembly(OBJDUMP_LISTING),
            ('push', 'mov', 'sub', 'movl', 'int3', 'ret'),
        )

    def test_hex_file_name_header_is_not_an_instruction(self):
        listing = "\ncafe:     file format pei-i386\n\n  401000:\t55\tpush   %ebp\n  401001:\tc3\tret\n"
        self.assertEqual(parse_disassembly(listing), ('push', 'ret'))

    def test_bad_entry_dropped(self):
        listing = '\n'.join(
            f"  40100{i}:\t90\t{m}" for i, m in enumerate(['nop', 'push', '(bad)', 'pop', 'ret', 'int3'])
        )
        self.assertEqual(len(parse_disassembly(listing)), 5)

    def test_empty_listing_warns(self):
        with self.assertLogs('ngrams.sequences', level='WARNING'):
            self.assertEqual(parse_disassembly('\n\nDisassembly of section .text:\n', source='x'), ())


class NgramTests(SimpleTestCase):
    """Tests for ngrams and api_ngrams"""

    def test_too_short(self):
        self.assertEqual(api_ngrams(['GetProcAddress'], 2), [])

    def test_pairs(self):
        self.assertEqual(api_ngrams(['a', 'b', 'c'], 2), [('a', 'b'), ('b', 'c')])

    def test_unigrams_are_names(self):
        vocab = mine_vocabulary(
            {'benign': [['GetProcAddress', 'ExitProcess']], 'malware': [['GetProcAddress']]},
            n=1, source=NgramSource.API,
        )
        self.assertIn('GetProcAddress', vocab.tokens)

    def test_api_length_limit(self):
        with self.assertRaises(ValidationError):
            api_ngrams(['a', 'b', 'c'], 3)

    def test_opcode_ngrams(self):
        self.assertEqual(ngrams(['a', 'b', 'c', 'd'], 3), [('a', 'b', 'c'), ('b', 'c', 'd')])


class VocabularyTests(SimpleTestCase):
    """Tests for mine_vocabulary and NgramVocabulary"""

    def test_token_rendering(self):
        self.assertEqual(render_token(('int3', 'mov', 'push')), 'int3movpush')

    def test_full_overlap(self):
        sequence = [f"op{i:03d}" for i in range(150)]
        vocab = mine_vocabulary({'a': [sequence], 'b': [list(sequence)]}, n=3, per_class=100)
        self.assertEqual(len(vocab), 100)

    def test_disjoint_classes(self):
        vocab = mine_vocabulary({'A': [['a', 'b', 'c']], 'B': [['x', 'y', 'z']]}, n=3, per_class=1)
        self.assertEqual(vocab.tokens, ('abc', 'xyz'))

    def test_ranking_by_count_then_token(self):
        sequences = [['mov', 'mov', 'push'], ['add', 'mov', 'push']]
        vocab = mine_vocabulary({'A': sequences, 'B': [['x', 'y']]}, n=2, per_class=2)
        self.assertEqual(vocab.grams[:2], (('mov', 'push'), ('add', 'mov')))

    def test_class_without_ngrams(self):
        with self.assertRaises(ValidationError) as ctx:
            mine_vocabulary({'A': [['a', 'b']], 'B': [['x']]}, n=2)
        self.assertIn('class B', str(ctx.exception.detail))

    def test_deterministic(self):
        rng = random.Random(3)
        data = {c: [[rng.choice('abcdef') for _ in range(40)] for _ in range(5)] for c in 'XY'}
        self.assertEqual(mine_vocabulary(data, n=3, per_class=10), mine_vocabulary(data, n=3, per_class=10))

    def test_text_round_trip(self):
        vocab = NgramVocabulary(n=2, grams=(('GetProcAddress', 'LoadLibraryA'), ('Sleep', 'ExitProcess')), source='api')
        text = vocab.to_text()

        self.assertTrue(text.startswith('n=2 source=api\n'))
        self.assertEqual(NgramVocabulary.from_text(text), vocab)

    def test_column_names_unique(self):
        vocab = NgramVocabulary(n=2, grams=(('ab', 'c'), ('a', 'bc')))
        self.assertEqual(vocab.column_names(), ['abc', 'abc#2'])


class PresenceVectorTests(SimpleTestCase):
    """Tests for presence_vector"""

    def setUp(self):
        self.vocab = NgramVocabulary(n=3, grams=(('a', 'b', 'c'), ('x', 'y', 'z')))

    def test_single_gram(self):
        self.assertEqual(presence_vector(['a', 'b', 'c'], self.vocab), (1, 0))

    def test_empty_sequence(self):
        self.assertEqual(presence_vector([], self.vocab), (0, 0))

    def test_outside_file_top_k(self):
        """Test a token ranked 101st in its file does not count as present"""
        sequence = [f"m{i:03d}" for i in range(152)]
        grams = ngrams(sequence, 3)
        vocab = NgramVocabulary(n=3, grams=(grams[100], grams[99]))

        self.assertEqual(presence_vector(sequence, vocab, top_k=100), (0, 1))

    def test_binary_and_sized(self):
        rng = random.Random(8)
        for _ in range(50):
            sequence = [rng.choice('abcd') for _ in range(rng.randint(0, 60))]
            vector = presence_vector(sequence, self.vocab, top_k=rng.randint(1, 10))
            self.assertEqual(len(vector), len(self.vocab))
            self.assertTrue(set(vector) <= {0, 1})


class ClassFrequencyTests(SimpleTestCase):
    """Tests for class_frequency"""

    def test_every_file(self):
        self.assertEqual(class_frequency(('a', 'b'), [['a', 'b'], ['c', 'a', 'b']]), 1.0)

    def test_no_file(self):
        self.assertEqual(class_frequency(('a', 'b'), [['b', 'a']]), 0.0)

    def test_three_of_four(self):
        files = [['a', 'b'], ['a', 'b', 'a', 'b'], ['x', 'a', 'b'], ['b']]
        self.assertEqual(class_frequency(('a', 'b'), files), 0.75)

    def test_empty_class(self):
        with self.assertRaises(ValidationError):
            class_frequency(('a',), [])

    def test_bulk_matches_single(self):
        vocab = NgramVocabulary(n=2, grams=(('a', 'b'), ('b', 'a')))
        files = {'X': [['a', 'b'], ['b', 'a', 'b']], 'Y': [['b', 'a']]}
        bulk = class_frequencies(vocab, files)

        for name, sequences in files.items():
            self.assertEqual(bulk[name], tuple(class_frequency(g, sequences) for g in vocab.grams))


class FeatureDatasetTests(SimpleTestCase):
    def test_profile_columns(self):
        ds = profile_dataset([('f1', 0, randomness_profile(b'\x00' * 100))], ('benign', 'malware'), 30)

        self.assertEqual(ds.n_attributes, 30)
        self.assertEqual(ds.attribute_names[0], 'Window_01')
        self.assertEqual(ds.samples[0].values[:4], (32.0, 32.0, 32.0, 4.0))

    def test_presence_columns(self):
        vocab = NgramVocabulary(n=3, grams=(('a', 'b', 'c'), ('x', 'y', 'z')))
        ds = presence_dataset([('f1', 1, ['x', 'y', 'z'])], vocab, ('benign', 'malware'))

        self.assertEqual(ds.attribute_names, ['abc', 'xyz'])
        self.assertTrue(all(attr.kind == AttributeKind.BINARY for attr in ds.schema))
        self.assertEqual(ds.samples[0].values, (0, 1))
