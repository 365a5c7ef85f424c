"""Feature n-gram vocabularies: mining, presence vectors and per-class file frequency."""
import re
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from rest_framework.exceptions import ParseError, ValidationError

from .constants import DEFAULT_PER_CLASS, DEFAULT_TOP_K, NgramSource
from .sequences import count_ngrams, ngrams

_HEADER = re.compile(r'^n=(\d+) source=(\w+)$')


def render_token(gram: Sequence[str]) -> str:
    """`('int3', 'mov', 'push')` -> `int3movpush`."""
    return ''.join(gram)


def _rank_key(item):
    gram, count = item
    return -count, render_token(gram), gram


def ranked_ngrams(counts: Counter, limit: int) -> list[tuple[str, ...]]:
    """Most frequent n-grams first, equal counts in lexicographic token order."""
    return [gram for gram, _ in sorted(counts.items(), key=_rank_key)[:limit]]


@dataclass(frozen=True)
class NgramVocabulary:
    n: int
    grams: tuple[tuple[str, ...], ...]
    source: str = NgramSource.OPCODE

    def __post_init__(self):
        if len(set(self.grams)) != len(self.grams):
            raise ValidationError("Vocabulary n-grams must be distinct.")
        if any(len(gram) != self.n for gram in self.grams):
            raise ValidationError(f"Every vocabulary entry must have {self.n} items.")
        if self.source not in NgramSource.values:
            raise ValidationError(f"Unknown n-gram source '{self.source}'.")

    def __len__(self):
        return len(self.grams)

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(render_token(gram) for gram in self.grams)

    def column_names(self) -> list[str]:
        """Tokens made unique for use as dataset columns."""
        seen = Counter()
        names = []
        for token in self.tokens:
            seen[token] += 1
            names.append(token if seen[token] == 1 else f"{token}#{seen[token]}")
        return names

    def to_text(self) -> str:
        lines = [f"n={self.n} source={self.source}"]
        lines.extend(' '.join(gram) for gram in self.grams)
        return '\n'.join(lines) + '\n'

    @classmethod
    def from_text(cls, text: str) -> 'NgramVocabulary':
        lines = text.splitlines()
        match = _HEADER.match(lines[0].strip()) if lines else None
        if not match:
            raise ParseError("Vocabulary file must start with 'n=<n> source=<src>'.")
        grams = tuple(tuple(line.split()) for line in lines[1:] if line.strip())
        return cls(n=int(match.group(1)), grams=grams, source=match.group(2))


def mine_vocabulary(
    sequences_by_class: Mapping[str, Sequence[Sequence[str]]],
    n: int,
    per_class: int = DEFAULT_PER_CLASS,
    source: str = NgramSource.OPCODE,
) -> NgramVocabulary:
    """Union of each class's `per_class` most common n-grams.

    Classes are merged in mapping order and duplicates keep their first
    position, so the result holds at most classes x per_class entries.
    """
    if len(sequences_by_class) < 2:
        raise ValidationError("Vocabulary mining needs at least two classes.")
    if per_class < 1:
        raise ValidationError("per_class must be at least 1.")

    merged = {}
    for class_name, sequences in sequences_by_class.items():
        totals = Counter()
        for sequence in sequences:
            totals.update(count_ngrams(sequence, n))
        if not totals:
            raise ValidationError(f"class {class_name}: no {n}-grams minable")
        for gram in ranked_ngrams(totals, per_class):
            merged.setdefault(gram, None)
    return NgramVocabulary(n=n, grams=tuple(merged), source=source)


def presence_vector(sequence: Sequence[str], vocab: NgramVocabulary, top_k: int = DEFAULT_TOP_K) -> tuple[int, ...]:
    """1 where the vocabulary n-gram is among the file's own `top_k` most frequent n-grams."""
    if not vocab.grams:
        raise ValidationError("Vocabulary is empty.")
    top = set(ranked_ngrams(count_ngrams(sequence, vocab.n), top_k))
    return tuple(int(gram in top) for gram in vocab.grams)


def class_frequency(gram: Sequence[str], class_files: Sequence[Sequence[str]]) -> float:
    """Fraction of the class's files containing `gram` at least once."""
    if not class_files:
        raise ValidationError("Class has no files.")
    gram = tuple(gram)
    hits = sum(1 for sequence in class_files if gram in set(ngrams(sequence, len(gram))))
    return hits / len(class_files)
