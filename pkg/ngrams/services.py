from typing import Mapping, Sequence

from rest_framework.exceptions import ValidationError

from featuresets.constants import AttributeKind
from featuresets.schema import AttributeSpec, Dataset, FeatureVector

from .constants import DEFAULT_TOP_K, PROFILE_COLUMN_PREFIX
from .huffman import RandomnessProfile
from .sequences import ngrams
from .vocabulary import NgramVocabulary, presence_vector


def profile_columns(count: int) -> list[str]:
    width = len(str(count))
    return [f"{PROFILE_COLUMN_PREFIX}_{i:0{width}d}" for i in range(1, count + 1)]


def profile_dataset(
    rows: Sequence[tuple[str, int | None, RandomnessProfile]],
    class_names: Sequence[str],
    count: int,
) -> Dataset:
    schema = tuple(AttributeSpec(name, AttributeKind.NUMERIC) for name in profile_columns(count))
    samples = tuple(
        FeatureVector(sample_id=sample_id, label=label, values=tuple(float(s) for s in profile.scores))
        for sample_id, label, profile in rows
    )
    return Dataset(schema=schema, class_names=tuple(class_names), samples=samples)


def presence_dataset(
    rows: Sequence[tuple[str, int | None, Sequence[str]]],
    vocab: NgramVocabulary,
    class_names: Sequence[str],
    top_k: int = DEFAULT_TOP_K,
) -> Dataset:
    """One binary column per vocabulary n-gram."""
    schema = tuple(AttributeSpec(name, AttributeKind.BINARY) for name in vocab.column_names())
    samples = tuple(
        FeatureVector(sample_id=sample_id, label=label, values=presence_vector(sequence, vocab, top_k))
        for sample_id, label, sequence in rows
    )
    return Dataset(schema=schema, class_names=tuple(class_names), samples=samples)


def class_frequencies(
    vocab: NgramVocabulary,
    sequences_by_class: Mapping[str, Sequence[Sequence[str]]],
) -> dict[str, tuple[float, ...]]:
    """Per class, the file fraction of every vocabulary n-gram (in vocabulary order).

    Same result as `class_frequency` per n-gram, with each file's n-gram set
    built once.
    """
    result = {}
    for class_name, files in sequences_by_class.items():
        if not files:
            raise ValidationError(f"class {class_name}: no files.")
        file_sets = [set(ngrams(sequence, vocab.n)) for sequence in files]
        result[class_name] = tuple(
            sum(1 for grams in file_sets if gram in grams) / len(file_sets) for gram in vocab.grams
        )
    return result
