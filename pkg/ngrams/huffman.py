"""Huffman code lengths and sliding-window randomness profiles of binary files."""
import heapq
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np
from rest_framework.exceptions import ValidationError

from .constants import DEFAULT_PROFILE_COUNT, DEFAULT_PROFILE_SKIP, DEFAULT_PROFILE_WINDOW


@dataclass(frozen=True)
class HuffmanTable:
    """Code length in bits for each of the 256 byte values; None when the byte is absent."""

    lengths: tuple[int | None, ...]

    def __post_init__(self):
        if len(self.lengths) != 256:
            raise ValidationError("A Huffman table has exactly 256 entries.")

    def as_array(self) -> np.ndarray:
        """Lengths as an int array with 0 for absent bytes."""
        return np.array([length or 0 for length in self.lengths], dtype=np.int64)

    def kraft_sum(self) -> Fraction:
        return sum((Fraction(1, 2 ** length) for length in self.lengths if length), Fraction(0))

    def encoded_length(self, frequencies: Mapping[int, int]) -> int:
        return sum(count * self.lengths[symbol] for symbol, count in frequencies.items() if count)


def code_lengths(frequencies: Mapping[int, int]) -> HuffmanTable:
    """Optimal prefix-code lengths for symbols 0..255 with the given counts.

    The merge queue is ordered by (weight, smallest symbol in the subtree),
    so equal weights always merge the same way. A lone symbol gets length 1.
    """
    present = sorted(symbol for symbol, count in frequencies.items() if count > 0)
    if not present:
        raise ValidationError("Cannot build a Huffman code for empty input.")
    lengths = [None] * 256
    if len(present) == 1:
        lengths[present[0]] = 1
        return HuffmanTable(tuple(lengths))

    for symbol in present:
        lengths[symbol] = 0
    heap = [(frequencies[symbol], symbol, (symbol,)) for symbol in present]
    heapq.heapify(heap)
    while len(heap) > 1:
        weight_a, low_a, members_a = heapq.heappop(heap)
        weight_b, low_b, members_b = heapq.heappop(heap)
        for symbol in members_a + members_b:
            lengths[symbol] += 1
        heapq.heappush(heap, (weight_a + weight_b, min(low_a, low_b), members_a + members_b))
    return HuffmanTable(tuple(lengths))


def huffman_lengths(data: bytes) -> HuffmanTable:
    if not data:
        raise ValidationError("Cannot build a Huffman code for empty input.")
    counts = np.bincount(np.frombuffer(data, dtype=np.uint8), minlength=256)
    return code_lengths({symbol: int(count) for symbol, count in enumerate(counts) if count})


@dataclass(frozen=True)
class RandomnessProfile:
    scores: tuple[int, ...]
    offsets: tuple[int, ...]
    window_size: int
    skip: int

    def __len__(self):
        return len(self.scores)


def window_scores(data: bytes, table: HuffmanTable, window: int, skip: int) -> tuple[np.ndarray, np.ndarray]:
    """Start offsets and Σ code lengths of every window; the last window may be partial."""
    per_byte = table.as_array()[np.frombuffer(data, dtype=np.uint8)]
    prefix = np.concatenate(([0], np.cumsum(per_byte)))
    offsets = np.arange(0, len(data), skip)
    ends = np.minimum(offsets + window, len(data))
    return offsets, prefix[ends] - prefix[offsets]


def randomness_profile(
    data: bytes,
    window: int = DEFAULT_PROFILE_WINDOW,
    skip: int = DEFAULT_PROFILE_SKIP,
    count: int = DEFAULT_PROFILE_COUNT,
) -> RandomnessProfile:
    """The `count` most random windows of a file, in file order.

    Windows are ranked by their sum of Huffman code lengths (higher = more
    unique content), ties going to the lower offset. Files with fewer than
    `count` windows are zero-padded at the tail.
    """
    if window < 1 or skip < 1 or count < 1:
        raise ValidationError("window, skip and count must all be at least 1.")
    table = huffman_lengths(data)
    offsets, scores = window_scores(data, table, window, skip)

    ranked = np.lexsort((offsets, -scores))[:count]
    chosen = np.sort(ranked)
    padding = count - chosen.size
    return RandomnessProfile(
        scores=tuple(int(s) for s in scores[chosen]) + (0,) * padding,
        offsets=tuple(int(o) for o in offsets[chosen]),
        window_size=window,
        skip=skip,
    )
