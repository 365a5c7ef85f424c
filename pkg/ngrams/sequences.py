"""Mnemonic and API-call sequences, and the n-grams drawn from them."""
import logging
import re
import shlex
import subprocess
from collections import Counter
from typing import Sequence

from rest_framework.exceptions import ValidationError

from .constants import API_GRAM_LENGTHS, BAD_INSTRUCTION

logger = logging.getLogger(__name__)

# `  401000:\t55                   \tpush   %ebp`
_LISTING_LINE = re.compile(r"^\s*[0-9a-fA-F]+:\s+[0-9a-fA-F]{2}(?:\s|$)")
_HEX_BYTE = re.compile(r'^[0-9a-fA-F]{2}$')


def parse_disassembly(text: str, source: str = '') -> tuple[str, ...]:
    """Ordered, lowercased mnemonics of a disassembler listing.

    objdump-style listings are recognised by an `address:` prefix followed by
    raw instruction bytes, so a `cafe:     file format` header never counts as
    one. In that case every other line (section headers, labels, blanks) is
    ignored and the raw bytes after the address are skipped. Without any
    such line the text is read as one mnemonic per line.
    """
    lines = text.splitlines()
    mnemonics = []
    if any(_LISTING_LINE.match(line) for line in lines):
        for line in lines:
            if not _LISTING_LINE.match(line):
                continue
            tokens = line.split(':', 1)[1].split()
            while tokens and _HEX_BYTE.match(tokens[0]):
                tokens.pop(0)
            if tokens:
                mnemonics.append(tokens[0].lower())
    else:
        for line in lines:
            stripped = line.strip()
            if not stripped or stripped.endswith(':') or stripped[0] in '#;':
                continue
            mnemonics.append(stripped.split()[0].lower())

    mnemonics = [m for m in mnemonics if m != BAD_INSTRUCTION]
    if not mnemonics:
        logger.warning("%s: no instruction lines recognised", source or 'listing')
    return tuple(mnemonics)


def disassemble(command: str, path, timeout: float = 120) -> str:
    """Run the configured disassembler (`{path}` is substituted) and return its stdout."""
    argv = [part.replace('{path}', str(path)) for part in shlex.split(command)]
    if not any('{path}' in part for part in shlex.split(command)):
        argv.append(str(path))
    result = subprocess.run(argv, capture_output=True, text=True, timeout=timeout, check=False)
    if result.returncode != 0:
        raise ValidationError(f"{path}: disassembler exited with {result.returncode}: {result.stderr.strip()[:200]}")
    return result.stdout


def ngrams(sequence: Sequence[str], n: int) -> list[tuple[str, ...]]:
    if n < 1:
        raise ValidationError("n-gram length must be at least 1.")
    return [tuple(sequence[i:i + n]) for i in range(len(sequence) - n + 1)]


def count_ngrams(sequence: Sequence[str], n: int) -> Counter:
    return Counter(ngrams(sequence, n))


def api_ngrams(api_calls: Sequence[str], n: int) -> list[tuple[str, ...]]:
    """1-grams are the imported names, 2-grams adjacent pairs in import-table order."""
    if n not in API_GRAM_LENGTHS:
        raise ValidationError(f"API n-grams support n in {API_GRAM_LENGTHS}, got {n}.")
    return ngrams(list(api_calls), n)
