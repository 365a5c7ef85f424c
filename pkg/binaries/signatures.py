"""Heuristic signature lists behind the PE header report.

The lists live in an editable key/value file (see `data/signatures.env`) read
with python-dotenv, so analysts can swap them without touching code.
"""
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from django.conf import settings
from dotenv import dotenv_values
from rest_framework.exceptions import ValidationError


@dataclass(frozen=True)
class SignatureSet:
    anti_debug_apis: tuple[str, ...]
    anti_vm_byte_patterns: tuple[bytes, ...]
    suspicious_apis: tuple[str, ...]
    packer_section_names: tuple[str, ...]
    entropy_threshold: float

    def __post_init__(self):
        for name in ('anti_debug_apis', 'anti_vm_byte_patterns', 'suspicious_apis', 'packer_section_names'):
            values = getattr(self, name)
            if not values or any(not v for v in values):
                raise ValidationError(f"Signature list '{name}' must hold non-empty entries.")
        if not 0 <= self.entropy_threshold <= 8:
            raise ValidationError("entropy_threshold must lie in [0, 8] bits per byte.")

    def matching_apis(self, api_calls, watched) -> set[str]:
        wanted = {name.lower() for name in watched}
        return {call.lower() for call in api_calls if call.lower() in wanted}


def _split(raw: str | None) -> tuple[str, ...]:
    if not raw:
        return ()
    return tuple(part.strip() for part in raw.split(',') if part.strip())


def load_signatures(path) -> SignatureSet:
    source = Path(path)
    if not source.exists():
        raise ValidationError(f"Signature file not found: {source}")
    values = {key.upper(): value for key, value in dotenv_values(source).items()}

    try:
        patterns = tuple(bytes.fromhex(p) for p in _split(values.get('ANTI_VM_BYTE_PATTERNS')))
    except ValueError as exc:
        raise ValidationError(f"{source}: bad hex pattern ({exc})") from exc
    try:
        threshold = float(values.get('ENTROPY_THRESHOLD') or 7.2)
    except ValueError as exc:
        raise ValidationError(f"{source}: ENTROPY_THRESHOLD is not a number") from exc

    return SignatureSet(
        anti_debug_apis=_split(values.get('ANTI_DEBUG_APIS')),
        anti_vm_byte_patterns=patterns,
        suspicious_apis=_split(values.get('SUSPICIOUS_APIS')),
        packer_section_names=_split(values.get('PACKER_SECTION_NAMES')),
        entropy_threshold=threshold,
    )


@lru_cache(maxsize=None)
def default_signatures() -> SignatureSet:
    return load_signatures(settings.MALWARELAB['SIGNATURES_FILE'])
