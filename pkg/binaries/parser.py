"""PE32 identification and header feature report.

Header fields that the features depend on directly (COFF header, data
directory table) are read here with bounds-checked `struct` unpacking so
that hostile files can never push a read past the buffer. Sections and the
import table are walked with pefile.
"""
import logging
import re
import struct
from dataclasses import dataclass, field

import numpy as np
import pefile
from rest_framework.exceptions import ValidationError

from .constants import (
    CHARACTERISTIC_DLL,
    COFF_HEADER_SIZE,
    DOS_MAGIC,
    E_LFANEW_OFFSET,
    MACHINE_I386,
    MAX_DATA_DIRECTORIES,
    MIN_DOS_HEADER,
    ManifestVerdict,
    OPTIONAL_MAGIC_PE32,
    OPTIONAL_MAGIC_PE32_PLUS,
    PE_SIGNATURE,
    PeKind,
    SECTION_CNT_CODE,
    SECTION_MEM_EXECUTE,
    SECURITY_DIRECTORY,
    STANDARD_SECTION_NAMES,
    URL_PATTERN,
    XOR_PROBE_MARKER,
)
from .signatures import SignatureSet

logger = logging.getLogger(__name__)

_URL_RE = re.compile(URL_PATTERN)
_IMPORT_DIRECTORY = pefile.DIRECTORY_ENTRY['IMAGE_DIRECTORY_ENTRY_IMPORT']


@dataclass(frozen=True)
class HeaderProbe:
    """The fixed-layout header fields, or the reason the file is rejected."""

    verdict: str
    e_lfanew: int = 0
    machine: int = 0
    number_of_sections: int = 0
    timestamp: int = 0
    characteristics: int = 0
    number_of_rva_and_sizes: int = 0
    data_directories: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class SectionInfo:
    name: str
    raw_name: bytes
    characteristics: int
    raw_size: int
    entropy: float

    @property
    def is_executable(self) -> bool:
        return bool(self.characteristics & (SECTION_MEM_EXECUTE | SECTION_CNT_CODE))


@dataclass(frozen=True)
class PeReport:
    sample_id: str
    directories: int
    xor_detected: int
    is_dll: int
    file_size: int
    detected: int
    sections: int
    digital_signature: int
    packer: int
    anti_debug: int
    anti_vm: int
    suspicious_api: int
    suspicious_sections: int
    urls: int
    api_calls: tuple[str, ...]
    compile_timestamp: int
    section_table: tuple[SectionInfo, ...] = ()
    warnings: tuple[str, ...] = field(default=(), compare=False)

    @property
    def has_warnings(self) -> bool:
        return bool(self.warnings)

    def header_features(self) -> tuple[int, ...]:
        """The thirteen header features in `HEADER_FEATURES` order."""
        return (
            self.directories,
            self.xor_detected,
            self.is_dll,
            self.file_size,
            self.detected,
            self.sections,
            self.digital_signature,
            self.packer,
            self.anti_debug,
            self.anti_vm,
            self.suspicious_api,
            self.suspicious_sections,
            self.urls,
        )


def _u16(data: bytes, offset: int) -> int | None:
    if offset < 0 or offset + 2 > len(data):
        return None
    return struct.unpack_from('<H', data, offset)[0]


def _u32(data: bytes, offset: int) -> int | None:
    if offset < 0 or offset + 4 > len(data):
        return None
    return struct.unpack_from('<I', data, offset)[0]


def probe_header(data: bytes) -> HeaderProbe:
    if len(data) < MIN_DOS_HEADER or data[:2] != DOS_MAGIC:
        return HeaderProbe(verdict=ManifestVerdict.NOT_PE32)
    e_lfanew = _u32(data, E_LFANEW_OFFSET)
    coff = e_lfanew + len(PE_SIGNATURE)
    optional = coff + COFF_HEADER_SIZE
    if optional + 2 > len(data) or data[e_lfanew:coff] != PE_SIGNATURE:
        return HeaderProbe(verdict=ManifestVerdict.NOT_PE32)

    machine, n_sections, timestamp, _, _, _, characteristics = struct.unpack_from('<HHIIIHH', data, coff)
    magic = _u16(data, optional)
    if magic == OPTIONAL_MAGIC_PE32_PLUS:
        return HeaderProbe(verdict=ManifestVerdict.PE32_PLUS, e_lfanew=e_lfanew, machine=machine)
    if machine != MACHINE_I386 or magic != OPTIONAL_MAGIC_PE32:
        return HeaderProbe(verdict=ManifestVerdict.NOT_PE32, e_lfanew=e_lfanew, machine=machine)

    rva_count = _u32(data, optional + 92) or 0
    directories = []
    for index in range(min(MAX_DATA_DIRECTORIES, rva_count)):
        entry = optional + 96 + 8 * index
        address, size = _u32(data, entry), _u32(data, entry + 4)
        if address is None or size is None:
            break
        directories.append((address, size))

    verdict = ManifestVerdict.PE32_DLL if characteristics & CHARACTERISTIC_DLL else ManifestVerdict.PE32_EXE
    return HeaderProbe(
        verdict=verdict,
        e_lfanew=e_lfanew,
        machine=machine,
        number_of_sections=n_sections,
        timestamp=timestamp,
        characteristics=characteristics,
        number_of_rva_and_sizes=rva_count,
        data_directories=tuple(directories),
    )


def identify_pe32(data: bytes) -> str:
    """Classify raw bytes as a PE32 executable, a PE32 DLL or neither."""
    verdict = probe_header(data).verdict
    if verdict == ManifestVerdict.PE32_EXE:
        return PeKind.PE32_EXE
    if verdict == ManifestVerdict.PE32_DLL:
        return PeKind.PE32_DLL
    return PeKind.NOT_PE32


def shannon_entropy(data: bytes) -> float:
    if not data:
        return 0.0
    counts = np.bincount(np.frombuffer(data, dtype=np.uint8), minlength=256)
    p = counts[counts > 0] / len(data)
    return float(-(p * np.log2(p)).sum())


def xor_probe(data: bytes, marker: bytes = XOR_PROBE_MARKER) -> bool:
    """True when some single-byte key 1..255 turns a run of `data` into `marker`.

    A key k matches at offset o iff data[o + i] ^ marker[i] == k for every i,
    so all 255 keys are tested in one vectorised pass.
    """
    buf = np.frombuffer(data, dtype=np.uint8)
    pattern = np.frombuffer(marker, dtype=np.uint8)
    span = buf.size - pattern.size + 1
    if span <= 0:
        return False
    keys = buf[:span] ^ pattern[0]
    candidates = keys != 0
    for i in range(1, pattern.size):
        candidates &= (buf[i:i + span] ^ pattern[i]) == keys
        if not candidates.any():
            return False
    return bool(candidates.any())


def count_urls(data: bytes) -> int:
    return len(set(_URL_RE.findall(data)))


def _section_name(raw: bytes) -> str:
    return raw.rstrip(b'\0').decode('latin-1')


def _is_suspicious_section(section: SectionInfo) -> bool:
    stripped = section.raw_name.rstrip(b'\0')
    if any(byte < 0x20 or byte > 0x7E for byte in stripped):
        return True
    return section.name not in STANDARD_SECTION_NAMES


def _walk_with_pefile(data: bytes) -> tuple[tuple[SectionInfo, ...], tuple[str, ...], list[str]]:
    pe = pefile.PE(data=data, fast_load=True)
    try:
        sections = tuple(
            SectionInfo(
                name=_section_name(section.Name),
                raw_name=bytes(section.Name),
                characteristics=section.Characteristics,
                raw_size=section.SizeOfRawData,
                entropy=section.get_entropy(),
            )
            for section in pe.sections
        )
        pe.parse_data_directories(directories=[_IMPORT_DIRECTORY])
        calls = []
        for entry in getattr(pe, 'DIRECTORY_ENTRY_IMPORT', []):
            for imp in entry.imports:
                if imp.import_by_ordinal or not imp.name:
                    calls.append(f"ORD:{imp.ordinal}")
                else:
                    calls.append(imp.name.decode('ascii', 'replace'))
        # pefile's "typical of packed executables" note is a heuristic, not a parse fault
        warnings = [
            w for w in pe.get_warnings() if 'import' in w.lower() and 'packed' not in w.lower()
        ]
    finally:
        pe.close()
    return sections, tuple(calls), warnings


def extract_report(data: bytes, sigs: SignatureSet, sample_id: str = '') -> PeReport:
    """Compute the header feature report of one PE32 file.

    Pure function of (data, sigs). Problems inside the section or import
    tables never raise: the report is returned best-effort with `warnings`.
    """
    probe = probe_header(data)
    if probe.verdict not in (ManifestVerdict.PE32_EXE, ManifestVerdict.PE32_DLL):
        raise ValidationError(f"{sample_id or 'input'}: not a PE32 file ({probe.verdict}).")

    warnings = []
    try:
        section_table, api_calls, import_warnings = _walk_with_pefile(data)
        warnings.extend(import_warnings)
    except Exception as exc:  # pefile raises many types on hostile input
        logger.warning("%s: PE tables unreadable (%s)", sample_id or 'input', exc)
        section_table, api_calls = (), ()
        warnings.append(f"pe tables unreadable: {exc}")
    if warnings:
        logger.warning("%s: report flagged (%s)", sample_id or 'input', '; '.join(warnings))

    directories = sum(1 for address, size in probe.data_directories if address and size)
    signed = (
        len(probe.data_directories) > SECURITY_DIRECTORY
        and all(probe.data_directories[SECURITY_DIRECTORY])
    )
    anti_debug = len(sigs.matching_apis(api_calls, sigs.anti_debug_apis))
    suspicious_api = len(sigs.matching_apis(api_calls, sigs.suspicious_apis))
    anti_vm = sum(1 for pattern in sigs.anti_vm_byte_patterns if pattern in data)

    packer_names = {name.lower() for name in sigs.packer_section_names}
    packed = any(s.name.lower() in packer_names for s in section_table) or any(
        s.is_executable and s.entropy >= sigs.entropy_threshold for s in section_table
    )
    xor_detected = int(xor_probe(data))

    return PeReport(
        sample_id=sample_id,
        directories=directories,
        xor_detected=xor_detected,
        is_dll=int(probe.verdict == ManifestVerdict.PE32_DLL),
        file_size=len(data),
        detected=int(anti_debug > 0) + int(anti_vm > 0) + xor_detected + int(packed),
        sections=probe.number_of_sections,
        digital_signature=int(signed),
        packer=int(packed),
        anti_debug=anti_debug,
        anti_vm=anti_vm,
        suspicious_api=suspicious_api,
        suspicious_sections=sum(1 for s in section_table if _is_suspicious_section(s)),
        urls=count_urls(data),
        api_calls=api_calls,
        compile_timestamp=probe.timestamp,
        section_table=section_table,
        warnings=tuple(warnings),
    )
