"""Synthetic demo corpus.

Benign-like files have low-entropy code, ordinary imports, a certificate
and plausible compile stamps. Malware-like files carry a packed section,
suspicious and anti-debug imports, embedded URLs, rarely a certificate and
sometimes a forged stamp. Each file comes with an objdump-style listing whose
mnemonic mix differs by class.
"""
import logging
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from binaries.builder import (
    CODE_SECTION,
    DATA_SECTION,
    FILE_ALIGNMENT,
    RDATA_SECTION,
    FixtureSpec,
    SectionSpec,
    build_pe32,
)

from .constants import (
    DEMO_CLASSES,
    DEMO_CONFIG_FILE,
    DEMO_CORPUS_DIR,
    DEMO_LISTING_DIR,
    DEMO_PER_CLASS,
    LISTING_SUFFIX,
)
from .writer import ArtifactWriter

logger = logging.getLogger(__name__)


def _epoch(year: int, month: int = 1, day: int = 1) -> int:
    return int(datetime(year, month, day, tzinfo=timezone.utc).timestamp())


PLAUSIBLE_STAMPS = (_epoch(2004), _epoch(2012))
FORGED_STAMPS = (0, 0x12345678, _epoch(2035, 7, 1))

BENIGN_CODE_BYTES = bytes.fromhex('558bec83c45dc3906a00e8ff15')

BENIGN_IMPORTS = {
    'KERNEL32.dll': (
        'GetModuleHandleA', 'GetProcAddress', 'ExitProcess', 'GetCommandLineA', 'HeapAlloc',
        'HeapFree', 'CreateFileA', 'ReadFile', 'CloseHandle', 'GetLastError',
    ),
    'USER32.dll': ('MessageBoxA', 'CreateWindowExA', 'DefWindowProcA', 'GetMessageA', 'DispatchMessageA', 'LoadIconA'),
    'GDI32.dll': ('BitBlt', 'CreateCompatibleDC', 'SelectObject', 'DeleteObject'),
}
MALWARE_IMPORTS = {
    'KERNEL32.dll': (
        'LoadLibraryA', 'GetProcAddress', 'VirtualProtect', 'WriteProcessMemory', 'CreateRemoteThread',
        'OpenProcess', 'IsDebuggerPresent', 'WinExec', 'CreateToolhelp32Snapshot', 'Process32First',
    ),
    'WININET.dll': ('InternetOpenA', 'InternetOpenUrlA', 'InternetReadFile'),
    'ADVAPI32.dll': ('RegSetValueExA', 'RegOpenKeyExA', 'CryptEncrypt'),
}
# always imported by malware-like files
MALWARE_CORE_IMPORT = 'VirtualAlloc'

MALWARE_URLS = (b'http://update-check.example.net/gate.php', b'http://cdn.example.org/payload.bin')

# mnemonic -> (encoding, operands) for the listing text
INSTRUCTIONS = {
    'push': ('55', '%ebp'),
    'pop': ('5d', '%ebp'),
    'mov': ('89 e5', '%esp,%ebp'),
    'sub': ('83 ec 08', '$0x8,%esp'),
    'add': ('01 d8', '%ebx,%eax'),
    'lea': ('8d 45 f8', '-0x8(%ebp),%eax'),
    'cmp': ('39 c8', '%ecx,%eax'),
    'test': ('85 c0', '%eax,%eax'),
    'jne': ('75 02', '0x401020'),
    'je': ('74 02', '0x401030'),
    'call': ('e8 00 00 00 00', '0x401010'),
    'ret': ('c3', ''),
    'xor': ('31 c0', '%eax,%eax'),
    'jmp': ('eb fe', '0x401000'),
    'nop': ('90', ''),
    'inc': ('40', '%eax'),
    'dec': ('48', '%eax'),
    'rol': ('d1 c0', '%eax'),
    'loop': ('e2 fc', '0x401000'),
    'int3': ('cc', ''),
}
BENIGN_OPCODE_WEIGHTS = {
    'push': 18, 'mov': 25, 'call': 10, 'ret': 5, 'pop': 10, 'sub': 5, 'add': 6, 'lea': 8, 'cmp': 5, 'jne': 4, 'test': 4,
}
MALWARE_OPCODE_WEIGHTS = {
    'xor': 18, 'jmp': 10, 'loop': 6, 'int3': 4, 'push': 10, 'mov': 15, 'nop': 8, 'inc': 7, 'dec': 7, 'rol': 6,
    'call': 5, 'je': 4,
}
LISTING_LENGTH = (150, 400)
TEXT_BASE = 0x401000


@dataclass(frozen=True)
class DemoSample:
    class_name: str
    file_name: str
    data: bytes
    listing: str


def _pick(rng: np.random.Generator, pool, low: int, high: int) -> list[str]:
    """A random subset of `pool`, kept in pool order."""
    size = int(rng.integers(low, min(high, len(pool)) + 1))
    return [pool[i] for i in sorted(rng.choice(len(pool), size=size, replace=False))]


def _mnemonics(rng: np.random.Generator, weights: dict[str, int]) -> list[str]:
    names = list(weights)
    p = np.array([weights[n] for n in names], dtype=float)
    size = int(rng.integers(*LISTING_LENGTH))
    return [names[i] for i in rng.choice(len(names), size=size, p=p / p.sum())]


def render_listing(file_name: str, mnemonics) -> str:
    """objdump-style text of one `.text` section."""
    lines = [
        '',
        f"{file_name}:     file format pei-i386",
        '',
        '',
        'Disassembly of section .text:',
        '',
        f"{TEXT_BASE:08x} <.text>:",
    ]
    address = TEXT_BASE
    for mnemonic in mnemonics:
        encoding, operands = INSTRUCTIONS[mnemonic]
        lines.append(f"  {address:x}:\t{encoding:<21}\t{mnemonic:<6} {operands}".rstrip())
        address += len(encoding.split())
    return '\n'.join(lines) + '\n'


def _random_bytes(rng: np.random.Generator, low: int, high: int) -> bytes:
    """Uniform noise filling `low` to `high` whole file-alignment blocks."""
    return rng.integers(0, 256, size=FILE_ALIGNMENT * int(rng.integers(low, high)), dtype=np.uint8).tobytes()


def benign_sample(rng: np.random.Generator, index: int) -> DemoSample:
    is_dll = rng.random() < 0.2
    code = rng.choice(list(BENIGN_CODE_BYTES), size=int(rng.integers(512, 2048))).astype(np.uint8).tobytes()
    imports = {dll: _pick(rng, names, 2, 6) for dll, names in BENIGN_IMPORTS.items() if rng.random() < 0.8}
    imports.setdefault('KERNEL32.dll', _pick(rng, BENIGN_IMPORTS['KERNEL32.dll'], 2, 6))
    spec = FixtureSpec(
        sections=[
            SectionSpec(b'.text', code, CODE_SECTION),
            SectionSpec(b'.data', b'Settings\0Version 1.0\0' + bytes(int(rng.integers(16, 256))), DATA_SECTION),
            SectionSpec(b'.rdata', b'', RDATA_SECTION),
        ],
        imports=dict(sorted(imports.items())),
        import_section=2,
        is_dll=is_dll,
        timestamp=int(rng.integers(*PLAUSIBLE_STAMPS)),
        signed=rng.random() < 0.8,
    )
    file_name = f"benign_{index:03d}.{'dll' if is_dll else 'exe'}"
    return DemoSample('benign', file_name, build_pe32(spec), render_listing(file_name, _mnemonics(rng, BENIGN_OPCODE_WEIGHTS)))


def malware_sample(rng: np.random.Generator, index: int) -> DemoSample:
    packed = _random_bytes(rng, 2, 8)
    if rng.random() < 0.7:
        sections = [SectionSpec(b'UPX0', b'', CODE_SECTION), SectionSpec(b'UPX1', packed, CODE_SECTION)]
    else:
        sections = [SectionSpec(b'.text', packed, CODE_SECTION)]
    body = b'\0'.join(MALWARE_URLS[:int(rng.integers(1, len(MALWARE_URLS) + 1))])
    if rng.random() < 0.3:
        body += b'\0VMXh'
    sections.append(SectionSpec(b'.data', body + bytes(int(rng.integers(16, 128))), DATA_SECTION))

    imports = {dll: _pick(rng, names, 1, 4) for dll, names in MALWARE_IMPORTS.items() if rng.random() < 0.7}
    imports['KERNEL32.dll'] = [MALWARE_CORE_IMPORT, *imports.get('KERNEL32.dll', ['GetProcAddress'])]
    forged = rng.random() < 0.2
    spec = FixtureSpec(
        sections=sections,
        imports=dict(sorted(imports.items())),
        import_section=len(sections) - 1,
        timestamp=int(FORGED_STAMPS[int(rng.integers(len(FORGED_STAMPS)))] if forged else rng.integers(*PLAUSIBLE_STAMPS)),
        signed=rng.random() < 0.05,
    )
    file_name = f"malware_{index:03d}.exe"
    return DemoSample('malware', file_name, build_pe32(spec), render_listing(file_name, _mnemonics(rng, MALWARE_OPCODE_WEIGHTS)))


SAMPLE_MAKERS = dict(zip(DEMO_CLASSES, (benign_sample, malware_sample)))


def demo_config(seed: int) -> str:
    benign, malware = DEMO_CLASSES
    return (
        "# Synthetic demo corpus; regenerate with `manage.py demo_corpus`.\n"
        f"classes = {benign}, {malware}\n"
        f"corpus.{benign} = {DEMO_CORPUS_DIR}/{benign}\n"
        f"corpus.{malware} = {DEMO_CORPUS_DIR}/{malware}\n"
        f"task.bn_vs_ml = {benign}, {malware}\n"
        f"listings = {DEMO_LISTING_DIR}\n"
        "family = pe_header\n"
        "selection = none, infogain:0.1, cfs\n"
        "models = c45, knn\n"
        "folds = 5\n"
        f"seed = {seed}\n"
        "out = out\n"
    )


def generate_demo_corpus(dest, per_class: int = DEMO_PER_CLASS, seed: int = 0):
    """Write the corpus, its listings and a ready-to-run config below `dest`; returns the config path."""
    writer = ArtifactWriter(dest)
    rng = np.random.default_rng(seed)
    for class_name in DEMO_CLASSES:
        make = SAMPLE_MAKERS[class_name]
        for index in range(per_class):
            sample = make(rng, index)
            writer.write_bytes(DEMO_CORPUS_DIR, class_name, sample.file_name, data=sample.data)
            writer.write_text(
                DEMO_LISTING_DIR, class_name, sample.file_name + LISTING_SUFFIX, text=sample.listing
            )
    logger.info("demo corpus: %d files per class under %s", per_class, writer.root)
    return writer.write_text(DEMO_CONFIG_FILE, text=demo_config(seed))
