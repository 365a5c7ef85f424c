"""Minimal PE32 writer.

Builds small, loader-plausible PE32 images from a declarative `FixtureSpec`:
DOS header and stub, COFF and optional headers, a section table, an import
table hosted inside one of the sections and an optional certificate overlay
referenced by the Security data directory. Used for test fixtures and the
synthetic demo corpus.
"""
import struct
from dataclasses import dataclass, field

from .constants import (
    CHARACTERISTIC_DLL,
    MACHINE_I386,
    OPTIONAL_MAGIC_PE32,
    PE_SIGNATURE,
    SECTION_CNT_CODE,
    SECTION_MEM_EXECUTE,
    SECURITY_DIRECTORY,
)

FILE_ALIGNMENT = 0x200
SECTION_ALIGNMENT = 0x1000
E_LFANEW = 0x80
IMPORT_DIRECTORY = 1

CODE_SECTION = SECTION_CNT_CODE | SECTION_MEM_EXECUTE | 0x40000000  # + MEM_READ
DATA_SECTION = 0x00000040 | 0x40000000 | 0x80000000  # INITIALIZED_DATA | READ | WRITE
RDATA_SECTION = 0x00000040 | 0x40000000

DOS_STUB = (
    bytes.fromhex('0e1fba0e00b409cd21b8014ccd21')
    + b'This program cannot be run in DOS mode.\r\r\n$'
)

_COFF = struct.Struct('<HHIIIHH')
_OPTIONAL = struct.Struct('<HBB' + 'I' * 9 + 'H' * 6 + 'I' * 4 + 'HH' + 'I' * 6)
_SECTION = struct.Struct('<8sIIIIIIHHI')
_DESCRIPTOR = struct.Struct('<IIIII')


def _align(value: int, alignment: int) -> int:
    return (value + alignment - 1) // alignment * alignment


@dataclass
class SectionSpec:
    name: bytes
    data: bytes = b''
    characteristics: int = CODE_SECTION


@dataclass
class FixtureSpec:
    sections: list[SectionSpec] = field(default_factory=lambda: [SectionSpec(b'.text', b'\xc3')])
    # dll name -> imported function names (str) or ordinals (int)
    imports: dict[str, list] = field(default_factory=dict)
    import_section: int = 0
    is_dll: bool = False
    timestamp: int = 0x4A5BC600
    signed: bool = False
    overlay: bytes = b''
    number_of_rva_and_sizes: int = 16
    machine: int = MACHINE_I386
    magic: int = OPTIONAL_MAGIC_PE32
    stub: bytes = DOS_STUB


def _import_blob(imports: dict[str, list], base: int) -> tuple[bytes, int]:
    """Import descriptors, thunk arrays, hint/name entries and DLL names laid out from `base`."""
    dlls = list(imports.items())
    cursor = (len(dlls) + 1) * _DESCRIPTOR.size
    ilt, iat = [], []
    for _, names in dlls:
        ilt.append(cursor)
        cursor += (len(names) + 1) * 4
    for _, names in dlls:
        iat.append(cursor)
        cursor += (len(names) + 1) * 4

    hint_names = bytearray()
    hint_offsets = []
    for _, names in dlls:
        offsets = []
        for name in names:
            if isinstance(name, int):
                offsets.append(None)
                continue
            offsets.append(cursor + len(hint_names))
            entry = struct.pack('<H', 0) + name.encode('ascii') + b'\0'
            hint_names += entry + (b'\0' if len(entry) % 2 else b'')
        hint_offsets.append(offsets)
    cursor += len(hint_names)

    dll_names = bytearray()
    name_offsets = []
    for dll, _ in dlls:
        name_offsets.append(cursor + len(dll_names))
        dll_names += dll.encode('ascii') + b'\0'

    blob = bytearray()
    for index in range(len(dlls)):
        blob += _DESCRIPTOR.pack(base + ilt[index], 0, 0, base + name_offsets[index], base + iat[index])
    blob += _DESCRIPTOR.pack(0, 0, 0, 0, 0)
    thunks = bytearray()
    for (_, names), offsets in zip(dlls, hint_offsets):
        for name, offset in zip(names, offsets):
            thunks += struct.pack('<I', 0x80000000 | name if offset is None else base + offset)
        thunks += struct.pack('<I', 0)
    blob += thunks + thunks  # ILT then an identical IAT
    blob += hint_names + dll_names
    return bytes(blob), (len(dlls) + 1) * _DESCRIPTOR.size


def build_pe32(spec: FixtureSpec) -> bytes:
    n_sections = len(spec.sections)
    optional_size = _OPTIONAL.size + 8 * spec.number_of_rva_and_sizes
    headers_end = E_LFANEW + len(PE_SIGNATURE) + _COFF.size + optional_size + _SECTION.size * n_sections
    size_of_headers = _align(headers_end, FILE_ALIGNMENT)

    # virtual addresses first: the import blob has to know its own RVA
    contents = [bytearray(section.data) for section in spec.sections]
    import_rva = import_size = 0
    if spec.imports:
        host = spec.import_section
        contents[host] += b'\0' * (_align(len(contents[host]), 4) - len(contents[host]))
        offset_in_host = len(contents[host])
        probe_blob, _ = _import_blob(spec.imports, 0)
        contents[host] += b'\0' * len(probe_blob)
        host_va = SECTION_ALIGNMENT + sum(
            _align(max(len(contents[i]), 1), SECTION_ALIGNMENT) for i in range(host)
        )
        import_rva = host_va + offset_in_host
        blob, import_size = _import_blob(spec.imports, import_rva)
        contents[host][offset_in_host:offset_in_host + len(blob)] = blob

    table = bytearray()
    raw = bytearray()
    va = SECTION_ALIGNMENT
    pointer = size_of_headers
    size_of_code = size_of_data = 0
    section_vas = []
    for section, content in zip(spec.sections, contents):
        raw_size = _align(len(content), FILE_ALIGNMENT)
        virtual_size = max(len(content), 1)
        table += _SECTION.pack(
            section.name[:8], virtual_size, va, raw_size, pointer if raw_size else 0, 0, 0, 0, 0,
            section.characteristics,
        )
        raw += bytes(content) + b'\0' * (raw_size - len(content))
        if section.characteristics & SECTION_CNT_CODE:
            size_of_code += raw_size
        else:
            size_of_data += raw_size
        section_vas.append(va)
        pointer += raw_size
        va += _align(virtual_size, SECTION_ALIGNMENT)
    size_of_image = va

    directories = [(0, 0)] * spec.number_of_rva_and_sizes
    if spec.imports and spec.number_of_rva_and_sizes > IMPORT_DIRECTORY:
        directories[IMPORT_DIRECTORY] = (import_rva, import_size)

    tail = bytearray(spec.overlay)
    if spec.signed:
        certificate = struct.pack('<IHH', 8 + 24, 0x0200, 0x0002) + b'\x30\x82' + b'\x5a' * 22
        if spec.number_of_rva_and_sizes > SECURITY_DIRECTORY:
            directories[SECURITY_DIRECTORY] = (size_of_headers + len(raw) + len(tail), len(certificate))
        tail += certificate

    characteristics = 0x0102 | (CHARACTERISTIC_DLL if spec.is_dll else 0)
    image_base = 0x10000000 if spec.is_dll else 0x00400000

    header = bytearray(size_of_headers)
    header[0:2] = b'MZ'
    struct.pack_into('<H', header, 2, 0x90)
    struct.pack_into('<I', header, 0x3C, E_LFANEW)
    stub = spec.stub[:E_LFANEW - 0x40]
    header[0x40:0x40 + len(stub)] = stub

    cursor = E_LFANEW
    header[cursor:cursor + 4] = PE_SIGNATURE
    cursor += 4
    _COFF.pack_into(header, cursor, spec.machine, n_sections, spec.timestamp, 0, 0, optional_size, characteristics)
    cursor += _COFF.size
    _OPTIONAL.pack_into(
        header, cursor,
        spec.magic, 6, 0,
        size_of_code, size_of_data, 0,
        section_vas[0] if section_vas else 0,  # AddressOfEntryPoint
        section_vas[0] if section_vas else 0,  # BaseOfCode
        section_vas[1] if len(section_vas) > 1 else 0,  # BaseOfData
        image_base, SECTION_ALIGNMENT, FILE_ALIGNMENT,
        4, 0, 0, 0, 4, 0,
        0, size_of_image, size_of_headers, 0,
        2, 0,  # GUI subsystem, no DllCharacteristics
        0x100000, 0x1000, 0x100000, 0x1000, 0, spec.number_of_rva_and_sizes,
    )
    cursor += _OPTIONAL.size
    for address, size in directories:
        struct.pack_into('<II', header, cursor, address, size)
        cursor += 8
    header[cursor:cursor + len(table)] = table

    return bytes(header) + bytes(raw) + bytes(tail)
