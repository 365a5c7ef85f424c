from django.db import models


class PeKind(models.TextChoices):
    """Result of PE32 identification."""
    PE32_EXE = 'pe32_exe', 'PE32 executable'
    PE32_DLL = 'pe32_dll', 'PE32 executable (DLL)'
    NOT_PE32 = 'not_pe32', 'Not PE32'


class ManifestVerdict(models.TextChoices):
    """Verdict recorded per file in a corpus manifest."""
    PE32_EXE = 'pe32_exe', 'PE32 executable'
    PE32_DLL = 'pe32_dll', 'PE32 DLL'
    NOT_PE32 = 'not_pe32', 'Not a PE32 file'
    PE32_PLUS = 'pe32_plus', 'PE32+ (64-bit) file'
    DUPLICATE = 'duplicate', 'Duplicate content'
    IO_ERROR = 'io_error', 'Unreadable file'


ACCEPTED_VERDICTS = (ManifestVerdict.PE32_EXE, ManifestVerdict.PE32_DLL)

# Header layout
DOS_MAGIC = b'MZ'
PE_SIGNATURE = b'PE\0\0'
E_LFANEW_OFFSET = 0x3C
MIN_DOS_HEADER = 0x40
COFF_HEADER_SIZE = 20
MACHINE_I386 = 0x014C
OPTIONAL_MAGIC_PE32 = 0x010B
OPTIONAL_MAGIC_PE32_PLUS = 0x020B
CHARACTERISTIC_DLL = 0x2000
SECTION_MEM_EXECUTE = 0x20000000
SECTION_CNT_CODE = 0x00000020
MAX_DATA_DIRECTORIES = 16
SECURITY_DIRECTORY = 4

STANDARD_SECTION_NAMES = frozenset({
    '.text', '.data', '.rdata', '.rsrc', '.reloc', '.idata', '.edata', '.bss', '.tls', 'CODE', 'DATA',
})

# Stub marker looked for by the single-byte XOR probe
XOR_PROBE_MARKER = b'This program cannot be run'

URL_PATTERN = rb'(?:https|http|ftp)://[\x21-\x7e]{4,}'

HASH_ALGORITHM = 'sha256'

# MS-DOS 1.0 shipped in 1981; earlier compile stamps are forged
EARLIEST_PLAUSIBLE_YEAR = 1981

# PE-analysis feature names, in report column order
HEADER_FEATURES = (
    'ShortInfo_Directories',
    'ShortInfo_Xor',
    'ShortInfo_DLL',
    'ShortInfo_FileSize',
    'ShortInfo_Detected',
    'ShortInfo_Sections',
    'DigitalSignature',
    'Packer',
    'AntiDebug',
    'AntiVM',
    'SuspiciousAPI',
    'SuspiciousSections',
    'Url',
)
