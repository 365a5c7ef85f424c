import random
import tempfile
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from unittest.mock import patch

from django.test import SimpleTestCase
from rest_framework.exceptions import ValidationError

from .builder import DATA_SECTION, FixtureSpec, SectionSpec, build_pe32
from .constants import (
    HEADER_FEATURES,
    ManifestVerdict,
    OPTIONAL_MAGIC_PE32_PLUS,
    PeKind,
    STANDARD_SECTION_NAMES,
    XOR_PROBE_MARKER,
)
from .parser import PeReport, count_urls, extract_report, identify_pe32, probe_header, xor_probe
from .services import (
    compile_time_audit,
    dedup_and_filter,
    manifest_from_csv,
    manifest_to_csv,
    parse_cutoff,
    reports_to_dataset,
)
from .signatures import default_signatures, load_signatures

ANTI_DEBUG = ('IsDebuggerPresent', 'CheckRemoteDebuggerPresent', 'OutputDebugStringA', 'FindWindowA')
SUSPICIOUS = ('VirtualAlloc', 'WriteProcessMemory', 'CreateRemoteThread', 'WinExec')
NEUTRAL = ('ExitProcess', 'GetModuleHandleA', 'lstrlenA', 'Sleep', 'CloseHandle', 'HeapAlloc')
SECTION_NAMES = ('.data', '.rdata', '.rsrc', 'UPX0', '.evil', '.stub')
# patterns that never occur by accident in builder headers
VM_PATTERNS = (b'VMXh', b'\x0f\x3f\x07\x0b')


def high_bytes(rng, n):
    """Filler drawn from 0x80-0xFF: no ASCII, no signature bytes, entropy below 7.2."""
    return bytes(rng.randrange(0x80, 0x100) for _ in range(n))


def audit_report(sample_id, timestamp):
    return PeReport(
        sample_id=sample_id, directories=0, xor_detected=0, is_dll=0, file_size=0, detected=0,
        sections=0, digital_signature=0, packer=0, anti_debug=0, anti_vm=0, suspicious_api=0,
        suspicious_sections=0, urls=0, api_calls=(), compile_timestamp=timestamp,
    )


def epoch(year, month=1, day=1):
    return int(datetime(year, month, day, tzinfo=timezone.utc).timestamp())


class IdentifyPe32Tests(SimpleTestCase):
    """Tests for identify_pe32"""

    def test_exe(self):
        self.assertEqual(identify_pe32(build_pe32(FixtureSpec())), PeKind.PE32_EXE)

    def test_dll(self):
        """Test the Characteristics DLL bit marks a PE32 executable (DLL)"""
        self.assertEqual(identify_pe32(build_pe32(FixtureSpec(is_dll=True))), PeKind.PE32_DLL)

    def test_long_dos_stub_is_truncated(self):
        data = build_pe32(FixtureSpec(stub=b'\x90' * 200))
        self.assertEqual(len(data), len(build_pe32(FixtureSpec())))
        self.assertEqual(data[0x40:0x80], b'\x90' * 0x40)
        self.assertEqual(identify_pe32(data), PeKind.PE32_EXE)

    def test_empty_input(self):
        self.assertEqual(identify_pe32(b''), PeKind.NOT_PE32)

    def test_text_file(self):
        self.assertEqual(identify_pe32(b'MZ is also how this line starts' * 4), PeKind.NOT_PE32)

    def test_pe32_plus_is_rejected(self):
        data = build_pe32(FixtureSpec(magic=OPTIONAL_MAGIC_PE32_PLUS))
        self.assertEqual(identify_pe32(data), PeKind.NOT_PE32)
        self.assertEqual(probe_header(data).verdict, ManifestVerdict.PE32_PLUS)

    def test_foreign_machine_is_rejected(self):
        self.assertEqual(identify_pe32(build_pe32(FixtureSpec(machine=0x8664))), PeKind.NOT_PE32)

    def test_e_lfanew_past_end(self):
        data = bytearray(build_pe32(FixtureSpec()))
        data[0x3C:0x40] = (len(data) + 10).to_bytes(4, 'little')
        self.assertEqual(identify_pe32(bytes(data)), PeKind.NOT_PE32)


class ExtractReportTests(SimpleTestCase):
    """Tests for extract_report"""

    def setUp(self):
        self.sigs = default_signatures()

    def test_minimal_fixture(self):
        data = build_pe32(FixtureSpec(imports={'KERNEL32.dll': ['ExitProcess']}))
        report = extract_report(data, self.sigs)

        self.assertEqual(report.directories, 1)
        self.assertEqual(report.sections, 1)
        self.assertEqual(report.api_calls, ('ExitProcess',))
        self.assertEqual(report.anti_debug, 0)
        self.assertEqual(report.file_size, len(data))
        self.assertFalse(report.has_warnings)

    def test_anti_debug_import(self):
        data = build_pe32(FixtureSpec(imports={'KERNEL32.dll': ['IsDebuggerPresent', 'ExitProcess']}))
        report = extract_report(data, self.sigs)

        self.assertEqual(report.anti_debug, 1)
        self.assertGreaterEqual(report.detected, 1)

    def test_all_zero_body(self):
        data = build_pe32(FixtureSpec(sections=[SectionSpec(b'.text', bytes(4096))]))
        report = extract_report(data, self.sigs)

        self.assertEqual(report.urls, 0)
        self.assertEqual(report.xor_detected, 0)
        self.assertEqual(report.packer, 0)

    def test_import_order_and_ordinals(self):
        """Test DLL order, thunk order and ORD:<n> rendering"""
        data = build_pe32(FixtureSpec(imports={
            'WS2_32.dll': [115, 'connect'],
            'KERNEL32.dll': ['Sleep', 'ExitProcess'],
        }))
        report = extract_report(data, self.sigs)
        self.assertEqual(report.api_calls, ('ORD:115', 'connect', 'Sleep', 'ExitProcess'))

    def test_signature_directory(self):
        signed = extract_report(build_pe32(FixtureSpec(signed=True)), self.sigs)
        unsigned = extract_report(build_pe32(FixtureSpec()), self.sigs)

        self.assertEqual((signed.digital_signature, signed.directories), (1, 1))
        self.assertEqual((unsigned.digital_signature, unsigned.directories), (0, 0))

    def test_short_directory_table(self):
        """Test only NumberOfRvaAndSizes entries are read"""
        data = build_pe32(FixtureSpec(
            number_of_rva_and_sizes=2, signed=True, imports={'KERNEL32.dll': ['ExitProcess']},
        ))
        report = extract_report(data, self.sigs)

        self.assertEqual(report.directories, 1)
        self.assertEqual(report.digital_signature, 0)

    def test_packer_by_section_name(self):
        spec = FixtureSpec(sections=[SectionSpec(b'UPX0', b''), SectionSpec(b'UPX1', b'\x90' * 64)])
        report = extract_report(build_pe32(spec), self.sigs)

        self.assertEqual(report.packer, 1)
        self.assertEqual(report.suspicious_sections, 2)

    def test_packer_by_entropy(self):
        rng = random.Random(5)
        body = bytes(rng.randrange(256) for _ in range(16384))
        report = extract_report(build_pe32(FixtureSpec(sections=[SectionSpec(b'.text', body)])), self.sigs)

        self.assertEqual(report.packer, 1)
        self.assertGreaterEqual(report.section_table[0].entropy, 7.2)

    def test_non_printable_section_name(self):
        spec = FixtureSpec(sections=[SectionSpec(b'.text', b'\xc3'), SectionSpec(b'.d\x01ta', b'\x00', DATA_SECTION)])
        self.assertEqual(extract_report(build_pe32(spec), self.sigs).suspicious_sections, 1)

    def test_xor_encoded_stub(self):
        hidden = bytes(b ^ 0x5A for b in XOR_PROBE_MARKER + b' in DOS mode.')
        data = build_pe32(FixtureSpec(sections=[SectionSpec(b'.text', b'\x90' * 32 + hidden)]))
        report = extract_report(data, self.sigs)

        self.assertEqual(report.xor_detected, 1)
        self.assertGreaterEqual(report.detected, 1)

    def test_anti_vm_pattern(self):
        data = build_pe32(FixtureSpec(sections=[SectionSpec(b'.text', b'\x90\x90VMXh\x90')]))
        self.assertGreaterEqual(extract_report(data, self.sigs).anti_vm, 1)

    def test_not_pe32_raises(self):
        with self.assertRaises(ValidationError):
            extract_report(b'plain text', self.sigs)

    def test_pure(self):
        data = build_pe32(FixtureSpec(imports={'KERNEL32.dll': ['VirtualAlloc', 'ExitProcess']}))
        self.assertEqual(extract_report(data, self.sigs), extract_report(data, self.sigs))


class ByteHeuristicTests(SimpleTestCase):
    """Tests for xor_probe and count_urls"""

    def test_plaintext_marker_is_not_xor(self):
        self.assertFalse(xor_probe(b'\x00' * 10 + XOR_PROBE_MARKER))

    def test_every_key_is_found(self):
        for key in (1, 0x20, 0x7F, 0xFF):
            encoded = bytes(b ^ key for b in XOR_PROBE_MARKER)
            self.assertTrue(xor_probe(b'\xcc' * 7 + encoded + b'\xcc'), key)

    def test_short_input(self):
        self.assertFalse(xor_probe(b'This'))

    def test_distinct_urls(self):
        data = b'http://a.example/x\0http://a.example/x\0ftp://files.example\0https://b.example\0http://ab'
        self.assertEqual(count_urls(data), 3)


class HeaderRoundTripTests(SimpleTestCase):
    """Test every header feature against the value the fixture was built to carry"""

    def setUp(self):
        self.sigs = replace(default_signatures(), anti_vm_byte_patterns=VM_PATTERNS)

    def _fixture(self, rng):
        sections = [SectionSpec(b'.text', high_bytes(rng, rng.randint(16, 400)))]
        for _ in range(rng.randint(0, 3)):
            name = rng.choice(SECTION_NAMES).encode()
            sections.append(SectionSpec(name, high_bytes(rng, rng.randint(0, 300)), DATA_SECTION))

        urls = [f"http://host{rng.randrange(5)}.example/p".encode() for _ in range(rng.randint(0, 3))]
        vm_patterns = [p for p in VM_PATTERNS if rng.random() < 0.4]
        xor_key = rng.choice([None, rng.randrange(1, 256)])
        payload = b''.join(u + b'\0' for u in urls) + b''.join(p + b'\x80' for p in vm_patterns)
        if xor_key is not None:
            payload += bytes(b ^ xor_key for b in XOR_PROBE_MARKER) + b'\x80'
        host = rng.randrange(len(sections))
        sections[host] = replace(sections[host], data=sections[host].data + payload + high_bytes(rng, 8))

        names = rng.sample(ANTI_DEBUG + SUSPICIOUS + NEUTRAL, rng.randint(0, 6))
        imports = {}
        if names:
            split = rng.randint(1, len(names))
            imports['KERNEL32.dll'] = names[:split]
            if names[split:]:
                imports['USER32.dll'] = names[split:]

        spec = FixtureSpec(
            sections=sections,
            imports=imports,
            import_section=rng.randrange(len(sections)),
            is_dll=rng.random() < 0.3,
            timestamp=rng.randrange(0x30000000, 0x50000000),
            signed=rng.random() < 0.5,
        )
        section_names = [s.name.decode() for s in sections]
        intended = {
            'ShortInfo_Directories': int(bool(imports)) + int(spec.signed),
            'ShortInfo_Xor': int(xor_key is not None),
            'ShortInfo_DLL': int(spec.is_dll),
            'ShortInfo_Sections': len(sections),
            'DigitalSignature': int(spec.signed),
            'Packer': int('UPX0' in section_names),
            'AntiDebug': len(set(names) & set(ANTI_DEBUG)),
            'AntiVM': len(vm_patterns),
            'SuspiciousAPI': len(set(names) & set(SUSPICIOUS)),
            'SuspiciousSections': sum(1 for n in section_names if n not in STANDARD_SECTION_NAMES),
            'Url': len(set(urls)),
        }
        intended['ShortInfo_Detected'] = (
            int(intended['AntiDebug'] > 0) + int(intended['AntiVM'] > 0)
            + intended['ShortInfo_Xor'] + intended['Packer']
        )
        api_calls = tuple(call for calls in imports.values() for call in calls)
        return spec, intended, api_calls

    def test_generated_fixtures(self):
        rng = random.Random(1234)
        for trial in range(30):
            spec, intended, api_calls = self._fixture(rng)
            data = build_pe32(spec)
            intended['ShortInfo_FileSize'] = len(data)
            report = extract_report(data, self.sigs, sample_id=f"fixture{trial}")

            self.assertEqual(dict(zip(HEADER_FEATURES, report.header_features())), intended, trial)
            self.assertEqual(report.api_calls, api_calls)
            self.assertEqual(report.compile_timestamp, spec.timestamp)
            self.assertFalse(report.has_warnings)


class ParserFuzzTests(SimpleTestCase):
    """Test truncated and bit-flipped fixtures never crash the parser"""

    def test_mutated_fixtures(self):
        rng = random.Random(99)
        sigs = default_signatures()
        bases = [
            build_pe32(FixtureSpec(imports={'KERNEL32.dll': ['ExitProcess', 'IsDebuggerPresent']})),
            build_pe32(FixtureSpec(
                sections=[SectionSpec(b'.text', high_bytes(rng, 200)), SectionSpec(b'.rdata', b'', DATA_SECTION)],
                imports={'WS2_32.dll': [3, 'send'], 'USER32.dll': ['FindWindowA']},
                import_section=1,
                signed=True,
                is_dll=True,
            )),
        ]
        for _ in range(10_000):
            data = bytearray(rng.choice(bases))
            mutation = rng.random()
            if mutation < 0.3:
                del data[rng.randrange(len(data)):]
            elif mutation < 0.8:
                # bias flips toward the headers
                limit = 0x400 if rng.random() < 0.7 else len(data)
                for _ in range(rng.randint(1, 8)):
                    data[rng.randrange(min(limit, len(data)))] ^= 1 << rng.randrange(8)
            else:
                offset = rng.randrange(0x80, 0x200)
                data[offset:offset + 4] = rng.randrange(1 << 32).to_bytes(4, 'little')
            data = bytes(data)

            probe = probe_header(data)
            if identify_pe32(data) == PeKind.NOT_PE32:
                with self.assertRaises(ValidationError):
                    extract_report(data, sigs)
                continue
            report = extract_report(data, sigs)
            self.assertLessEqual(report.directories, min(16, probe.number_of_rva_and_sizes))
            self.assertTrue(all(v >= 0 for v in report.header_features()))


class SignatureFileTests(SimpleTestCase):
    """Tests for load_signatures"""

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def test_default_lists(self):
        sigs = default_signatures()
        self.assertIn('IsDebuggerPresent', sigs.anti_debug_apis)
        self.assertIn(b'VMXh', sigs.anti_vm_byte_patterns)
        self.assertEqual(sigs.entropy_threshold, 7.2)

    def test_case_insensitive_match(self):
        sigs = default_signatures()
        self.assertEqual(sigs.matching_apis(['isdebuggerpresent', 'Sleep'], sigs.anti_debug_apis), {'isdebuggerpresent'})

    def test_bad_hex_pattern(self):
        path = self.tmp / 'sigs.env'
        path.write_text(
            "ANTI_DEBUG_APIS = A\nANTI_VM_BYTE_PATTERNS = zz\nSUSPICIOUS_APIS = B\nPACKER_SECTION_NAMES = C\n"
        )
        with self.assertRaises(ValidationError):
            load_signatures(path)

    def test_empty_list_rejected(self):
        path = self.tmp / 'sigs.env'
        path.write_text("ANTI_DEBUG_APIS = A\nANTI_VM_BYTE_PATTERNS = 0F\nSUSPICIOUS_APIS = B\n")
        with self.assertRaises(ValidationError):
            load_signatures(path)


class DedupAndFilterTests(SimpleTestCase):
    """Tests for dedup_and_filter and manifest CSV"""

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.root = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def test_exe_dll_and_text(self):
        (self.root / 'a.exe').write_bytes(build_pe32(FixtureSpec()))
        (self.root / 'b.dll').write_bytes(build_pe32(FixtureSpec(is_dll=True)))
        (self.root / 'notes.txt').write_text('not a binary')
        manifest = dedup_and_filter(self.root)

        self.assertEqual(len(manifest.accepted), 2)
        self.assertEqual([e.verdict for e in manifest.exclusions], [ManifestVerdict.NOT_PE32])

    def test_identical_files(self):
        data = build_pe32(FixtureSpec())
        (self.root / 'one.exe').write_bytes(data)
        (self.root / 'two.exe').write_bytes(data)
        manifest = dedup_and_filter(self.root, jobs=2)

        self.assertEqual([e.path for e in manifest.accepted], ['one.exe'])
        self.assertEqual(manifest.exclusions[0].verdict, ManifestVerdict.DUPLICATE)

    def test_empty_directory(self):
        self.assertEqual(dedup_and_filter(self.root).entries, ())

    def test_idempotent_csv(self):
        (self.root / 'sub').mkdir()
        (self.root / 'sub' / 'x.exe').write_bytes(build_pe32(FixtureSpec(signed=True)))
        (self.root / 'y.bin').write_bytes(build_pe32(FixtureSpec(magic=OPTIONAL_MAGIC_PE32_PLUS)))
        first = manifest_to_csv(dedup_and_filter(self.root))
        second = manifest_to_csv(dedup_and_filter(self.root))

        self.assertEqual(first, second)
        self.assertEqual(manifest_to_csv(manifest_from_csv(first, self.root)), first)
        self.assertIn('pe32_plus', first)

    def test_unreadable_file(self):
        (self.root / 'locked.exe').write_bytes(b'MZ')
        with patch('binaries.services.Path.read_bytes', side_effect=OSError('denied')):
            manifest = dedup_and_filter(self.root)
        self.assertEqual(manifest.entries[0].verdict, ManifestVerdict.IO_ERROR)

    def test_missing_directory(self):
        with self.assertRaises(ValidationError):
            dedup_and_filter(self.root / 'absent')


class CompileTimeAuditTests(SimpleTestCase):
    """Tests for compile_time_audit"""

    def test_before_ms_dos(self):
        audit = compile_time_audit([audit_report('old', epoch(1975))], '2012-06-30')
        self.assertEqual(audit.tampered, ('old',))

    def test_cutoff_is_inclusive(self):
        cutoff = epoch(2010, 6, 1)
        audit = compile_time_audit([audit_report('edge', cutoff), audit_report('late', cutoff + 1)], cutoff)
        self.assertEqual(audit.tampered, ('late',))

    def test_year_histogram(self):
        reports = [audit_report(f"r{i}", epoch(1992, 3, i + 1)) for i in range(3)]
        reports.append(audit_report('r3', epoch(2001)))
        audit = compile_time_audit(reports, '2012-06-30')

        self.assertEqual(audit.histogram, {1992: 3, 2001: 1})
        self.assertEqual(audit.to_csv(), "year,count\n1992,3\n2001,1\n")
        self.assertEqual(len(audit.render().splitlines()), 2)

    def test_date_cutoff_covers_whole_day(self):
        self.assertEqual(parse_cutoff('2012-06-30'), epoch(2012, 7, 1) - 1)


class HeaderDatasetTests(SimpleTestCase):
    def test_thirteen_columns(self):
        report = extract_report(build_pe32(FixtureSpec()), default_signatures(), sample_id='abc')
        ds = reports_to_dataset([report], [1], ('benign', 'malware'))

        self.assertEqual(ds.attribute_names, list(HEADER_FEATURES))
        self.assertEqual(ds.samples[0].label, 1)
