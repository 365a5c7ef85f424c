import csv
import hashlib
import io
import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, time, timezone
from pathlib import Path
from typing import Iterable, Sequence

from rest_framework.exceptions import ParseError, ValidationError

from featuresets.constants import AttributeKind
from featuresets.schema import AttributeSpec, Dataset, FeatureVector

from .constants import (
    ACCEPTED_VERDICTS,
    EARLIEST_PLAUSIBLE_YEAR,
    HASH_ALGORITHM,
    HEADER_FEATURES,
    ManifestVerdict,
)
from .parser import PeReport, probe_header

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ('hash', 'algorithm', 'path', 'verdict', 'size')
BINARY_HEADER_FEATURES = frozenset({'ShortInfo_Xor', 'ShortInfo_DLL', 'DigitalSignature', 'Packer'})
EARLIEST_PLAUSIBLE = int(datetime(EARLIEST_PLAUSIBLE_YEAR, 1, 1, tzinfo=timezone.utc).timestamp())


# ---------------------------------------------------------------------------
# Corpus manifest
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    digest: str
    algorithm: str
    path: str
    verdict: str
    size: int

    @property
    def accepted(self) -> bool:
        return self.verdict in ACCEPTED_VERDICTS


@dataclass(frozen=True)
class Manifest:
    root: str
    entries: tuple[ManifestEntry, ...] = ()

    @property
    def accepted(self) -> tuple[ManifestEntry, ...]:
        return tuple(e for e in self.entries if e.accepted)

    @property
    def exclusions(self) -> tuple[ManifestEntry, ...]:
        return tuple(e for e in self.entries if not e.accepted)

    @property
    def total_size(self) -> int:
        return sum(e.size for e in self.accepted)

    def verdict_counts(self) -> dict[str, int]:
        counts = Counter(e.verdict for e in self.entries)
        return {verdict: counts[verdict] for verdict in ManifestVerdict.values if counts[verdict]}

    def resolve(self, entry: ManifestEntry) -> Path:
        return Path(self.root) / entry.path


def _scan_file(root: Path, path: Path) -> ManifestEntry:
    relative = path.relative_to(root).as_posix()
    try:
        data = path.read_bytes()
    except OSError as exc:
        logger.warning("%s: unreadable (%s)", path, exc)
        return ManifestEntry('', HASH_ALGORITHM, relative, ManifestVerdict.IO_ERROR, 0)
    digest = hashlib.new(HASH_ALGORITHM, data).hexdigest()
    return ManifestEntry(digest, HASH_ALGORITHM, relative, probe_header(data).verdict, len(data))


def dedup_and_filter(directory, jobs: int = 1) -> Manifest:
    """Hash and identify every file below `directory`.

    Files are visited in sorted path order, so for byte-identical copies the
    first path keeps its verdict and the others are recorded as duplicates.
    Only `pe32_exe` and `pe32_dll` entries are accepted; every other file
    stays in the manifest with its exclusion reason.
    """
    root = Path(directory)
    if not root.is_dir():
        raise ValidationError(f"Corpus directory not found: {root}")
    paths = sorted(p for p in root.rglob('*') if p.is_file())

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        scanned = list(pool.map(lambda p: _scan_file(root, p), paths))

    seen = set()
    entries = []
    for entry in scanned:
        if entry.verdict != ManifestVerdict.IO_ERROR:
            if entry.digest in seen:
                entry = ManifestEntry(entry.digest, entry.algorithm, entry.path, ManifestVerdict.DUPLICATE, entry.size)
            seen.add(entry.digest)
        entries.append(entry)

    manifest = Manifest(root=str(root), entries=tuple(entries))
    logger.info("%s: %d files, %d accepted", root, len(entries), len(manifest.accepted))
    return manifest


def manifest_to_csv(manifest: Manifest) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(MANIFEST_COLUMNS)
    for e in manifest.entries:
        writer.writerow([e.digest, e.algorithm, e.path, e.verdict, e.size])
    return buffer.getvalue()


def manifest_from_csv(text: str, root) -> Manifest:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != MANIFEST_COLUMNS:
        raise ParseError(f"Manifest header must be {','.join(MANIFEST_COLUMNS)}.")
    entries = []
    for row_number, row in enumerate(rows[1:], start=2):
        if len(row) != len(MANIFEST_COLUMNS):
            raise ParseError(f"row {row_number}: {len(row)} cells, expected {len(MANIFEST_COLUMNS)}")
        digest, algorithm, path, verdict, size = row
        if verdict not in ManifestVerdict.values:
            raise ParseError(f"row {row_number}: unknown verdict '{verdict}'")
        entries.append(ManifestEntry(digest, algorithm, path, verdict, int(size)))
    return Manifest(root=str(root), entries=tuple(entries))


# ---------------------------------------------------------------------------
# Header feature datasets
# ---------------------------------------------------------------------------

def header_schema() -> tuple[AttributeSpec, ...]:
    return tuple(
        AttributeSpec(name, AttributeKind.BINARY if name in BINARY_HEADER_FEATURES else AttributeKind.NUMERIC)
        for name in HEADER_FEATURES
    )


def reports_to_dataset(reports: Sequence[PeReport], labels: Sequence[int | None], class_names) -> Dataset:
    schema = header_schema()
    samples = []
    for report, label in zip(reports, labels):
        values = tuple(
            int(v) if attr.kind == AttributeKind.BINARY else float(v)
            for attr, v in zip(schema, report.header_features())
        )
        samples.append(FeatureVector(sample_id=report.sample_id, label=label, values=values))
    return Dataset(schema=schema, class_names=tuple(class_names), samples=tuple(samples))


# ---------------------------------------------------------------------------
# Compile-time audit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompileTimeAudit:
    histogram: dict[int, int]
    tampered: tuple[str, ...]
    cutoff: int

    def render(self, width: int = 40) -> str:
        """Log-scale text histogram, one line per year."""
        if not self.histogram:
            return '(no samples)'
        peak = math.log10(max(self.histogram.values()) + 1)
        lines = []
        for year, count in self.histogram.items():
            bar = '#' * max(1, round(width * math.log10(count + 1) / peak))
            lines.append(f"{year} {count:>6} {bar}")
        return '\n'.join(lines)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(['year', 'count'])
        writer.writerows(self.histogram.items())
        return buffer.getvalue()


def parse_cutoff(value) -> int:
    """Seconds since the epoch; an ISO date means the last second of that day (UTC)."""
    if isinstance(value, int):
        return value
    text = str(value).strip()
    if text.isdigit():
        return int(text)
    try:
        day = datetime.fromisoformat(text)
    except ValueError as exc:
        raise ValidationError(f"Invalid cutoff '{text}': expected ISO date or epoch seconds.") from exc
    if len(text) <= 10:
        day = datetime.combine(day.date(), time(23, 59, 59))
    if day.tzinfo is None:
        day = day.replace(tzinfo=timezone.utc)
    return int(day.timestamp())


def is_tampered(timestamp: int, cutoff: int) -> bool:
    return timestamp < EARLIEST_PLAUSIBLE or timestamp > cutoff


def compile_time_audit(reports: Iterable[PeReport], dataset_cutoff) -> CompileTimeAudit:
    cutoff = parse_cutoff(dataset_cutoff)
    years = Counter()
    tampered = []
    for report in reports:
        years[datetime.fromtimestamp(report.compile_timestamp, tz=timezone.utc).year] += 1
        if is_tampered(report.compile_timestamp, cutoff):
            tampered.append(report.sample_id)
    return CompileTimeAudit(histogram=dict(sorted(years.items())), tampered=tuple(tampered), cutoff=cutoff)
