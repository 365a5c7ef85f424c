"""Pipeline steps: ingest, extract, select, train, eval, run and audit.

Each step is a service object: `validate()` checks its inputs and raises
`ValidationError`, `execute()` validates and then does the work. Every file
a step produces goes through its `ArtifactWriter`.
"""
import csv
import io
import logging
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from django.utils.text import slugify
from rest_framework.exceptions import APIException, ValidationError

from binaries.parser import extract_report
from binaries.services import (
    Manifest,
    ManifestEntry,
    compile_time_audit,
    dedup_and_filter,
    manifest_from_csv,
    manifest_to_csv,
    reports_to_dataset,
)
from binaries.signatures import load_signatures
from classifiers.base import ModelSpec
from classifiers.services import dump_model, train_model
from evaluation.constants import FREQUENCY_TOKEN_COLUMN
from evaluation.reports import ResultGrid, frequency_report, grid_report
from evaluation.services import EvalReport, cross_validate
from featuresets.constants import FLOAT_FORMAT
from featuresets.schema import Dataset
from featuresets.services import dataset_to_csv, load_csv
from ngrams.huffman import randomness_profile
from ngrams.sequences import disassemble, parse_disassembly
from ngrams.services import class_frequencies, presence_dataset, profile_dataset
from ngrams.vocabulary import NgramVocabulary, mine_vocabulary
from selection.services import SelectionMode, SelectionResult, apply_selection

from .config import PipelineConfig
from .constants import (
    AUDIT_DIR,
    BEST_MODEL_DIR,
    CLASS_FREQUENCY_FILE,
    CORPUS_SUMMARY_COLUMNS,
    CORPUS_SUMMARY_FILE,
    EXTRACTION_FAILURE_COLUMNS,
    EXTRACTION_FAILURES_FILE,
    FEATURE_DIR,
    FREQUENCY_FILE,
    GRID_CSV_FILE,
    GRID_MARKDOWN_FILE,
    LISTING_DIR,
    LISTING_SUFFIX,
    MANIFEST_DIR,
    MODEL_DIR,
    MODEL_SUFFIX,
    RANKING_FILE_SUFFIX,
    REPORT_DIR,
    SELECTION_DIR,
    SUBSET_FILE_SUFFIX,
    VOCABULARY_FILE,
    ExitCode,
    FeatureFamily,
)
from .writer import ArtifactWriter

logger = logging.getLogger(__name__)


def slug(text) -> str:
    """File-system name for a class, task or selection mode: `infogain:0.1` -> `infogain-0-1`."""
    return slugify(str(text).replace(':', '-').replace('.', '-')) or 'unnamed'


def error_text(exc: Exception) -> str:
    """Plain message of a DRF exception, whose `str()` is a repr of its detail."""
    return _flatten(getattr(exc, 'detail', None) or str(exc))


def _flatten(detail) -> str:
    if isinstance(detail, dict):
        return '; '.join(f"{key}: {_flatten(value)}" for key, value in detail.items())
    if isinstance(detail, (list, tuple)):
        return '; '.join(_flatten(item) for item in detail)
    return str(detail)


# ---------------------------------------------------------------------------
# Artifact locations
# ---------------------------------------------------------------------------

def manifest_parts(class_name: str) -> tuple[str, str]:
    return MANIFEST_DIR, f"{slug(class_name)}.csv"


def feature_parts(config: PipelineConfig, task: str | None = None) -> tuple[str, ...]:
    """All-class feature CSV, or the CSV of one task."""
    if task is None:
        return FEATURE_DIR, f"{config.family_tag}.csv"
    return FEATURE_DIR, config.family_tag, f"{slug(task)}.csv"


def vocabulary_parts(config: PipelineConfig) -> tuple[str, str, str]:
    return FEATURE_DIR, config.family_tag, VOCABULARY_FILE


def frequency_parts(config: PipelineConfig) -> tuple[str, str, str]:
    return FEATURE_DIR, config.family_tag, CLASS_FREQUENCY_FILE


def read_manifests(config: PipelineConfig, writer: ArtifactWriter) -> dict[str, Manifest]:
    manifests = {}
    for name in config.classes:
        if not writer.exists(*manifest_parts(name)):
            raise ValidationError(f"class {name}: no manifest, run ingest first.")
        manifests[name] = manifest_from_csv(writer.read_text(*manifest_parts(name)), config.corpora[name])
    return manifests


def load_task_dataset(config: PipelineConfig, writer: ArtifactWriter, task: str) -> Dataset:
    parts = feature_parts(config, task)
    if not writer.exists(*parts):
        raise ValidationError(f"task {task}: no {config.family_tag} features, run extract first.")
    return load_csv(writer.path(*parts), class_names=config.tasks[task])


def frequencies_to_csv(vocab: NgramVocabulary, freqs: dict[str, tuple[float, ...]]) -> str:
    buffer = io.StringIO()
    out = csv.writer(buffer, lineterminator='\n')
    out.writerow([FREQUENCY_TOKEN_COLUMN, *freqs])
    for i, token in enumerate(vocab.column_names()):
        out.writerow([token, *(format(freqs[name][i], FLOAT_FORMAT) for name in freqs)])
    return buffer.getvalue()


def frequencies_from_csv(text: str) -> dict[str, tuple[float, ...]]:
    rows = list(csv.reader(io.StringIO(text)))
    classes = rows[0][1:]
    return {name: tuple(float(row[k + 1]) for row in rows[1:]) for k, name in enumerate(classes)}


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------

class IngestService:
    """Deduplicates every class corpus and keeps its PE32 files."""

    def __init__(self, config: PipelineConfig, writer: ArtifactWriter):
        self.config = config
        self.writer = writer

    def validate(self):
        for name in self.config.classes:
            if not self.config.corpora[name].is_dir():
                raise ValidationError(f"class {name}: corpus directory {self.config.corpora[name]} not found.")

    def execute(self) -> dict[str, Manifest]:
        self.validate()
        manifests = {}
        for name in self.config.classes:
            manifest = dedup_and_filter(self.config.corpora[name], jobs=self.config.jobs)
            if not manifest.accepted:
                raise ValidationError(f"class {name}: 0 PE32 files")
            manifests[name] = manifest

        for name, manifest in manifests.items():
            self.writer.write_text(*manifest_parts(name), text=manifest_to_csv(manifest))
        self.writer.write_text(MANIFEST_DIR, CORPUS_SUMMARY_FILE, text=self.summary_csv(manifests))
        return manifests

    @staticmethod
    def summary_csv(manifests: dict[str, Manifest]) -> str:
        buffer = io.StringIO()
        out = csv.writer(buffer, lineterminator='\n')
        out.writerow(CORPUS_SUMMARY_COLUMNS)
        for name, manifest in manifests.items():
            out.writerow([name, len(manifest.accepted), manifest.total_size, len(manifest.exclusions)])
        return buffer.getvalue()


# ---------------------------------------------------------------------------
# extract
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtractionFailure:
    class_name: str
    path: str
    reason: str


@dataclass(frozen=True)
class Extraction:
    dataset: Dataset
    vocabulary: NgramVocabulary | None = None
    class_frequencies: dict[str, tuple[float, ...]] = field(default_factory=dict)
    failures: tuple[ExtractionFailure, ...] = ()


class ExtractService:
    """Turns every accepted file into one row of the configured feature family.

    A file that cannot be processed is logged and left out; the step fails
    only when a class loses more than `failure_ceiling` of its files.
    """

    def __init__(self, config: PipelineConfig, writer: ArtifactWriter, manifests: dict[str, Manifest] | None = None):
        self.config = config
        self.writer = writer
        self.manifests = manifests
        self.sigs = None

    def validate(self):
        if self.manifests is None:
            self.manifests = read_manifests(self.config, self.writer)
        if self.config.family == FeatureFamily.OPCODE_NGRAM and not (self.config.listings or self.config.disassembler):
            raise ValidationError("Opcode n-grams need a `listings` directory or a `disassembler` command.")
        if self.config.family in (FeatureFamily.PE_HEADER, FeatureFamily.API_NGRAM):
            self.sigs = load_signatures(self.config.signatures)

    def execute(self) -> Extraction:
        self.validate()
        work = [
            (name, entry)
            for name in self.config.classes
            for entry in self.manifests[name].accepted
        ]
        with ThreadPoolExecutor(max_workers=self.config.jobs) as pool:
            outcomes = list(pool.map(lambda item: self._extract(*item), work))

        failures = tuple(o for o in outcomes if isinstance(o, ExtractionFailure))
        self._check_failure_rate(work, failures)
        rows = [
            (name, f"{name}/{entry.path}", value)
            for (name, entry), value in zip(work, outcomes)
            if not isinstance(value, ExtractionFailure)
        ]
        extraction = self._build(rows, failures)
        self._persist(extraction)
        return extraction

    def _extract(self, class_name: str, entry: ManifestEntry):
        sample_id = f"{class_name}/{entry.path}"
        path = self.manifests[class_name].resolve(entry)
        try:
            return self._features_of(class_name, entry, sample_id, path)
        except (APIException, OSError, subprocess.SubprocessError) as exc:
            reason = error_text(exc)
            logger.warning("%s: extraction failed (%s)", sample_id, reason)
            return ExtractionFailure(class_name, entry.path, reason)

    def _features_of(self, class_name, entry, sample_id, path):
        family = self.config.family
        if family == FeatureFamily.OPCODE_NGRAM:
            mnemonics = parse_disassembly(self._listing(class_name, entry, path), sample_id)
            if not mnemonics:
                raise ValidationError("no instructions in the listing")
            return mnemonics
        data = path.read_bytes()
        if family == FeatureFamily.BYTE_RANDOMNESS:
            return randomness_profile(
                data, self.config.profile_window, self.config.profile_skip, self.config.profile_count
            )
        report = extract_report(data, self.sigs, sample_id)
        return report.api_calls if family == FeatureFamily.API_NGRAM else report

    def _listing(self, class_name: str, entry: ManifestEntry, path) -> str:
        """Cached listing, else a provided one, else the disassembler's output (then cached)."""
        cached = (LISTING_DIR, slug(class_name), entry.path + LISTING_SUFFIX)
        if self.writer.exists(*cached):
            return self.writer.read_text(*cached)
        if self.config.listings:
            provided = self.config.listings / class_name / (entry.path + LISTING_SUFFIX)
            if provided.is_file():
                return provided.read_text(encoding='utf-8', errors='replace')
        if not self.config.disassembler:
            raise ValidationError("no listing found and no disassembler configured")
        text = disassemble(self.config.disassembler, path)
        self.writer.write_text(*cached, text=text)
        return text

    def _check_failure_rate(self, work, failures):
        for name in self.config.classes:
            total = sum(1 for class_name, _ in work if class_name == name)
            failed = sum(1 for f in failures if f.class_name == name)
            if not total:
                raise ValidationError(f"class {name}: 0 PE32 files")
            if failed == total:
                raise ValidationError(f"class {name}: every file failed extraction.")
            if failed / total > self.config.failure_ceiling:
                raise ValidationError(
                    f"class {name}: {failed} of {total} files failed extraction, "
                    f"above the {self.config.failure_ceiling:.0%} ceiling."
                )
            if failed:
                logger.warning("class %s: %d of %d files excluded", name, failed, total)

    def _build(self, rows, failures) -> Extraction:
        classes = self.config.classes
        label_of = {name: k for k, name in enumerate(classes)}
        family = self.config.family
        if family == FeatureFamily.PE_HEADER:
            dataset = reports_to_dataset(
                [value for _, _, value in rows], [label_of[name] for name, _, _ in rows], classes
            )
            return Extraction(dataset=dataset, failures=failures)
        if family == FeatureFamily.BYTE_RANDOMNESS:
            dataset = profile_dataset(
                [(sample_id, label_of[name], value) for name, sample_id, value in rows],
                classes,
                self.config.profile_count,
            )
            return Extraction(dataset=dataset, failures=failures)

        sequences_by_class = {name: [value for c, _, value in rows if c == name] for name in classes}
        vocab = mine_vocabulary(
            sequences_by_class, self.config.ngram_n, self.config.ngram_per_class, self.config.ngram_source
        )
        dataset = presence_dataset(
            [(sample_id, label_of[name], value) for name, sample_id, value in rows],
            vocab,
            classes,
            self.config.ngram_top_k,
        )
        return Extraction(
            dataset=dataset,
            vocabulary=vocab,
            class_frequencies=class_frequencies(vocab, sequences_by_class),
            failures=failures,
        )

    def _persist(self, extraction: Extraction):
        self.writer.write_text(*feature_parts(self.config), text=dataset_to_csv(extraction.dataset))
        for task, members in self.config.tasks.items():
            self.writer.write_text(
                *feature_parts(self.config, task), text=dataset_to_csv(extraction.dataset.restrict_classes(members))
            )
        if extraction.vocabulary is not None:
            self.writer.write_text(*vocabulary_parts(self.config), text=extraction.vocabulary.to_text())
            self.writer.write_text(
                *frequency_parts(self.config),
                text=frequencies_to_csv(extraction.vocabulary, extraction.class_frequencies),
            )

        buffer = io.StringIO()
        out = csv.writer(buffer, lineterminator='\n')
        out.writerow(EXTRACTION_FAILURE_COLUMNS)
        out.writerows((f.class_name, f.path, f.reason) for f in extraction.failures)
        self.writer.write_text(FEATURE_DIR, self.config.family_tag, EXTRACTION_FAILURES_FILE, text=buffer.getvalue())


# ---------------------------------------------------------------------------
# select
# ---------------------------------------------------------------------------

class SelectService:
    """Applies every configured selection mode to every task's features.

    Selection runs once on the whole task dataset, before cross-validation.
    """

    def __init__(self, config: PipelineConfig, writer: ArtifactWriter):
        self.config = config
        self.writer = writer
        self.datasets: dict[str, Dataset] = {}
        self.failed: list[str] = []

    def validate(self):
        self.datasets = {task: load_task_dataset(self.config, self.writer, task) for task in self.config.tasks}
        for task, ds in self.datasets.items():
            ds.require_trainable()

    def execute(self) -> dict[tuple[SelectionMode, str], SelectionResult | None]:
        """Subsets by (mode, task); a selection that fails is logged and maps to None."""
        self.validate()
        selected = {}
        for mode in self.config.selections:
            for task, ds in self.datasets.items():
                try:
                    result = apply_selection(ds, mode, jobs=self.config.jobs)
                except Exception as exc:
                    logger.error("%s / %s: selection failed (%s)", task, mode, error_text(exc))
                    self.failed.append(f"{mode} / {task}")
                    selected[(mode, task)] = None
                    continue
                selected[(mode, task)] = result
                self._persist(mode, task, result)
                logger.info("%s / %s: %d of %d attributes kept", task, mode, result.dataset.n_attributes, ds.n_attributes)
        return selected

    def _persist(self, mode: SelectionMode, task: str, result: SelectionResult):
        base = (SELECTION_DIR, slug(task))
        names = f"# merit {result.subset.merit:{FLOAT_FORMAT}}\n" + ''.join(f"{n}\n" for n in result.subset.names)
        self.writer.write_text(*base, slug(mode) + SUBSET_FILE_SUFFIX, text=names)
        if result.ranking is not None:
            self.writer.write_text(*base, slug(mode) + RANKING_FILE_SUFFIX, text=result.ranking.to_csv())


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def model_parts(task: str, mode: SelectionMode, method: str) -> tuple[str, ...]:
    return MODEL_DIR, slug(task), slug(mode), f"{method}{MODEL_SUFFIX}"


class TrainService:
    """Trains every configured method on every (selection, task) dataset and saves the models."""

    def __init__(self, config: PipelineConfig, writer: ArtifactWriter, selected=None):
        self.config = config
        self.writer = writer
        self.selected = selected

    def validate(self):
        if self.selected is None:
            self.selected = SelectService(self.config, self.writer).execute()

    def execute(self) -> list[str]:
        """Saves the models; returns the cells that failed to train."""
        self.validate()
        failed = []
        for (mode, task), result in self.selected.items():
            if result is None:
                failed.extend(f"{mode} / {task} / {spec.label}" for spec in self.config.model_specs())
                continue
            for spec in self.config.model_specs():
                try:
                    model = train_model(result.dataset, spec)
                except Exception as exc:
                    logger.error("%s / %s / %s: training failed (%s)", mode, task, spec.label, error_text(exc))
                    failed.append(f"{mode} / {task} / {spec.label}")
                    continue
                self.writer.write_text(*model_parts(task, mode, spec.method), text=dump_model(model))
        return failed


# ---------------------------------------------------------------------------
# eval / run
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunResult:
    grid: ResultGrid
    reports: dict[tuple[str, str], dict[str, EvalReport | None]]
    failed_cells: tuple[str, ...] = ()

    @property
    def exit_code(self) -> int:
        return ExitCode.PARTIAL_FAILURE if self.failed_cells else ExitCode.SUCCESS


class EvalService:
    """Cross-validates every (selection, task, method) cell and writes the grid."""

    def __init__(self, config: PipelineConfig, writer: ArtifactWriter, selected=None):
        self.config = config
        self.writer = writer
        self.selected = selected

    def validate(self):
        if self.selected is None:
            self.selected = SelectService(self.config, self.writer).execute()

    def execute(self) -> RunResult:
        self.validate()
        cells = [
            (mode, task, spec, None if result is None else result.dataset)
            for (mode, task), result in self.selected.items()
            for spec in self.config.model_specs()
        ]
        with ThreadPoolExecutor(max_workers=self.config.jobs) as pool:
            outcomes = list(pool.map(lambda cell: self._evaluate(*cell), cells))

        reports: dict[tuple[str, str], dict[str, EvalReport | None]] = {}
        failed = []
        for (mode, task, spec, _), report in zip(cells, outcomes):
            reports.setdefault((self.config.section_label(mode), task), {})[spec.method] = report
            if report is None:
                failed.append(f"{mode} / {task} / {spec.label}")
            else:
                self.writer.write_text(
                    REPORT_DIR, slug(mode), slug(task), f"{spec.method}.csv", text=report.to_csv()
                )

        grid = grid_report(reports, methods=self.config.models)
        self.writer.write_text(REPORT_DIR, GRID_CSV_FILE, text=grid.to_csv())
        self.writer.write_text(REPORT_DIR, GRID_MARKDOWN_FILE, text=grid.to_markdown())
        if failed:
            logger.error("%d of %d cells failed: %s", len(failed), len(cells), ', '.join(failed))
        return RunResult(grid=grid, reports=reports, failed_cells=tuple(failed))

    def _evaluate(self, mode: SelectionMode, task: str, spec: ModelSpec, ds: Dataset | None) -> EvalReport | None:
        """Report of one cell; None when it has no subset or cross-validation fails."""
        if ds is None:
            return None
        try:
            return cross_validate(ds, spec, k=self.config.folds, seed=self.config.seed, task=task)
        except Exception as exc:
            logger.error("%s / %s / %s: %s", mode, task, spec.label, error_text(exc))
            return None


class RunService:
    """The whole pipeline: missing manifests and features are built first."""

    def __init__(self, config: PipelineConfig, writer: ArtifactWriter):
        self.config = config
        self.writer = writer

    def validate(self):
        if not all(self.writer.exists(*manifest_parts(name)) for name in self.config.classes):
            IngestService(self.config, self.writer).execute()
        if not all(self.writer.exists(*feature_parts(self.config, task)) for task in self.config.tasks):
            ExtractService(self.config, self.writer).execute()

    def execute(self) -> RunResult:
        self.validate()
        selected = SelectService(self.config, self.writer).execute()
        result = EvalService(self.config, self.writer, selected).execute()
        self._save_best_models(selected, result)
        if self.config.is_ngram_family:
            self._write_frequency_report()
        return result

    def _save_best_models(self, selected, result: RunResult):
        for mode in self.config.selections:
            section = self.config.section_label(mode)
            for task in self.config.tasks:
                row = next(r for r in result.grid.rows if r.section == section and r.task == task)
                if not row.best or selected[(mode, task)] is None:
                    continue
                spec = self.config.model_spec(self.config.models[row.best[0]])
                try:
                    model = train_model(selected[(mode, task)].dataset, spec)
                except Exception as exc:
                    logger.error("%s / %s: best model %s not saved (%s)", mode, task, spec.label, error_text(exc))
                    continue
                self.writer.write_text(
                    MODEL_DIR, BEST_MODEL_DIR, slug(mode), f"{slug(task)}{MODEL_SUFFIX}", text=dump_model(model)
                )

    def _write_frequency_report(self):
        vocab = NgramVocabulary.from_text(self.writer.read_text(*vocabulary_parts(self.config)))
        freqs = frequencies_from_csv(self.writer.read_text(*frequency_parts(self.config)))
        report = frequency_report(vocab, freqs, self.config.reference_class)
        self.writer.write_text(REPORT_DIR, FREQUENCY_FILE, text=report.to_csv())


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------

class AuditService:
    """Compile-time histograms per class and the samples whose stamp cannot be genuine."""

    def __init__(self, config: PipelineConfig, writer: ArtifactWriter):
        self.config = config
        self.writer = writer
        self.manifests = None
        self.sigs = None

    def validate(self):
        self.manifests = read_manifests(self.config, self.writer)
        self.sigs = load_signatures(self.config.signatures)

    def execute(self) -> dict:
        self.validate()
        audits = {}
        for name in self.config.classes:
            manifest = self.manifests[name]
            with ThreadPoolExecutor(max_workers=self.config.jobs) as pool:
                reports = list(pool.map(lambda entry: self._report(name, manifest, entry), manifest.accepted))
            audit = compile_time_audit([r for r in reports if r is not None], self.config.cutoff)
            self.writer.write_text(AUDIT_DIR, f"{slug(name)}_years.csv", text=audit.to_csv())
            self.writer.write_text(
                AUDIT_DIR, f"{slug(name)}_tampered.txt", text=''.join(f"{s}\n" for s in audit.tampered)
            )
            audits[name] = audit
        return audits

    def _report(self, name: str, manifest: Manifest, entry: ManifestEntry):
        sample_id = f"{name}/{entry.path}"
        try:
            return extract_report(manifest.resolve(entry).read_bytes(), self.sigs, sample_id)
        except (APIException, OSError) as exc:
            logger.warning("%s: skipped (%s)", sample_id, error_text(exc))
            return None
