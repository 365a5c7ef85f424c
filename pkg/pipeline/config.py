"""Pipeline config files.

A config is a flat key/value file read with python-dotenv, for example::

    classes = benign, malware
    corpus.benign = corpus/benign
    corpus.malware = corpus/malware
    task.bn_vs_ml = benign, malware
    family = opcode_ngram
    ngram.n = 3
    selection = none, infogain:0.1, cfs
    models = c45, knn
    model.knn.k = 3
    folds = 5
    seed = 0
    out = out

Relative paths are taken from the directory holding the config file.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from dotenv import dotenv_values
from rest_framework.exceptions import ValidationError

from classifiers.base import ModelSpec
from ngrams.constants import NgramSource
from selection.services import SelectionMode

from .constants import NGRAM_FAMILIES, FeatureFamily
from .serializers import PipelineConfigSerializer

_SCALAR_KEYS = {
    'classes': 'classes',
    'family': 'family',
    'ngram.n': 'ngram_n',
    'ngram.per_class': 'ngram_per_class',
    'ngram.top_k': 'ngram_top_k',
    'profile.window': 'profile_window',
    'profile.skip': 'profile_skip',
    'profile.count': 'profile_count',
    'selection': 'selection',
    'models': 'models',
    'folds': 'folds',
    'seed': 'seed',
    'jobs': 'jobs',
    'out': 'out',
    'disassembler': 'disassembler',
    'listings': 'listings',
    'signatures': 'signatures',
    'failure_ceiling': 'failure_ceiling',
    'cutoff': 'cutoff',
    'reference_class': 'reference_class',
}
_MAPPED_PREFIXES = {'corpus.': 'corpora', 'task.': 'tasks'}
_MODEL_PREFIX = 'model.'


@dataclass(frozen=True)
class PipelineConfig:
    classes: tuple[str, ...]
    corpora: dict[str, Path]
    tasks: dict[str, tuple[str, ...]]
    family: str
    ngram_n: int
    ngram_per_class: int
    ngram_top_k: int
    profile_window: int
    profile_skip: int
    profile_count: int
    selections: tuple[SelectionMode, ...]
    models: tuple[str, ...]
    folds: int
    seed: int
    jobs: int
    out: Path
    signatures: Path
    failure_ceiling: float
    cutoff: str
    reference_class: str
    model_params: dict[str, dict] = field(default_factory=dict)
    disassembler: str = ''
    listings: Path | None = None

    @property
    def is_ngram_family(self) -> bool:
        return self.family in NGRAM_FAMILIES

    @property
    def ngram_source(self) -> str:
        return NgramSource.API if self.family == FeatureFamily.API_NGRAM else NgramSource.OPCODE

    @property
    def family_tag(self) -> str:
        """`pe_header`, `opcode_ngram_3`: names the feature files of this family."""
        return f"{self.family}_{self.ngram_n}" if self.is_ngram_family else str(self.family)

    def model_spec(self, method: str) -> ModelSpec:
        return ModelSpec(method=method, params=dict(self.model_params.get(method, {})), seed=self.seed)

    def model_specs(self) -> tuple[ModelSpec, ...]:
        return tuple(self.model_spec(method) for method in self.models)

    def section_label(self, mode: SelectionMode) -> str:
        """Grid block title; falls back to the mode text when two modes share a label."""
        labels = [m.label for m in self.selections]
        return mode.label if labels.count(mode.label) == 1 else str(mode)


def payload_from_mapping(raw: Mapping[str, str | None]) -> dict:
    """Turn dotted file keys into the nested payload `PipelineConfigSerializer` expects."""
    payload: dict = {'corpora': {}, 'tasks': {}, 'model_params': {}}
    for key, value in raw.items():
        key = key.strip()
        if value is None:
            raise ValidationError({key: "Key has no value."})
        if key in _SCALAR_KEYS:
            payload[_SCALAR_KEYS[key]] = value
            continue
        prefix = next((p for p in _MAPPED_PREFIXES if key.startswith(p)), None)
        if prefix:
            name = key[len(prefix):]
            if not name:
                raise ValidationError({key: "Missing name after the prefix."})
            payload[_MAPPED_PREFIXES[prefix]][name] = value
            continue
        if key.startswith(_MODEL_PREFIX):
            method, _, param = key[len(_MODEL_PREFIX):].partition('.')
            if not method or not param:
                raise ValidationError({key: "Expected model.<method>.<param>."})
            payload['model_params'].setdefault(method, {})[param] = value
            continue
        raise ValidationError({key: "Unknown config key."})
    return payload


def _resolve(base_dir: Path, value: str) -> Path:
    path = Path(value).expanduser()
    return path if path.is_absolute() else (base_dir / path)


def config_from_payload(payload: Mapping, base_dir=None) -> PipelineConfig:
    serializer = PipelineConfigSerializer(data=dict(payload))
    serializer.is_valid(raise_exception=True)
    data = serializer.validated_data
    base = Path(base_dir) if base_dir is not None else Path.cwd()

    return PipelineConfig(
        classes=tuple(data['classes']),
        corpora={name: _resolve(base, data['corpora'][name]) for name in data['classes']},
        tasks={name: tuple(members) for name, members in data['tasks'].items()},
        family=data['family'],
        ngram_n=data['ngram_n'],
        ngram_per_class=data['ngram_per_class'],
        ngram_top_k=data['ngram_top_k'],
        profile_window=data['profile_window'],
        profile_skip=data['profile_skip'],
        profile_count=data['profile_count'],
        selections=tuple(data['selection']),
        models=tuple(data['models']),
        model_params={method: dict(params) for method, params in data['model_params'].items()},
        folds=data['folds'],
        seed=data['seed'],
        jobs=data['jobs'],
        out=_resolve(base, data['out']),
        disassembler=data['disassembler'],
        listings=_resolve(base, data['listings']) if data['listings'] else None,
        signatures=_resolve(base, data['signatures']),
        failure_ceiling=data['failure_ceiling'],
        cutoff=data['cutoff'],
        reference_class=data['reference_class'],
    )


def load_config(path, overrides: Mapping | None = None) -> PipelineConfig:
    """Read, validate and resolve a config file; non-None `overrides` replace file keys."""
    source = Path(path)
    if not source.is_file():
        raise ValidationError(f"Config file not found: {source}")
    payload = payload_from_mapping(dotenv_values(source))
    payload.update({key: value for key, value in (overrides or {}).items() if value is not None})
    return config_from_payload(payload, base_dir=source.resolve().parent)
