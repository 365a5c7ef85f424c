"""Stratified k-fold cross-validation.

Every classifier fits its own discretizer or normalizer inside `train`, so a
fold's preprocessing only ever sees that fold's training rows.
"""
import csv
import io
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from rest_framework.exceptions import ValidationError

from classifiers.base import ModelSpec, TrainedModel
from classifiers.services import train_model
from featuresets.schema import Dataset
from featuresets.services import stratified_folds

from .constants import ACCURACY_FORMAT, DEFAULT_FOLDS, FOLD_COLUMNS

logger = logging.getLogger(__name__)


class CrossValidationError(ValidationError):
    """Training or classification failed inside one fold."""

    def __init__(self, fold: int, detail):
        self.fold = fold
        super().__init__(f"fold {fold + 1}: {detail}")


@dataclass(frozen=True)
class EvalReport:
    task: str
    spec: ModelSpec
    class_names: tuple[str, ...]
    fold_accuracies: tuple[float, ...]
    confusion: tuple[tuple[int, ...], ...]
    fold_seconds: tuple[float, ...] = field(default=(), compare=False)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def pooled_accuracy(self) -> float:
        matrix = np.asarray(self.confusion)
        return float(100.0 * np.trace(matrix) / matrix.sum())

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(FOLD_COLUMNS)
        seconds = self.fold_seconds or (0.0,) * len(self.fold_accuracies)
        for fold, (accuracy, took) in enumerate(zip(self.fold_accuracies, seconds), start=1):
            writer.writerow([fold, format(accuracy, ACCURACY_FORMAT), f"{took:.3f}"])
        writer.writerow(['mean', format(self.mean_accuracy, ACCURACY_FORMAT), ''])
        writer.writerow(['pooled', format(self.pooled_accuracy, ACCURACY_FORMAT), ''])
        writer.writerow([])
        writer.writerow(['true\\predicted', *self.class_names])
        for name, row in zip(self.class_names, self.confusion):
            writer.writerow([name, *row])
        return buffer.getvalue()

    def render(self) -> str:
        lines = [
            f"{self.task} / {self.spec.label}: mean {self.mean_accuracy:.2f}%, pooled {self.pooled_accuracy:.2f}%",
            "  folds: " + ', '.join(format(a, ACCURACY_FORMAT) for a in self.fold_accuracies),
        ]
        width = max(len(name) for name in self.class_names)
        for name, row in zip(self.class_names, self.confusion):
            lines.append(f"  {name:<{width}} " + ' '.join(f"{count:>6d}" for count in row))
        return '\n'.join(lines) + '\n'


def fold_splits(ds: Dataset, k: int, seed: int) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """(train indices, test indices) per fold."""
    folds = stratified_folds(ds, k, seed)
    splits = []
    for test in folds:
        held_out = set(test)
        splits.append((tuple(i for i in range(len(ds)) if i not in held_out), test))
    return splits


def train_fold(ds: Dataset, spec: ModelSpec, train: Sequence[int]) -> TrainedModel:
    return train_model(ds.subset(train), spec)


def _run_fold(ds: Dataset, spec: ModelSpec, fold: int, train, test) -> tuple[np.ndarray, float]:
    started = time.perf_counter()
    try:
        model = train_fold(ds, spec, train)
        confusion = np.zeros((ds.n_classes, ds.n_classes), dtype=np.int64)
        for index in test:
            sample = ds.samples[index]
            confusion[sample.label, model.classify(sample).label] += 1
    except ValidationError as exc:
        raise CrossValidationError(fold, exc.detail) from exc
    except Exception as exc:
        raise CrossValidationError(fold, f"{type(exc).__name__}: {exc}") from exc
    return confusion, time.perf_counter() - started


def cross_validate(
    ds: Dataset,
    spec: ModelSpec,
    k: int = DEFAULT_FOLDS,
    seed: int = 0,
    task: str = '',
    jobs: int = 1,
) -> EvalReport:
    ds.require_trainable()
    splits = fold_splits(ds, k, seed)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        futures = [
            pool.submit(_run_fold, ds, spec, fold, train, test)
            for fold, (train, test) in enumerate(splits)
        ]
        results = [future.result() for future in futures]

    accuracies = tuple(100.0 * np.trace(c) / c.sum() for c in (r[0] for r in results))
    total = sum(r[0] for r in results)
    report = EvalReport(
        task=task,
        spec=spec,
        class_names=ds.class_names,
        fold_accuracies=tuple(float(a) for a in accuracies),
        confusion=tuple(tuple(int(v) for v in row) for row in total),
        fold_seconds=tuple(r[1] for r in results),
    )
    logger.info("%s %s: %d-fold mean accuracy %.2f%%", task or 'dataset', spec.method, k, report.mean_accuracy)
    return report
