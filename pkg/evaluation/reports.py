"""Result grids (selection block x task rows, one column per method) and n-gram frequency tables."""
import csv
import io
from dataclasses import dataclass
from typing import Mapping, Sequence

from rest_framework.exceptions import ValidationError

from classifiers.constants import Method
from featuresets.constants import FLOAT_FORMAT
from ngrams.constants import FREQUENCY_REPORT_ROWS
from ngrams.vocabulary import NgramVocabulary

from .constants import ACCURACY_FORMAT, BEST_COLUMN, FREQUENCY_TOKEN_COLUMN, GRID_KEY_COLUMNS, MISSING_CELL
from .services import EvalReport


def render_accuracy(percent: float | None) -> str:
    """`97.631` -> `97.63`; a missing cell renders as a dash."""
    return MISSING_CELL if percent is None else format(percent, ACCURACY_FORMAT)


@dataclass(frozen=True)
class GridRow:
    section: str
    task: str
    cells: tuple[float | None, ...]

    @property
    def best(self) -> tuple[int, ...]:
        """Column indices holding the row's highest rendered accuracy."""
        rendered = [None if c is None else float(render_accuracy(c)) for c in self.cells]
        present = [c for c in rendered if c is not None]
        if not present:
            return ()
        top = max(present)
        return tuple(i for i, c in enumerate(rendered) if c == top)


@dataclass(frozen=True)
class ResultGrid:
    methods: tuple[str, ...]
    rows: tuple[GridRow, ...]

    @property
    def headers(self) -> list[str]:
        return [Method(m).label for m in self.methods]

    @property
    def n_cells(self) -> int:
        return sum(1 for row in self.rows for c in row.cells if c is not None)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow([*GRID_KEY_COLUMNS, *self.headers, BEST_COLUMN])
        for row in self.rows:
            best = '|'.join(self.headers[i] for i in row.best)
            writer.writerow([row.section, row.task, *(render_accuracy(c) for c in row.cells), best])
        return buffer.getvalue()

    def to_markdown(self) -> str:
        lines = []
        for section in dict.fromkeys(row.section for row in self.rows):
            lines.append(f"### {section}")
            lines.append('')
            lines.append('| Task | ' + ' | '.join(self.headers) + ' |')
            lines.append('|---|' + '---:|' * len(self.headers))
            for row in (r for r in self.rows if r.section == section):
                cells = [
                    f"**{render_accuracy(c)}**" if i in row.best else render_accuracy(c)
                    for i, c in enumerate(row.cells)
                ]
                lines.append(f"| {row.task} | " + ' | '.join(cells) + ' |')
            lines.append('')
        return '\n'.join(lines)


def grid_report(
    reports: Mapping[tuple[str, str], Mapping[str, EvalReport | None]],
    methods: Sequence[str] = tuple(Method.values),
) -> ResultGrid:
    """Lay out mean accuracies by (selection section, task) row and method column.

    Rows keep the mapping's order; columns follow `methods`, so the grid does
    not depend on the order in which cells were evaluated.
    """
    unknown = [m for m in methods if m not in Method.values]
    if unknown:
        raise ValidationError(f"Unknown methods in grid: {unknown}")
    rows = []
    for (section, task), by_method in reports.items():
        cells = tuple(
            None if by_method.get(method) is None else by_method[method].mean_accuracy
            for method in methods
        )
        rows.append(GridRow(section=section, task=task, cells=cells))
    return ResultGrid(methods=tuple(methods), rows=tuple(rows))


@dataclass(frozen=True)
class FrequencyReport:
    class_names: tuple[str, ...]
    tokens: tuple[str, ...]
    fractions: tuple[tuple[float, ...], ...]

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow([FREQUENCY_TOKEN_COLUMN, *self.class_names])
        for token, row in zip(self.tokens, self.fractions):
            writer.writerow([token, *(format(f, FLOAT_FORMAT) for f in row)])
        return buffer.getvalue()


def frequency_report(
    vocab: NgramVocabulary,
    per_class_freqs: Mapping[str, Sequence[float]],
    reference_class: str,
    rows: int = FREQUENCY_REPORT_ROWS,
) -> FrequencyReport:
    """The reference class's most frequent vocabulary n-grams with every class's file fraction.

    The reference class comes first; ties keep vocabulary order.
    """
    if reference_class not in per_class_freqs:
        raise ValidationError(f"Unknown reference class '{reference_class}'.")
    for name, freqs in per_class_freqs.items():
        if len(freqs) != len(vocab):
            raise ValidationError(f"class {name}: {len(freqs)} fractions for {len(vocab)} n-grams.")
    reference = per_class_freqs[reference_class]
    order = sorted(range(len(vocab)), key=lambda i: (-reference[i], i))[:rows]
    classes = (reference_class, *(name for name in per_class_freqs if name != reference_class))
    names = vocab.column_names()
    return FrequencyReport(
        class_names=classes,
        tokens=tuple(names[i] for i in order),
        fractions=tuple(tuple(float(per_class_freqs[c][i]) for c in classes) for i in order),
    )
