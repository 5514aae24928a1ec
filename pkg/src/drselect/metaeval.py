"""Scoring predicted model rankings against ground-truth effectiveness.

Three measures per (method, dataset):

* Kendall tau over the two total orders (ties are already broken by
  registry order before rankings reach this module): tau = (C - D) / (n
  choose 2) with C/D the concordant/discordant pair counts.
* delta_e = e(true best) - e(predicted best), a nonnegative regret.
* pct_delta_e = 100 * delta_e / e(true best).

The report renderers are pure functions of their inputs, so reruns write
byte-identical files.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from drselect.corpusio import EffectivenessTable, ModelRegistry
from drselect.errors import DataValidationError, NumericError
from drselect.ireval import truth_ranking
from drselect.selectors import MethodScoreTable, ModelRanking, assemble_ranking


def kendall_tau(predicted: ModelRanking, truth: ModelRanking) -> float:
    """Strict-pair tau between two total orders over the same models."""
    models = predicted.model_ids()
    if set(models) != set(truth.model_ids()):
        raise DataValidationError("rankings cover different model sets")
    n = len(models)
    if n < 2:
        raise DataValidationError("tau needs at least two models")
    pos_p = {m: i for i, m in enumerate(models)}
    pos_t = {m: i for i, m in enumerate(truth.model_ids())}
    concordant = 0
    discordant = 0
    items = list(models)
    for i in range(n):
        for j in range(i + 1, n):
            a, b = items[i], items[j]
            agree = (pos_p[a] - pos_p[b]) * (pos_t[a] - pos_t[b])
            if agree > 0:
                concordant += 1
            else:
                discordant += 1
    return (concordant - discordant) / (n * (n - 1) / 2)


def delta_e(
    predicted_best: str,
    effectiveness: EffectivenessTable,
    dataset: str,
    registry: ModelRegistry,
) -> float:
    """Effectiveness given up by deploying the predicted best model."""
    truth = truth_ranking(effectiveness, dataset, registry)
    best_value = truth.entries[0][1]
    predicted_value = effectiveness.value(predicted_best, dataset)
    return best_value - predicted_value


def percent_delta_e(
    predicted_best: str,
    effectiveness: EffectivenessTable,
    dataset: str,
    registry: ModelRegistry,
) -> float:
    truth = truth_ranking(effectiveness, dataset, registry)
    best_value = truth.entries[0][1]
    if best_value == 0.0:
        raise NumericError(f"true best effectiveness on {dataset} is zero")
    return 100.0 * (best_value - effectiveness.value(predicted_best, dataset)) / best_value


@dataclass(frozen=True)
class EvaluationRow:
    """Meta-evaluation of one method on one dataset."""

    method: str
    dataset: str
    tau: float
    delta_e: float
    pct_delta_e: float
    predicted_best: str
    true_best: str


@dataclass(frozen=True)
class MethodEvaluation:
    """All per-dataset rows for one method plus the three averages."""

    method: str
    rows: tuple[EvaluationRow, ...]
    avg_tau: float
    avg_delta_e: float
    avg_pct_delta_e: float


def evaluate_method(
    label: str,
    tables: Mapping[str, MethodScoreTable],
    effectiveness: EffectivenessTable,
    registry: ModelRegistry,
    datasets: Sequence[str],
) -> MethodEvaluation:
    """Meta-evaluate one method's score tables across the given datasets."""
    rows = []
    for dataset in datasets:
        if dataset not in tables:
            raise DataValidationError(
                f"method {label!r} has no score table for dataset {dataset!r}"
            )
        predicted = assemble_ranking(tables[dataset], registry)
        truth = truth_ranking(effectiveness, dataset, registry)
        best = predicted.best()
        rows.append(
            EvaluationRow(
                method=label,
                dataset=dataset,
                tau=kendall_tau(predicted, truth),
                delta_e=delta_e(best, effectiveness, dataset, registry),
                pct_delta_e=percent_delta_e(best, effectiveness, dataset, registry),
                predicted_best=best,
                true_best=truth.best(),
            )
        )
    n = len(rows)
    if n == 0:
        raise DataValidationError("no datasets to evaluate")
    return MethodEvaluation(
        method=label,
        rows=tuple(rows),
        avg_tau=sum(r.tau for r in rows) / n,
        avg_delta_e=sum(r.delta_e for r in rows) / n,
        avg_pct_delta_e=sum(r.pct_delta_e for r in rows) / n,
    )


AVERAGE_LABEL = "Avrg"

_REPORT_HEADER = [
    "method",
    "dataset",
    "tau",
    "delta_e",
    "pct_delta_e",
    "predicted_best",
    "true_best",
]


def render_report_csv(
    evaluations: Sequence[MethodEvaluation], header_comment: str = ""
) -> str:
    """Flat CSV: one row per (method, dataset) plus an average row per method."""
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_REPORT_HEADER)
    for ev in evaluations:
        for row in ev.rows:
            writer.writerow(
                [
                    row.method,
                    row.dataset,
                    repr(row.tau),
                    repr(row.delta_e),
                    repr(row.pct_delta_e),
                    row.predicted_best,
                    row.true_best,
                ]
            )
        writer.writerow(
            [ev.method, AVERAGE_LABEL, repr(ev.avg_tau), repr(ev.avg_delta_e),
             repr(ev.avg_pct_delta_e), "", ""]
        )
    return buf.getvalue()


def _markdown_table(
    evaluations: Sequence[MethodEvaluation],
    datasets: Sequence[str],
    row_value,
    avg_value,
    fmt: str,
) -> list[str]:
    header = ["method"] + list(datasets) + [AVERAGE_LABEL]
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for ev in evaluations:
        by_dataset = {r.dataset: r for r in ev.rows}
        cells = [ev.method]
        cells += [format(row_value(by_dataset[d]), fmt) for d in datasets]
        cells.append(format(avg_value(ev), fmt))
        lines.append("| " + " | ".join(cells) + " |")
    return lines


def render_report_markdown(
    evaluations: Sequence[MethodEvaluation],
    datasets: Sequence[str],
    header_comment: str = "",
) -> str:
    """Three tables (tau, delta_e, pct_delta_e): methods x datasets."""
    sections = [
        ("Kendall tau vs ground truth", lambda r: r.tau, lambda e: e.avg_tau, ".3f"),
        ("Effectiveness regret (delta_e)", lambda r: r.delta_e, lambda e: e.avg_delta_e, ".3f"),
        ("Relative regret percent (pct_delta_e)", lambda r: r.pct_delta_e,
         lambda e: e.avg_pct_delta_e, ".2f"),
    ]
    parts = []
    if header_comment:
        parts.append(f"<!-- {header_comment} -->")
    for title, row_value, avg_value, fmt in sections:
        parts.append(f"## {title}")
        parts.append("")
        parts.extend(_markdown_table(evaluations, datasets, row_value, avg_value, fmt))
        parts.append("")
    return "\n".join(parts) + "\n"


def write_report(
    evaluations: Sequence[MethodEvaluation],
    datasets: Sequence[str],
    csv_path: str | Path,
    md_path: str | Path,
    header_comment: str = "",
) -> None:
    Path(csv_path).write_bytes(
        render_report_csv(evaluations, header_comment).encode("utf-8")
    )
    Path(md_path).write_bytes(
        render_report_markdown(evaluations, datasets, header_comment).encode("utf-8")
    )


def read_report_csv(path: str | Path) -> list[EvaluationRow]:
    """Parse a report CSV back into rows (average rows included)."""
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows or rows[0] != _REPORT_HEADER:
        raise DataValidationError(f"{path}: expected header {','.join(_REPORT_HEADER)}")
    out = []
    for r in rows[1:]:
        if len(r) != len(_REPORT_HEADER):
            raise DataValidationError(f"{path}: expected {len(_REPORT_HEADER)} columns")
        out.append(
            EvaluationRow(
                method=r[0],
                dataset=r[1],
                tau=float(r[2]),
                delta_e=float(r[3]),
                pct_delta_e=float(r[4]),
                predicted_best=r[5],
                true_best=r[6],
            )
        )
    return out
