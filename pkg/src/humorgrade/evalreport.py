"""Metrics, the cross-dataset evaluation matrix and its rendering."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus import HeadlineRecord, PairRecord
from .errors import EmptyInput, LengthMismatch, MissingGrades, MissingSplit
from .grader import GraderModel, predict_grades
from .pairwise import predict_pairs

# Column order of the published results table.
METRICS = (
    "rmse_task1_test",
    "acc_task2_test",
    "acc_task2_all",
    "rmse_task1_funlines",
    "acc_task2_funlines_all",
)
METRIC_HEADERS = {
    "rmse_task1_test": "Humicroedit Task-1 test RMSE",
    "acc_task2_test": "Humicroedit Task-2 test ACC",
    "acc_task2_all": "Humicroedit Task-2 all ACC",
    "rmse_task1_funlines": "FunLines Task-1 test RMSE",
    "acc_task2_funlines_all": "FunLines Task-2 all ACC",
}


def _check_lengths(pred: Sequence, truth: Sequence) -> None:
    if len(pred) != len(truth):
        raise LengthMismatch(f"{len(pred)} predictions vs {len(truth)} references")
    if len(pred) == 0:
        raise EmptyInput("metric over zero items")


def rmse(pred: Sequence[float], truth: Sequence[float]) -> float:
    _check_lengths(pred, truth)
    diff = np.asarray(pred, dtype=np.float64) - np.asarray(truth, dtype=np.float64)
    return float(np.sqrt(np.mean(diff * diff)))


def categorical_accuracy(pred_labels: Sequence[int], gold_labels: Sequence[int]) -> float:
    _check_lengths(pred_labels, gold_labels)
    return float(np.mean(np.asarray(pred_labels) == np.asarray(gold_labels)))


@dataclass(frozen=True)
class EvalCell:
    model_family: str
    train_dataset: str
    lm_finetuned: bool
    metric_name: str
    value: float

    def __post_init__(self):
        if self.metric_name not in METRICS:
            raise ValueError(f"unknown metric {self.metric_name!r}")
        if not self.value >= 0:
            raise ValueError(f"metric value must be non-negative, got {self.value}")
        if self.metric_name.startswith("acc") and self.value > 1:
            raise ValueError(f"accuracy above 1: {self.value}")

    @property
    def row_key(self) -> tuple[str, str, bool]:
        return self.model_family, self.train_dataset, self.lm_finetuned


@dataclass
class EvalReport:
    cells: list[EvalCell] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        keys = [(*c.row_key, c.metric_name) for c in self.cells]
        if len(keys) != len(set(keys)):
            raise ValueError("duplicate (family, train_dataset, lm_finetuned, metric) cell")

    def add(self, cell: EvalCell) -> None:
        key = (*cell.row_key, cell.metric_name)
        if any((*c.row_key, c.metric_name) == key for c in self.cells):
            raise ValueError(f"duplicate cell {key}")
        self.cells.append(cell)

    def rows(self) -> dict[tuple[str, str, bool], dict[str, float]]:
        out: dict[tuple[str, str, bool], dict[str, float]] = {}
        for c in self.cells:
            out.setdefault(c.row_key, {})[c.metric_name] = c.value
        return out

    def value(self, family: str, train_dataset: str, lm_finetuned: bool, metric: str) -> float | None:
        return self.rows().get((family, train_dataset, lm_finetuned), {}).get(metric)


@dataclass
class CorpusBundle:
    """Evaluation data of one corpus.

    ``task1`` maps split names to graded records; ``task2`` maps split names
    to pairs. A corpus whose pair data has no official split stores it all
    under ``"test"``.
    """

    name: str
    task1: dict[str, list[HeadlineRecord]] = field(default_factory=dict)
    task2: dict[str, list[PairRecord]] = field(default_factory=dict)

    def task2_all(self) -> list[PairRecord]:
        return [p for split in ("train", "dev", "test") for p in self.task2.get(split, [])]


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


def _task1_rmse(model: GraderModel, records: Sequence[HeadlineRecord]) -> float:
    missing = [r.id for r in records if r.mean_grade is None]
    if missing:
        raise MissingGrades(f"{len(missing)} evaluation records lack grades (first: {missing[0]})")
    preds = predict_grades(model, records)
    return rmse([p.grade for p in preds], [r.mean_grade for r in records])


def _task2_accuracy(model: GraderModel, pairs: Sequence[PairRecord], tie_epsilon: float) -> float:
    labelled = [p for p in pairs if p.gold_label is not None]
    preds = predict_pairs(model, labelled, tie_epsilon)
    return categorical_accuracy([label for _, label in preds], [p.gold_label for p in labelled])


def evaluate_model(
    model: GraderModel, datasets: Iterable[CorpusBundle], tie_epsilon: float = 0.0
) -> list[EvalCell]:
    """All metric cells for one trained model over every supplied corpus."""
    values: dict[str, float] = {}
    for bundle in datasets:
        if "test" not in bundle.task1:
            raise MissingSplit(f"{bundle.name}: task-1 test split missing")
        if bundle.name == "humicroedit":
            values["rmse_task1_test"] = _task1_rmse(model, bundle.task1["test"])
            if "test" in bundle.task2:
                values["acc_task2_test"] = _task2_accuracy(model, bundle.task2["test"], tie_epsilon)
            if bundle.task2:
                values["acc_task2_all"] = _task2_accuracy(model, bundle.task2_all(), tie_epsilon)
        elif bundle.name == "funlines":
            values["rmse_task1_funlines"] = _task1_rmse(model, bundle.task1["test"])
            if bundle.task2:
                values["acc_task2_funlines_all"] = _task2_accuracy(model, bundle.task2_all(), tie_epsilon)
        else:
            raise ValueError(f"unknown corpus {bundle.name!r}")
    return [
        EvalCell(model.family, model.train_dataset, model.lm_finetuned, metric, values[metric])
        for metric in METRICS
        if metric in values
    ]


def cross_dataset_eval(
    models: Sequence[GraderModel],
    datasets: Sequence[CorpusBundle],
    tie_epsilon: float = 0.0,
    provenance: dict | None = None,
) -> EvalReport:
    """Evaluate every model on its own corpus and on the other one."""
    report = EvalReport(provenance=dict(provenance or {}))
    for model in models:
        for cell in evaluate_model(model, datasets, tie_epsilon):
            report.add(cell)
    return report


def _format(value: float | None) -> str:
    return "" if value is None or (isinstance(value, float) and math.isnan(value)) else f"{value:.4f}"


def render_report(report: EvalReport, format: str = "text_table") -> str:
    header = ["model", "train_dataset", "masked_lm_finetuning"] + list(METRICS)
    body = [
        [family, train, "yes" if lm else "no"] + [_format(metrics.get(m)) for m in METRICS]
        for (family, train, lm), metrics in report.rows().items()
    ]
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(body)
        return buf.getvalue()
    if format != "text_table":
        raise ValueError(f"unknown report format {format!r}")
    titles = ["model", "train", "LM-FT"] + [METRIC_HEADERS[m] for m in METRICS]
    widths = [max(len(t), *(len(r[i]) for r in body)) if body else len(t) for i, t in enumerate(titles)]
    lines = [" | ".join(t.ljust(w) for t, w in zip(titles, widths))]
    lines.append("-+-".join("-" * w for w in widths))
    lines += [" | ".join(c.ljust(w) for c, w in zip(row, widths)) for row in body]
    if report.provenance:
        lines.append("")
        lines += [f"{k}: {v}" for k, v in sorted(report.provenance.items())]
    return "\n".join(lines) + "\n"
