"""Zero-shot funnier-of-two labels from pointwise grades."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .corpus import PairRecord
from .errors import NonFiniteGrade
from .grader import GraderModel, predict_grades

EQUAL, A_FUNNIER, B_FUNNIER = 0, 1, 2


def pair_label(grade_a: float, grade_b: float, tie_epsilon: float = 0.0) -> int:
    """1 if A is funnier by more than ``tie_epsilon``, 2 if B is, else 0."""
    if not (math.isfinite(grade_a) and math.isfinite(grade_b)):
        raise NonFiniteGrade(f"grades must be finite, got ({grade_a}, {grade_b})")
    if tie_epsilon < 0:
        raise ValueError("tie_epsilon must be non-negative")
    if grade_a - grade_b > tie_epsilon:
        return A_FUNNIER
    if grade_b - grade_a > tie_epsilon:
        return B_FUNNIER
    return EQUAL


@dataclass(frozen=True)
class PairPrediction:
    id: str
    grade_a: float
    grade_b: float
    label: int


def predict_pair_grades(
    model: GraderModel, pairs: Sequence[PairRecord], tie_epsilon: float = 0.0
) -> list[PairPrediction]:
    records = [p.record_a for p in pairs] + [p.record_b for p in pairs]
    grades = [g.grade for g in predict_grades(model, records)]
    n = len(pairs)
    return [
        PairPrediction(p.id, ga, gb, pair_label(ga, gb, tie_epsilon))
        for p, ga, gb in zip(pairs, grades[:n], grades[n:])
    ]


def predict_pairs(model: GraderModel, pairs: Sequence[PairRecord], tie_epsilon: float = 0.0) -> list[tuple[str, int]]:
    """Grade both edits with the sub-task-1 model and label the higher one. No training."""
    return [(p.id, p.label) for p in predict_pair_grades(model, pairs, tie_epsilon)]


def write_pair_predictions(preds: Sequence[tuple[str, int]], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "pred"])
        for pair_id, label in preds:
            w.writerow([pair_id, label])


def write_pair_grades(preds: Sequence[PairPrediction], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "grade_a", "grade_b"])
        for p in preds:
            w.writerow([p.id, repr(float(p.grade_a)), repr(float(p.grade_b))])


def read_pair_predictions(path: str | Path) -> list[tuple[str, int]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [(row["id"], int(row["pred"])) for row in csv.DictReader(fh)]


def read_pair_grades(path: str | Path) -> list[tuple[str, float, float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [(row["id"], float(row["grade_a"]), float(row["grade_b"])) for row in csv.DictReader(fh)]
