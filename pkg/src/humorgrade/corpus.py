"""Headline-edit corpora: parsing, edit application and splits.

Both Humicroedit and FunLines ship comma-separated files where the
replaced word of the original headline is marked as ``<word/>``::

    id,original,edit,grades,meanGrade
    14530,France is <hunting/> down its citizens who joined ISIS,twins,10000,0.2

Sub-task-2 files carry two such edits side by side plus a label column.
"""

from __future__ import annotations

import csv
import json
import math
import random
import re
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    ConsistencyWarning,
    GradeOutOfRange,
    InsufficientRecords,
    MalformedEditMarker,
    MeanGradeMismatch,
    MissingColumn,
    OriginalMismatch,
)

EDIT_MARKER = re.compile(r"<([^<>]*)/>")

MIN_GRADE = 0.0
MAX_GRADE = 3.0

# Seed for regenerating FunLines sub-task-1 splits when no official split exists.
DEFAULT_SPLIT_SEED = 2020

# Split sizes of the released data (train, dev, test).
HUMICROEDIT_TASK1_COUNTS = (9652, 2419, 3024)
HUMICROEDIT_TASK2_COUNTS = (9381, 2355, 2960)
FUNLINES_TASK1_COUNTS = (5274, 1322, 1652)
FUNLINES_TASK2_COUNT = 1958

SPLIT_NAMES = ("train", "dev", "test")
DATASETS = ("humicroedit", "funlines")

_TASK1_COLUMNS = {
    "id": ("id",),
    "original": ("original",),
    "edit": ("edit",),
    "grades": ("grades",),
    "mean": ("meanGrade", "mean_grade", "meangrade"),
}


@dataclass(frozen=True)
class HeadlineRecord:
    id: str
    original_marked: str
    edit_word: str
    annotator_grades: tuple[int, ...] | None = None
    mean_grade: float | None = None

    def __post_init__(self):
        _marker_match(self.original_marked)
        if self.annotator_grades is not None:
            for g in self.annotator_grades:
                if g not in (0, 1, 2, 3):
                    raise GradeOutOfRange(f"record {self.id}: annotator grade {g} not in 0..3")
        if self.mean_grade is not None:
            if not (MIN_GRADE <= self.mean_grade <= MAX_GRADE) or math.isnan(self.mean_grade):
                raise GradeOutOfRange(f"record {self.id}: mean grade {self.mean_grade} outside [0, 3]")
            if self.annotator_grades:
                expected = sum(self.annotator_grades) / len(self.annotator_grades)
                if abs(expected - self.mean_grade) > 1e-9:
                    raise GradeOutOfRange(
                        f"record {self.id}: mean grade {self.mean_grade} != mean of grades {expected}"
                    )

    @property
    def original(self) -> str:
        return strip_edit(self.original_marked)

    @property
    def edited(self) -> str:
        return apply_edit(self.original_marked, self.edit_word)

    @property
    def has_grade(self) -> bool:
        return self.mean_grade is not None


@dataclass(frozen=True)
class PairRecord:
    id: str
    record_a: HeadlineRecord
    record_b: HeadlineRecord
    gold_label: int | None = None

    def __post_init__(self):
        if self.record_a.original != self.record_b.original:
            raise OriginalMismatch(
                f"pair {self.id}: originals differ: {self.record_a.original!r} vs {self.record_b.original!r}"
            )
        if self.gold_label is not None and self.gold_label not in (0, 1, 2):
            raise ValueError(f"pair {self.id}: label {self.gold_label} not in {{0, 1, 2}}")

    def grade_label(self) -> int | None:
        """Label implied by the two mean grades, or None when either is absent."""
        a, b = self.record_a.mean_grade, self.record_b.mean_grade
        if a is None or b is None:
            return None
        if a > b:
            return 1
        if b > a:
            return 2
        return 0

    def is_consistent(self) -> bool:
        implied = self.grade_label()
        return implied is None or self.gold_label is None or implied == self.gold_label


@dataclass
class DatasetSplit:
    name: str
    records: list = field(default_factory=list)
    source_dataset: str = "humicroedit"

    def __post_init__(self):
        if self.name not in SPLIT_NAMES:
            raise ValueError(f"unknown split name {self.name!r}")
        if self.source_dataset not in DATASETS:
            raise ValueError(f"unknown dataset {self.source_dataset!r}")
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate record ids in {self.source_dataset}/{self.name}")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def ids(self) -> set[str]:
        return {r.id for r in self.records}


def _marker_match(original_marked: str) -> re.Match:
    matches = list(EDIT_MARKER.finditer(original_marked))
    if len(matches) != 1:
        raise MalformedEditMarker(
            f"expected exactly one <word/> span, found {len(matches)} in {original_marked!r}"
        )
    return matches[0]


def edit_span(original_marked: str, edit_word: str) -> tuple[str, int, int]:
    """Return the edited headline and the character span of the replacement in it."""
    m = _marker_match(original_marked)
    prefix = original_marked[: m.start()]
    edited = prefix + edit_word + original_marked[m.end():]
    return edited, len(prefix), len(prefix) + len(edit_word)


def original_span(original_marked: str) -> tuple[str, int, int]:
    m = _marker_match(original_marked)
    word = m.group(1)
    prefix = original_marked[: m.start()]
    return prefix + word + original_marked[m.end():], len(prefix), len(prefix) + len(word)


def apply_edit(original_marked: str, edit_word: str) -> str:
    """Replace the marked span with ``edit_word``, dropping the markers."""
    return edit_span(original_marked, edit_word)[0]


def strip_edit(original_marked: str) -> str:
    """Remove the markers, keeping the original word."""
    return original_span(original_marked)[0]


def parse_grades(raw: str) -> tuple[int, ...] | None:
    raw = raw.strip()
    if not raw:
        return None
    if not raw.isdigit():
        raise GradeOutOfRange(f"grades field {raw!r} is not a digit string")
    grades = tuple(int(c) for c in raw)
    bad = [g for g in grades if g > 3]
    if bad:
        raise GradeOutOfRange(f"annotator grade {bad[0]} outside 0..3 in {raw!r}")
    return grades


def _parse_mean(raw: str | None) -> float | None:
    if raw is None or not raw.strip():
        return None
    try:
        value = float(raw)
    except ValueError as exc:
        raise GradeOutOfRange(f"mean grade {raw!r} is not a number") from exc
    if math.isnan(value) or not (MIN_GRADE <= value <= MAX_GRADE):
        raise GradeOutOfRange(f"mean grade {value} outside [0, 3]")
    return value


def _build_record(rec_id: str, original: str, edit: str, grades_raw: str | None, mean_raw: str | None):
    grades = parse_grades(grades_raw) if grades_raw is not None else None
    file_mean = _parse_mean(mean_raw)
    if grades:
        mean = sum(grades) / len(grades)
        if file_mean is not None and abs(file_mean - mean) > 1e-6:
            warnings.warn(
                f"record {rec_id}: file mean {file_mean} != recomputed {mean:.6f}; using recomputed",
                MeanGradeMismatch,
                stacklevel=3,
            )
    else:
        mean = file_mean
    return HeadlineRecord(rec_id, original, edit, grades, mean)


def _resolve(header: Sequence[str], names: dict[str, tuple[str, ...]], suffix: str = ""):
    lowered = {h.strip().lower(): i for i, h in enumerate(header)}
    out = {}
    for key, aliases in names.items():
        for alias in aliases:
            idx = lowered.get((alias + suffix).lower())
            if idx is not None:
                out[key] = idx
                break
    return out


def _read_rows(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn(f"{path}: empty file, header row required") from None
        rows = [row for row in reader if any(cell.strip() for cell in row)]
    return header, rows


def _cell(row: list[str], idx: int | None) -> str | None:
    if idx is None or idx >= len(row):
        return None
    return row[idx]


def parse_task1_file(path: str | Path) -> list[HeadlineRecord]:
    """Parse a sub-task-1 file into one record per row.

    The ``grades`` and ``meanGrade`` columns may be missing for blind test
    files. Any row with a malformed edit marker aborts the parse.
    """
    header, rows = _read_rows(path)
    cols = _resolve(header, _TASK1_COLUMNS)
    for required in ("id", "original", "edit"):
        if required not in cols:
            raise MissingColumn(f"{path}: missing column {required!r}")
    records = []
    for lineno, row in enumerate(rows, start=2):
        try:
            records.append(
                _build_record(
                    row[cols["id"]].strip(),
                    row[cols["original"]],
                    row[cols["edit"]],
                    _cell(row, cols.get("grades")),
                    _cell(row, cols.get("mean")),
                )
            )
        except (MalformedEditMarker, GradeOutOfRange) as exc:
            raise type(exc)(f"{path}:{lineno}: {exc}") from exc
    return records


def parse_task2_file(path: str | Path) -> list[PairRecord]:
    header, rows = _read_rows(path)
    cols = {"id": _resolve(header, {"id": ("id",)}).get("id")}
    side = {}
    for suffix in ("1", "2"):
        side[suffix] = _resolve(header, {k: v for k, v in _TASK1_COLUMNS.items() if k != "id"}, suffix)
        for required in ("original", "edit"):
            if required not in side[suffix]:
                raise MissingColumn(f"{path}: missing column {required + suffix!r}")
    if cols["id"] is None:
        raise MissingColumn(f"{path}: missing column 'id'")
    label_idx = _resolve(header, {"label": ("label",)}).get("label")

    pairs = []
    for lineno, row in enumerate(rows, start=2):
        pair_id = row[cols["id"]].strip()
        parts = pair_id.split("-")
        sub_ids = parts if len(parts) == 2 and all(parts) else [f"{pair_id}:a", f"{pair_id}:b"]
        try:
            a, b = (
                _build_record(
                    sub_id,
                    row[side[s]["original"]],
                    row[side[s]["edit"]],
                    _cell(row, side[s].get("grades")),
                    _cell(row, side[s].get("mean")),
                )
                for sub_id, s in zip(sub_ids, ("1", "2"))
            )
            raw_label = _cell(row, label_idx)
            label = int(raw_label) if raw_label is not None and raw_label.strip() else None
            pair = PairRecord(pair_id, a, b, label)
        except (MalformedEditMarker, GradeOutOfRange, OriginalMismatch) as exc:
            raise type(exc)(f"{path}:{lineno}: {exc}") from exc
        if not pair.is_consistent():
            warnings.warn(
                f"pair {pair_id}: gold label {pair.gold_label} contradicts mean grades "
                f"({a.mean_grade}, {b.mean_grade})",
                ConsistencyWarning,
                stacklevel=2,
            )
        pairs.append(pair)
    return pairs


def sniff_task(path: str | Path) -> int:
    """Return 2 if the header looks like a pair file, else 1."""
    with open(path, newline="", encoding="utf-8-sig") as fh:
        header = next(csv.reader(fh), [])
    lowered = {h.strip().lower() for h in header}
    return 2 if {"original1", "original2"} <= lowered else 1


def make_splits(
    records: Sequence,
    counts: tuple[int, int, int],
    seed: int = DEFAULT_SPLIT_SEED,
    source_dataset: str = "funlines",
) -> tuple[DatasetSplit, DatasetSplit, DatasetSplit]:
    if any(c < 0 for c in counts):
        raise ValueError(f"negative split count in {counts}")
    if sum(counts) > len(records):
        raise InsufficientRecords(f"requested {sum(counts)} records, only {len(records)} available")
    order = list(range(len(records)))
    random.Random(seed).shuffle(order)
    splits = []
    start = 0
    for name, n in zip(SPLIT_NAMES, counts):
        chosen = [records[i] for i in order[start:start + n]]
        splits.append(DatasetSplit(name, chosen, source_dataset))
        start += n
    return tuple(splits)


def proportional_counts(n: int, reference: tuple[int, int, int] = FUNLINES_TASK1_COUNTS) -> tuple[int, int, int]:
    """Scale reference split sizes to ``n`` records, using them verbatim when n matches."""
    total = sum(reference)
    if n >= total:
        return reference
    train = round(n * reference[0] / total)
    dev = round(n * reference[1] / total)
    return train, dev, n - train - dev


# -- line-delimited JSON export ------------------------------------------------


def record_to_dict(record: HeadlineRecord | PairRecord) -> dict:
    d = asdict(record)
    if isinstance(record, PairRecord):
        for key in ("record_a", "record_b"):
            grades = d[key]["annotator_grades"]
            d[key]["annotator_grades"] = list(grades) if grades is not None else None
    elif d["annotator_grades"] is not None:
        d["annotator_grades"] = list(d["annotator_grades"])
    return d


def record_from_dict(d: dict) -> HeadlineRecord | PairRecord:
    if "record_a" in d:
        return PairRecord(
            d["id"], record_from_dict(d["record_a"]), record_from_dict(d["record_b"]), d.get("gold_label")
        )
    grades = d.get("annotator_grades")
    return HeadlineRecord(
        d["id"],
        d["original_marked"],
        d["edit_word"],
        tuple(grades) if grades is not None else None,
        d.get("mean_grade"),
    )


def write_jsonl(records: Iterable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(record_to_dict(r), ensure_ascii=False, sort_keys=True) + "\n")


def read_jsonl(path: str | Path) -> list:
    with open(path, encoding="utf-8") as fh:
        return [record_from_dict(json.loads(line)) for line in fh if line.strip()]


def write_task1_csv(records: Iterable[HeadlineRecord], path: str | Path) -> None:
    """Write records in the released sub-task-1 layout."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "original", "edit", "grades", "meanGrade"])
        for r in records:
            grades = "".join(map(str, r.annotator_grades)) if r.annotator_grades else ""
            mean = "" if r.mean_grade is None else f"{r.mean_grade:.10g}"
            w.writerow([r.id, r.original_marked, r.edit_word, grades, mean])


def write_task2_csv(pairs: Iterable[PairRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["id", "original1", "edit1", "grades1", "meanGrade1",
             "original2", "edit2", "grades2", "meanGrade2", "label"]
        )
        for p in pairs:
            row = [p.id]
            for r in (p.record_a, p.record_b):
                grades = "".join(map(str, r.annotator_grades)) if r.annotator_grades else ""
                mean = "" if r.mean_grade is None else f"{r.mean_grade:.10g}"
                row += [r.original_marked, r.edit_word, grades, mean]
            row.append("" if p.gold_label is None else p.gold_label)
            w.writerow(row)
