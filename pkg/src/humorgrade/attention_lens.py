"""How much of the final-layer CLS attention lands on the edited word.

For each head the share is the CLS attention mass on the replacement
word's tokens divided by the mass on all non-special tokens. Special
tokens are left out of the denominator because they soak up attention
regardless of content. Heads are numbered from 1 in every output.
"""

from __future__ import annotations

import csv
import html
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Collection, Sequence

import numpy as np
import torch

from .corpus import HeadlineRecord
from .encoding import EncodedPair
from .errors import EmptyDenominator, MissingGrades, TruncationDroppedEdit
from .grader import GraderModel, clamp_grade

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AttentionSummary:
    record_id: str
    per_head_edited_share: tuple[float, ...]
    abs_error: float | None = None
    grade: float | None = None


@dataclass
class DatasetAttention:
    best: list[AttentionSummary]
    worst: list[AttentionSummary]
    per_head_means: np.ndarray  # row 0 best group, row 1 worst group
    summaries: list[AttentionSummary]


def edited_attention_share(
    attn_row: Sequence[float],
    edited_positions: Collection[int],
    non_special_positions: Collection[int],
) -> float:
    edited = set(edited_positions)
    non_special = set(non_special_positions)
    if not edited <= non_special:
        raise ValueError("edited positions must be a subset of the non-special positions")
    row = np.asarray(attn_row, dtype=np.float64)
    denom = row[sorted(non_special)].sum() if non_special else 0.0
    if denom <= 0:
        raise EmptyDenominator("no attention mass on non-special tokens")
    return float(row[sorted(edited)].sum() / denom) if edited else 0.0


@torch.no_grad()
def cls_attention(model: GraderModel, pairs: Sequence[EncodedPair]) -> tuple[list[np.ndarray], list[float]]:
    """Final-layer CLS attention rows [heads, seq] per pair, plus raw grades."""
    model.eval()
    batch = model.batch_tensors(pairs)
    out = model.backend(**batch, want_attention=True)
    grades = model.head(out.pooled).squeeze(-1).tolist()
    final = out.attentions[:, -1, :, 0, :].double().cpu().numpy()
    return [final[i, :, : len(p.token_ids)] for i, p in enumerate(pairs)], grades


def summarize_record(pair: EncodedPair, cls_rows: np.ndarray, gold: float | None, grade: float) -> AttentionSummary:
    non_special = pair.non_special_positions
    shares = tuple(
        edited_attention_share(cls_rows[h], pair.edited_token_positions, non_special) for h in range(cls_rows.shape[0])
    )
    grade = clamp_grade(grade)
    err = abs(grade - gold) if gold is not None else None
    return AttentionSummary(pair.record_id, shares, err, grade)


def summarize_dataset(
    model: GraderModel, records: Sequence[HeadlineRecord], top_k: int, batch_size: int = 32
) -> DatasetAttention:
    """Per-head edited shares of the ``top_k`` best and worst predicted records.

    Ties in absolute error are broken by record id so the groups are stable.
    """
    missing = [r.id for r in records if r.mean_grade is None]
    if missing:
        raise MissingGrades(f"{len(missing)} records lack grades (first: {missing[0]})")
    usable, pairs = [], []
    for r in records:
        try:
            pairs.append(model.encode(r))
            usable.append(r)
        except TruncationDroppedEdit as exc:
            logger.warning("attention summary skips %s: %s", r.id, exc)

    summaries = []
    for start in range(0, len(pairs), batch_size):
        chunk = pairs[start:start + batch_size]
        rows, grades = cls_attention(model, chunk)
        for pair, rec, row, g in zip(chunk, usable[start:start + batch_size], rows, grades):
            summaries.append(summarize_record(pair, row, rec.mean_grade, g))

    best = sorted(summaries, key=lambda s: (s.abs_error, s.record_id))[:top_k]
    worst = sorted(summaries, key=lambda s: (-s.abs_error, s.record_id))[:top_k]
    num_heads = model.backend.spec.num_heads
    means = np.full((2, num_heads), np.nan)
    for i, group in enumerate((best, worst)):
        if group:
            means[i] = np.mean([s.per_head_edited_share for s in group], axis=0)
    return DatasetAttention(best, worst, means, summaries)


def write_share_csv(summaries: Sequence[AttentionSummary], path: str | Path, group: str | None = None) -> None:
    num_heads = len(summaries[0].per_head_edited_share) if summaries else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["record_id", "group", "grade", "abs_error"] + [f"head_{h}" for h in range(1, num_heads + 1)])
        for s in summaries:
            w.writerow(
                [s.record_id, group or "", _num(s.grade), _num(s.abs_error)]
                + [f"{v:.6f}" for v in s.per_head_edited_share]
            )


def _num(v: float | None) -> str:
    return "" if v is None else f"{v:.6f}"


def format_head_means(result: DatasetAttention) -> str:
    heads = result.per_head_means.shape[1]
    lines = ["group  " + " ".join(f"h{h:<6d}" for h in range(1, heads + 1))]
    for name, row in zip(("best", "worst"), result.per_head_means):
        lines.append(f"{name:<6} " + " ".join(f"{v:<7.3f}" for v in row))
    return "\n".join(lines)


_HTML_TEMPLATE = """<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>CLS attention: {title}</title>
<style>
body {{ font-family: sans-serif; margin: 1.5em; }}
table {{ border-collapse: collapse; }}
td, th {{ padding: 3px 6px; border: 1px solid #ddd; text-align: center; font-size: 13px; }}
th.edited {{ outline: 2px solid #e07b00; color: #b35c00; }}
td.share {{ font-weight: bold; }}
.note {{ color: #555; font-size: 12px; }}
</style>
</head>
<body>
<h2>Record {title}</h2>
<p>Original: {original}<br>Edited: {edited}<br>{grade_line}</p>
<p class="note">Final-layer attention from the first (classification) token, one row per head.
Cell shading is proportional to the weight; edited tokens are outlined. The share column is the
edited-token mass divided by the mass on all non-special tokens.</p>
<table>
<tr><th>head</th>{token_headers}<th>edited share</th></tr>
{rows}
</table>
</body>
</html>
"""


def emit_attention_html(model: GraderModel, record: HeadlineRecord) -> str:
    """A self-contained HTML page showing per-head CLS attention for one record."""
    pair = model.encode(record)
    (rows,), (raw,) = cls_attention(model, [pair])
    summary = summarize_record(pair, rows, record.mean_grade, raw)
    tokens = model.backend.convert_ids_to_tokens(pair.token_ids)
    headers = "".join(
        f'<th class="edited">{html.escape(t)}</th>' if i in pair.edited_token_positions else f"<th>{html.escape(t)}</th>"
        for i, t in enumerate(tokens)
    )
    body = []
    for h in range(rows.shape[0]):
        peak = rows[h].max() or 1.0
        cells = "".join(
            f'<td style="background: rgba(224,123,0,{w / peak:.3f})" title="{w:.4f}">{w:.2f}</td>' for w in rows[h]
        )
        body.append(f"<tr><th>{h + 1}</th>{cells}<td class=\"share\">{summary.per_head_edited_share[h]:.3f}</td></tr>")
    grade_line = f"Predicted grade: {summary.grade:.3f}"
    if record.mean_grade is not None:
        grade_line += f" &middot; gold grade: {record.mean_grade:.3f}"
    return _HTML_TEMPLATE.format(
        title=html.escape(record.id),
        original=html.escape(record.original),
        edited=html.escape(record.edited),
        grade_line=grade_line,
        token_headers=headers,
        rows="\n".join(body),
    )
