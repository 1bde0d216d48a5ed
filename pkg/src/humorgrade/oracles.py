"""Direct-loop reference computations used to cross-check the metrics.

Deliberately naive and independent of numpy so they share no code path
with the implementations they check.
"""

from __future__ import annotations

import math


def rmse_loop(pred, truth) -> float:
    total = 0.0
    for p, t in zip(pred, truth):
        total += (p - t) * (p - t)
    return math.sqrt(total / len(pred))


def accuracy_loop(pred, gold) -> float:
    hits = 0
    for p, g in zip(pred, gold):
        if p == g:
            hits += 1
    return hits / len(pred)


def share_loop(row, edited, non_special) -> float:
    num = 0.0
    den = 0.0
    for i, w in enumerate(row):
        if i in non_special:
            den += w
            if i in edited:
                num += w
    return num / den

