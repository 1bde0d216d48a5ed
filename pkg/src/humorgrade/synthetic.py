"""Synthetic headline edits with a planted grade signal.

The grade is a deterministic function of the edit word: 3.0 for words in
:data:`FUNNY_WORDS`, 0.0 otherwise. Used by the self-test, the tests and
the desk-scale acceptance run.
"""

from __future__ import annotations

import random

from .corpus import HeadlineRecord, PairRecord

FUNNY_WORDS = ("tequila", "clown", "banana", "pajamas", "unicorn", "karaoke", "hamster", "burrito", "disco", "pickle")
PLAIN_WORDS = ("warning", "budget", "senate", "report", "policy", "election", "meeting", "court", "market", "border")

TEMPLATES = (
    "US Navy ship fired <{w}/> shots at an Iranian boat in the Persian Gulf",
    "Trump signs new <{w}/> order on trade with China",
    "Senate rejects {w2} plan after long <{w}/> debate",
    "Officials warn of <{w}/> crisis ahead of the summit",
    "Mayor defends <{w}/> decision amid protests downtown",
    "Police investigate <{w}/> leak at city hall",
    "Congress delays vote on <{w}/> reform until next week",
    "Governor announces <{w}/> review of state spending",
    "White House denies <{w}/> talks with Russia",
    "Lawmakers question <{w}/> chief over missing emails",
)


def planted_grade(edit_word: str) -> float:
    return 3.0 if edit_word in FUNNY_WORDS else 0.0


def _record(rec_id: str, template: str, original: str, edit: str, rng: random.Random) -> HeadlineRecord:
    marked = template.format(w=original, w2=rng.choice(PLAIN_WORDS))
    grade = int(planted_grade(edit))
    return HeadlineRecord(rec_id, marked, edit, (grade,) * 5, float(grade))


def make_records(n: int = 500, seed: int = 0, prefix: str = "s") -> list[HeadlineRecord]:
    rng = random.Random(seed)
    out = []
    for i in range(n):
        template = rng.choice(TEMPLATES)
        original = rng.choice(PLAIN_WORDS)
        edit = rng.choice(FUNNY_WORDS + PLAIN_WORDS)
        out.append(_record(f"{prefix}{i}", template, original, edit, rng))
    return out


def make_pairs(n: int = 200, seed: int = 1, prefix: str = "p") -> list[PairRecord]:
    """Pairs of two distinct edits of one headline, labelled from the planted grades."""
    rng = random.Random(seed)
    pairs = []
    for i in range(n):
        template = rng.choice(TEMPLATES)
        original = rng.choice(PLAIN_WORDS)
        w2 = rng.choice(PLAIN_WORDS)
        edit_a, edit_b = rng.sample(FUNNY_WORDS + PLAIN_WORDS, 2)
        recs = []
        for suffix, edit in (("a", edit_a), ("b", edit_b)):
            marked = template.format(w=original, w2=w2)
            grade = int(planted_grade(edit))
            recs.append(HeadlineRecord(f"{prefix}{i}{suffix}", marked, edit, (grade,) * 5, float(grade)))
        a, b = recs
        label = 1 if a.mean_grade > b.mean_grade else 2 if b.mean_grade > a.mean_grade else 0
        # official pair ids join the two record ids with a hyphen
        pairs.append(PairRecord(f"{a.id}-{b.id}", a, b, label))
    return pairs
