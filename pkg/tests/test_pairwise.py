import math
import random

import pytest
from humorgrade import synthetic
from humorgrade.corpus import HeadlineRecord, PairRecord
from humorgrade.errors import NonFiniteGrade
from humorgrade.selftest import spread_grader as spread
from humorgrade.pairwise import (
    pair_label,
    predict_pair_grades,
    predict_pairs,
    read_pair_grades,
    read_pair_predictions,
    write_pair_grades,
    write_pair_predictions,
)

from conftest import EXAMPLE_MARKED


@pytest.mark.parametrize(
    "a, b, eps, label",
    [(2.6, 1.8, 0.0, 1), (1.8, 2.6, 0.0, 2), (1.2, 1.2, 0.0, 0), (1.0, 1.000001, 1e-3, 0), (0.0, 3.0, 1e-3, 2)],
)
def test_pair_label(a, b, eps, label):
    assert pair_label(a, b, eps) == label


@pytest.mark.parametrize("bad", [math.nan, math.inf])
def test_pair_label_non_finite(bad):
    with pytest.raises(NonFiniteGrade):
        pair_label(bad, 1.0)


def test_pair_label_antisymmetric_on_random_values():
    rng = random.Random(0)
    flip = {0: 0, 1: 2, 2: 1}
    for _ in range(500):
        a, b, eps = rng.uniform(0, 3), rng.uniform(0, 3), rng.choice([0.0, 0.1])
        assert pair_label(b, a, eps) == flip[pair_label(a, b, eps)]


@pytest.fixture()
def spread_grader(tiny_grader):
    return spread(tiny_grader, synthetic.make_records(40, seed=8))


def test_identical_edits_tie(spread_grader):
    rec = HeadlineRecord("a", EXAMPLE_MARKED, "tequila")
    twin = HeadlineRecord("b", EXAMPLE_MARKED, "tequila")
    assert predict_pairs(spread_grader, [PairRecord("p", rec, twin)]) == [("p", 0)]


def test_swap_and_file_consistency(tmp_path, spread_grader):
    pairs = synthetic.make_pairs(60, seed=3)
    preds = predict_pair_grades(spread_grader, pairs)
    assert {p.label for p in preds} >= {1, 2}
    swapped = predict_pairs(spread_grader, [PairRecord(p.id, p.record_b, p.record_a) for p in pairs])
    assert [label for _, label in swapped] == [{0: 0, 1: 2, 2: 1}[p.label] for p in preds]

    write_pair_grades(preds, tmp_path / "grades.csv")
    write_pair_predictions([(p.id, p.label) for p in preds], tmp_path / "pairs.csv")
    grades = read_pair_grades(tmp_path / "grades.csv")
    labels = read_pair_predictions(tmp_path / "pairs.csv")
    assert [i for i, _, _ in grades] == [i for i, _ in labels]
    assert all(pair_label(a, b) == label for (_, a, b), (_, label) in zip(grades, labels))
    assert (tmp_path / "pairs.csv").read_text().splitlines()[0] == "id,pred"
