import math
import statistics

import pytest
import torch

from humorgrade import synthetic
from humorgrade.backend import load_backend
from humorgrade.corpus import HeadlineRecord, make_splits
from humorgrade.errors import MissingGrades, TruncationWarning
from humorgrade.evalreport import rmse
from humorgrade.grader import (
    GradePrediction,
    GraderModel,
    TrainConfig,
    clamp_grade,
    load_grader,
    predict_grades,
    read_predictions,
    train_grader,
    write_predictions,
)
from humorgrade.selftest import run_tiny_end_to_end

FAST = TrainConfig(epochs=4, batch=8, learn_rate=1e-3, seed=0, early_stop_patience=2)


def fresh_grader(records, seed=0):
    texts = [t for r in records for t in (r.original, r.edited)]
    return GraderModel(load_backend("tiny", "random_init", corpus=texts, seed=seed), seed=seed)


@pytest.fixture(scope="module")
def planted_run():
    return run_tiny_end_to_end(seed=0, n_records=500)


def test_planted_signal_beats_constant_baseline(planted_run):
    records = synthetic.make_records(500, 0)
    train, dev, _ = make_splits(records, (350, 75, 75), 0, "humicroedit")
    # analytic baseline: the best constant is the train mean, so its dev RMSE
    # follows from the share p of funny edits on dev (grades are 0 or 3)
    mu = statistics.fmean(r.mean_grade for r in train)
    p = sum(r.mean_grade == 3.0 for r in dev) / len(dev)
    analytic = math.sqrt(p * (3.0 - mu) ** 2 + (1 - p) * mu ** 2)
    assert planted_run["baseline_rmse"] == pytest.approx(analytic, abs=1e-9)
    assert planted_run["dev_rmse"] < 0.5 * analytic


def test_train_mse_decreases(planted_run):
    history = planted_run["history"]
    assert history[0]["epoch"] == 0
    assert history[-1]["train_mse"] < history[1]["train_mse"]
    assert len(history) <= 11


def test_selected_model_has_min_dev_mse(synthetic_records):
    model = fresh_grader(synthetic_records)
    train, dev = synthetic_records[:90], synthetic_records[90:]
    model, history = train_grader(model, train, dev, FAST)
    preds = model.raw_grades([model.encode(r) for r in dev])
    dev_mse = sum((p - r.mean_grade) ** 2 for p, r in zip(preds, dev)) / len(dev)
    assert dev_mse == pytest.approx(min(h["dev_mse"] for h in history), rel=1e-5)


def test_zero_epochs_returns_identical_model(synthetic_records):
    model = fresh_grader(synthetic_records)
    before = {k: v.clone() for k, v in model.state_dict().items()}
    cfg = TrainConfig(epochs=0)
    out, history = train_grader(model, synthetic_records[:10], synthetic_records[10:20], cfg)
    assert out is model and history == []
    assert all(torch.equal(before[k], v) for k, v in out.state_dict().items())


def test_missing_grades_rejected(synthetic_records):
    blind = [HeadlineRecord("b", "<x/> y", "z")]
    with pytest.raises(MissingGrades):
        train_grader(fresh_grader(synthetic_records), blind, synthetic_records[:5], FAST)


@pytest.mark.parametrize("raw, clamped", [(3.2, 3.0), (-0.4, 0.0), (1.7, 1.7)])
def test_clamp(raw, clamped):
    assert clamp_grade(raw) == clamped


def test_out_of_range_outputs_are_clamped(tiny_grader, synthetic_records):
    with torch.no_grad():
        tiny_grader.head.bias.fill_(10.0)
    preds = predict_grades(tiny_grader, synthetic_records[:4])
    assert all(p.grade == 3.0 for p in preds)


def test_predict_empty_and_duplicates(tiny_grader, synthetic_records):
    assert predict_grades(tiny_grader, []) == []
    rec = synthetic_records[0]
    a, b = predict_grades(tiny_grader, [rec, rec])
    assert a == b
    ordered = predict_grades(tiny_grader, synthetic_records[:6])
    assert [p.record_id for p in ordered] == [r.id for r in synthetic_records[:6]]


def test_dropped_edit_warns_and_still_predicts(tiny_grader):
    rec = HeadlineRecord("long", " ".join(["w"] * 200) + " <x/>", "y")
    with pytest.warns(TruncationWarning):
        (pred,) = predict_grades(tiny_grader, [rec])
    assert 0.0 <= pred.grade <= 3.0


def test_save_load_round_trip(tmp_path, tiny_grader, synthetic_records):
    path = tiny_grader.save(tmp_path / "g")
    loaded = load_grader(path)
    assert loaded.init_provenance == "pretrained" and loaded.train_dataset == "humicroedit"
    assert predict_grades(loaded, synthetic_records[:8]) == predict_grades(tiny_grader, synthetic_records[:8])


def test_prediction_file_round_trip(tmp_path):
    preds = [GradePrediction("1", 0.1 + 0.2), GradePrediction("2", 3.0)]
    write_predictions(preds, tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "id,pred"
    assert read_predictions(tmp_path / "p.csv") == preds


def test_hf_grader_trains(minibert_dir):
    backend = load_backend("bert_base_uncased", "published_pretrained", source=minibert_dir)
    model = GraderModel(backend)
    recs = [HeadlineRecord(str(i), "us navy ship fired <warning/> shots", w, None, g)
            for i, (w, g) in enumerate([("tequila", 2.6), ("texts", 1.6), ("ice cream", 1.0), ("trade", 0.2)])]
    model, history = train_grader(model, recs, recs, TrainConfig(epochs=2, batch=2, learn_rate=1e-3))
    assert len(history) >= 2 and all(math.isfinite(h["dev_mse"]) for h in history)
    assert rmse([p.grade for p in predict_grades(model, recs)], [r.mean_grade for r in recs]) >= 0
