import csv
import filecmp
import json
from pathlib import Path

import pytest
import yaml

from humorgrade.cli import main
from humorgrade.corpus import parse_task1_file


@pytest.fixture(scope="module")
def config_file(synthetic_files):
    cfg = {
        "family": "tiny",
        "seed": 3,
        "datasets": {
            "humicroedit": {
                "task1": {"train": "task1-train.csv", "dev": "task1-dev.csv", "test": "task1-test.csv"},
                "task2": {"test": "task2-test.csv"},
            },
            "funlines": {
                "task1": {"all": "funlines-task1.csv", "counts": [80, 20, 20], "split_seed": 2020},
                "task2": {"all": "funlines-task2.csv"},
            },
        },
        "train": {"epochs": 3},
        "mlm": {"epochs": 1},
    }
    path = synthetic_files / "run.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def only_dir(parent: Path, prefix: str) -> Path:
    (found,) = [p for p in parent.iterdir() if p.name.startswith(prefix)]
    return found


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory, config_file):
    """Runs the full command chain once and returns the output root."""
    root = tmp_path_factory.mktemp("runs")
    common = ["--config", config_file, "--out", root]
    assert main(["pretrain-mlm", *map(str, common)]) == 0
    ckpt = only_dir(root, "pretrain-mlm-") / "checkpoint"
    assert main(["train", *map(str, common)]) == 0
    assert main(["train", *map(str, common), "--init", "lm-finetuned", "--checkpoint", str(ckpt)]) == 0
    return root


def graders(root: Path) -> list[Path]:
    return sorted(p / "grader" for p in root.iterdir() if p.name.startswith("train-"))


def test_ingest_prints_count(capsys, synthetic_files):
    code, out, _ = run(capsys, "ingest", synthetic_files / "task1-train.csv")
    assert code == 0 and out.strip() == "200 records"
    code, out, _ = run(capsys, "ingest", synthetic_files / "funlines-task2.csv")
    assert out.strip() == "30 records"


def test_ingest_writes_jsonl(capsys, tmp_path, synthetic_files):
    code, out, _ = run(capsys, "ingest", synthetic_files / "task1-dev.csv", "--out", tmp_path)
    assert code == 0
    assert len((only_dir(tmp_path, "ingest-") / "records.jsonl").read_text().splitlines()) == 50


def test_pipeline_artifacts(pipeline):
    mlm = only_dir(pipeline, "pretrain-mlm-")
    assert (mlm / "loss_history.tsv").is_file()
    models = graders(pipeline)
    assert len(models) == 2
    inits = sorted(json.loads((m / "grader.json").read_text())["init_provenance"] for m in models)
    assert inits == ["lm_finetuned", "pretrained"]


def test_grade_pair_and_consistency(capsys, pipeline, synthetic_files, tmp_path):
    model = graders(pipeline)[0]
    code, out, _ = run(capsys, "grade", "--model", model, "--input", synthetic_files / "task1-test.csv", "--out", tmp_path)
    assert code == 0 and "RMSE" in out
    rows = list(csv.DictReader(open(only_dir(tmp_path, "grade-") / "predictions.csv")))
    assert [r["id"] for r in rows] == [r.id for r in parse_task1_file(synthetic_files / "task1-test.csv")]
    assert all(0.0 <= float(r["pred"]) <= 3.0 for r in rows)

    code, out, _ = run(capsys, "pair", "--model", model, "--input", synthetic_files / "task2-test.csv", "--out", tmp_path)
    assert code == 0 and "accuracy" in out
    pair_dir = only_dir(tmp_path, "pair-")
    grades = list(csv.DictReader(open(pair_dir / "pair_grades.csv")))
    labels = list(csv.DictReader(open(pair_dir / "pairs.csv")))
    for g, lab in zip(grades, labels):
        a, b = float(g["grade_a"]), float(g["grade_b"])
        assert int(lab["pred"]) == (1 if a > b else 2 if b > a else 0)


def test_xeval_two_rows(capsys, pipeline, config_file, tmp_path):
    a, b = graders(pipeline)
    code, out, _ = run(capsys, "xeval", "--config", config_file, "--model", a, "--model", b, "--out", tmp_path)
    assert code == 0
    rows = list(csv.reader(open(only_dir(tmp_path, "xeval-") / "report.csv")))
    assert len(rows) == 3
    assert sorted(r[2] for r in rows[1:]) == ["no", "yes"]
    assert all(cell != "" for r in rows[1:] for cell in r)


def test_attn_report(capsys, pipeline, synthetic_files, tmp_path):
    model = graders(pipeline)[0]
    code, out, _ = run(capsys, "attn-report", "--model", model, "--input", synthetic_files / "task1-dev.csv",
                       "--top-k", 3, "--out", tmp_path)
    assert code == 0 and out.startswith("mean edited-token attention share")
    report = only_dir(tmp_path, "attn-report-")
    assert len(list((report / "html").glob("*.html"))) == 6
    assert len((report / "shares.csv").read_text().splitlines()) == 51


def test_rerun_is_byte_identical(pipeline, config_file, tmp_path):
    assert main(["train", "--config", str(config_file), "--out", str(tmp_path)]) == 0
    mine = only_dir(tmp_path, "train-")
    first = pipeline / mine.name  # same config and seed, so the same run name
    assert first.is_dir()
    files = sorted(p.relative_to(mine) for p in mine.rglob("*") if p.is_file() and p.name != "manifest.txt")
    assert files
    _, mismatch, errors = filecmp.cmpfiles(first, mine, [str(f) for f in files], shallow=False)
    assert not mismatch and not errors


def test_existing_run_dir_is_not_overwritten(capsys, pipeline, config_file):
    code, _, err = run(capsys, "train", "--config", config_file, "--out", pipeline)
    assert code == 1 and err.startswith("OutputExists: ")
    assert len(err.strip().splitlines()) == 1


def test_error_lines(capsys, tmp_path, synthetic_files):
    code, _, err = run(capsys, "ingest", tmp_path / "nope.csv")
    assert code == 2 and err.startswith("InputMissing: ")
    bad = tmp_path / "bad.yaml"
    bad.write_text("family: gpt2\n")
    code, _, err = run(capsys, "train", "--config", bad, "--out", tmp_path)
    assert code == 2 and err.startswith("ConfigInvalid: ")
    broken = tmp_path / "broken.csv"
    broken.write_text("id,original,edit,grades,meanGrade\n1,no marker,x,3,3\n")
    code, _, err = run(capsys, "ingest", broken)
    assert code == 1 and err.startswith("MalformedEditMarker: ")
    code, _, err = run(capsys, "train", "--config", synthetic_files / "run.yaml", "--init", "lm-finetuned",
                       "--out", tmp_path)
    assert code == 1 and err.startswith("CheckpointMissing: ")


def test_selftest_command(capsys):
    code, out, _ = run(capsys, "selftest")
    lines = out.strip().splitlines()
    assert code == 0 and len(lines) == 5 and all(line.startswith("PASS ") for line in lines)
