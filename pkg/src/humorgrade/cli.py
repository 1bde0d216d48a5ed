"""Command-line entry points.

    humorgrade ingest FILE
    humorgrade pretrain-mlm --config run.yaml --family tiny --dataset humicroedit --out runs/
    humorgrade train --config run.yaml --init lm-finetuned --checkpoint runs/pretrain-mlm-.../checkpoint --out runs/
    humorgrade grade --model runs/train-.../grader --input test.csv --out runs/
    humorgrade pair --model runs/train-.../grader --input task2.csv --out runs/
    humorgrade xeval --config run.yaml --model A --model B --out runs/
    humorgrade attn-report --model runs/train-.../grader --input test.csv --out runs/
    humorgrade selftest

Every command writes into ``<out>/<command>-<config hash>/`` and refuses to
reuse a non-empty run directory unless ``--overwrite`` is given. Failures
print one ``<Category>: <message>`` line on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
import warnings
from pathlib import Path

import numpy as np
import torch

from . import corpus as C
from .attention_lens import emit_attention_html, format_head_means, summarize_dataset, write_share_csv
from .backend import load_backend
from .config import RunConfig, load_bundle, load_config, load_task1
from .errors import CheckpointMissing, ConfigInvalid, HumorGradeError, InputMissing, OutputExists
from .evalreport import config_hash, cross_dataset_eval, render_report, rmse
from .grader import GraderModel, load_grader, predict_grades, train_grader, write_predictions
from .mlm_finetune import edited_corpus, lm_finetune, write_loss_history
from .pairwise import predict_pair_grades, write_pair_grades, write_pair_predictions
from .selftest import run_selftest

logger = logging.getLogger("humorgrade")

INIT_FLAGS = {"pretrained": "pretrained", "lm-finetuned": "lm_finetuned"}


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)


def pick_device(name: str) -> torch.device:
    if name == "auto":
        name = "cuda" if torch.cuda.is_available() else "cpu"
    return torch.device(name)


def _input(path: str | None, what: str = "input") -> Path:
    if path is None:
        raise InputMissing(f"--{what} is required")
    p = Path(path)
    if not p.exists():
        raise InputMissing(f"{what} not found: {p}")
    return p


def run_dir(args, cfg: RunConfig, extra: dict) -> Path:
    """Directory for this invocation, named by a hash of everything that shapes its output."""
    key = {"command": args.command, "seed": args.seed, "config": cfg.as_dict(), **extra}
    path = Path(args.out) / f"{args.command}-{config_hash(key)}"
    if path.exists() and any(path.iterdir()) and not args.overwrite:
        raise OutputExists(f"run directory {path} already holds results; pass --overwrite to replace them")
    path.mkdir(parents=True, exist_ok=True)
    (path / "run.json").write_text(json.dumps(key, indent=2, sort_keys=True, default=str) + "\n")
    return path


def _resolve_seed(args, cfg: RunConfig) -> int:
    if args.seed is None:
        args.seed = cfg.seed
    seed_everything(args.seed)
    return args.seed


def _family(args, cfg: RunConfig) -> str:
    return args.family or cfg.family


def _fresh_backend(cfg: RunConfig, family: str, dataset: str, seed: int, weights_for_hf: str = "published_pretrained"):
    if family == "tiny":
        task1 = load_task1(cfg, dataset)
        texts = [t for r in task1.get("train", []) for t in (r.original, r.edited)]
        from .backend import TinyVocab

        vocab = TinyVocab.build(texts, min_freq=cfg.min_freq)
        return load_backend(cfg.tiny_spec(), "random_init", vocab=vocab, seed=seed)
    return load_backend(family, weights_for_hf, source=cfg.pretrained_sources.get(family))


# -- commands ----------------------------------------------------------------------


def cmd_ingest(args) -> int:
    path = _input(args.input)
    task = args.task or C.sniff_task(path)
    records = C.parse_task1_file(path) if task == 1 else C.parse_task2_file(path)
    print(f"{len(records)} records")
    if args.out:
        cfg = load_config(args.config)
        _resolve_seed(args, cfg)
        out = run_dir(args, cfg, {"input": str(path.resolve()), "task": task})
        C.write_jsonl(records, out / "records.jsonl")
        print(f"wrote {out / 'records.jsonl'}")
    return 0


def cmd_pretrain_mlm(args) -> int:
    cfg = load_config(args.config)
    seed = _resolve_seed(args, cfg)
    family, dataset = _family(args, cfg), args.dataset
    task1 = load_task1(cfg, dataset)
    records = [r for split in ("train", "dev", "test") for r in task1.get(split, [])]
    texts = edited_corpus(records)
    backend = _fresh_backend(cfg, family, dataset, seed).to(pick_device(args.device))
    out = run_dir(args, cfg, {"family": family, "dataset": dataset})
    result = lm_finetune(backend, texts, cfg.mlm_config(family, seed), out / "checkpoint")
    write_loss_history(result.history, out / "loss_history.tsv")
    for epoch, loss in result.history:
        print(f"epoch {epoch} mean loss {loss:.4f}")
    print(f"checkpoint {result.checkpoint}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    seed = _resolve_seed(args, cfg)
    family, dataset = _family(args, cfg), args.dataset
    init = INIT_FLAGS[args.init]
    task1 = load_task1(cfg, dataset)
    for split in ("train", "dev"):
        if split not in task1:
            raise ConfigInvalid(f"datasets.{dataset}.task1 needs a {split} split for training")
    if init == "lm_finetuned":
        if not args.checkpoint:
            raise CheckpointMissing("--init lm-finetuned needs --checkpoint pointing at a pretrain-mlm checkpoint")
        backend = load_backend(family, "lm_finetuned_checkpoint", args.checkpoint)
    else:
        backend = _fresh_backend(cfg, family, dataset, seed)
    out = run_dir(args, cfg, {"family": family, "dataset": dataset, "init": init, "checkpoint": args.checkpoint})
    model = GraderModel(backend, init, dataset, seed=seed, max_length=cfg.max_length, edited_first=cfg.edited_first)
    model.to(pick_device(args.device))
    model, history = train_grader(model, task1["train"], task1["dev"], cfg.train_config(family, seed))
    model.save(out / "grader")
    lines = ["epoch\ttrain_mse\tdev_mse"] + [f"{h['epoch']}\t{h['train_mse']:.6f}\t{h['dev_mse']:.6f}" for h in history]
    (out / "history.tsv").write_text("\n".join(lines) + "\n")
    if history:
        best = min(history, key=lambda h: h["dev_mse"])
        print(f"best epoch {best['epoch']} dev RMSE {best['dev_mse'] ** 0.5:.4f}")
    if "test" in task1:
        test = task1["test"]
        preds = predict_grades(model, test)
        print(f"test RMSE {rmse([p.grade for p in preds], [r.mean_grade for r in test]):.4f}")
    print(f"grader {out / 'grader'}")
    return 0


def cmd_grade(args) -> int:
    cfg = load_config(args.config)
    _resolve_seed(args, cfg)
    model = load_grader(_input(args.model, "model")).to(pick_device(args.device))
    path = _input(args.input)
    records = C.parse_task1_file(path)
    out = run_dir(args, cfg, {"model": str(Path(args.model).resolve()), "input": str(path.resolve())})
    preds = predict_grades(model, records)
    write_predictions(preds, out / "predictions.csv")
    graded = [(p.grade, r.mean_grade) for p, r in zip(preds, records) if r.mean_grade is not None]
    if graded:
        print(f"RMSE {rmse(*zip(*graded)):.4f} over {len(graded)} graded records")
    print(f"predictions {out / 'predictions.csv'}")
    return 0


def cmd_pair(args) -> int:
    cfg = load_config(args.config)
    _resolve_seed(args, cfg)
    model = load_grader(_input(args.model, "model")).to(pick_device(args.device))
    path = _input(args.input)
    pairs = C.parse_task2_file(path)
    eps = cfg.tie_epsilon if args.tie_epsilon is None else args.tie_epsilon
    out = run_dir(args, cfg, {"model": str(Path(args.model).resolve()), "input": str(path.resolve()), "tie_epsilon": eps})
    preds = predict_pair_grades(model, pairs, eps)
    write_pair_predictions([(p.id, p.label) for p in preds], out / "pairs.csv")
    write_pair_grades(preds, out / "pair_grades.csv")
    gold = [(p.label, pair.gold_label) for p, pair in zip(preds, pairs) if pair.gold_label is not None]
    if gold:
        acc = sum(a == b for a, b in gold) / len(gold)
        print(f"accuracy {acc:.4f} over {len(gold)} labelled pairs")
    print(f"pairs {out / 'pairs.csv'}")
    return 0


def cmd_xeval(args) -> int:
    cfg = load_config(args.config)
    seed = _resolve_seed(args, cfg)
    if not args.model:
        raise InputMissing("xeval needs at least one --model")
    models = [load_grader(_input(m, "model")).to(pick_device(args.device)) for m in args.model]
    datasets = [load_bundle(cfg, name) for name in C.DATASETS if name in cfg.datasets]
    if not datasets:
        raise ConfigInvalid("xeval needs at least one entry under datasets")
    eps = cfg.tie_epsilon if args.tie_epsilon is None else args.tie_epsilon
    extra = {"models": [str(Path(m).resolve()) for m in args.model], "tie_epsilon": eps}
    out = run_dir(args, cfg, extra)
    provenance = {"config_hash": config_hash({"config": cfg.as_dict(), **extra}), "seed": seed}
    report = cross_dataset_eval(models, datasets, eps, provenance)
    (out / "report.csv").write_text(render_report(report, "csv"))
    text = render_report(report, "text_table")
    (out / "report.txt").write_text(text)
    print(text, end="")
    return 0


def cmd_attn_report(args) -> int:
    cfg = load_config(args.config)
    _resolve_seed(args, cfg)
    model = load_grader(_input(args.model, "model")).to(pick_device(args.device))
    path = _input(args.input)
    records = C.parse_task1_file(path)
    out = run_dir(args, cfg, {"model": str(Path(args.model).resolve()), "input": str(path.resolve()), "top_k": args.top_k})
    result = summarize_dataset(model, records, args.top_k)
    write_share_csv(result.summaries, out / "shares.csv")
    write_share_csv(result.best, out / "best.csv", "best")
    write_share_csv(result.worst, out / "worst.csv", "worst")
    by_id = {r.id: r for r in records}
    html_dir = out / "html"
    html_dir.mkdir(exist_ok=True)
    for group, summaries in (("best", result.best), ("worst", result.worst)):
        for s in summaries:
            safe = "".join(c if c.isalnum() or c in "-_" else "_" for c in s.record_id)
            (html_dir / f"{group}-{safe}.html").write_text(emit_attention_html(model, by_id[s.record_id]), encoding="utf-8")
    print("mean edited-token attention share per head (final layer, CLS row)")
    print(format_head_means(result))
    print(f"report {out}")
    return 0


def cmd_selftest(args) -> int:
    seed = 0 if args.seed is None else args.seed
    failed = 0
    for result in run_selftest(seed):
        status = "PASS" if result.passed else "FAIL"
        failed += not result.passed
        print(f"{status} {result.name}: {result.detail}")
    return 1 if failed else 0


COMMANDS = {
    "ingest": cmd_ingest,
    "pretrain-mlm": cmd_pretrain_mlm,
    "train": cmd_train,
    "grade": cmd_grade,
    "pair": cmd_pair,
    "xeval": cmd_xeval,
    "attn-report": cmd_attn_report,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON run configuration")
    common.add_argument("--seed", type=int, help="seed for all randomness (default: config seed)")
    common.add_argument("--dataset", choices=C.DATASETS, default="humicroedit")
    common.add_argument("--family", choices=("bert_base_uncased", "roberta_base", "albert_base_v2",
                                             "distilbert_base_uncased", "tiny"))
    common.add_argument("--init", choices=tuple(INIT_FLAGS), default="pretrained")
    common.add_argument("--out", help="parent directory for run outputs")
    common.add_argument("--device", default="auto", help="torch device, e.g. cpu or cuda (default: cuda when available)")
    common.add_argument("--overwrite", action="store_true", help="allow replacing an existing run directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="humorgrade", description="Humor grading of edited headlines.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="parse a dataset file and report its record count")
    p.add_argument("input")
    p.add_argument("--task", type=int, choices=(1, 2), help="force sub-task layout (default: from header)")

    sub.add_parser("pretrain-mlm", parents=[common], help="masked-word fine-tuning on edited headlines")

    p = sub.add_parser("train", parents=[common], help="train the grade regressor")
    p.add_argument("--checkpoint", help="LM fine-tuned checkpoint for --init lm-finetuned")

    for name, help_text in (("grade", "grade a sub-task-1 file"), ("pair", "label a sub-task-2 file zero-shot"),
                            ("attn-report", "CLS attention report over a graded file")):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--model", required=True, help="trained grader directory")
        p.add_argument("--input", required=True)
        if name == "pair":
            p.add_argument("--tie-epsilon", type=float)
        if name == "attn-report":
            p.add_argument("--top-k", type=int, default=5)

    p = sub.add_parser("xeval", parents=[common], help="cross-dataset evaluation report")
    p.add_argument("--model", action="append", default=[], help="trained grader directory (repeatable)")
    p.add_argument("--tie-epsilon", type=float)

    sub.add_parser("selftest", parents=[common], help="run built-in checks without external assets")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    needs_out = args.command not in ("ingest", "selftest")
    try:
        if needs_out and not args.out:
            raise ConfigInvalid(f"{args.command} needs --out")
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[args.command](args)
    except HumorGradeError as exc:
        message = " ".join(str(exc).split())
        print(f"{exc.category}: {message}", file=sys.stderr)
        return 2 if isinstance(exc, (ConfigInvalid, InputMissing)) else 1


if __name__ == "__main__":
    sys.exit(main())
