"""Self-contained checks runnable without any downloaded data or weights."""

from __future__ import annotations

import random
import statistics
from dataclasses import dataclass
from typing import Callable

import numpy as np
import torch

from . import synthetic
from .attention_lens import cls_attention, edited_attention_share
from .backend import TinyBackend, TinyVocab, load_backend, tiny_spec
from .corpus import make_splits
from .evalreport import categorical_accuracy, rmse
from .grader import GraderModel, TrainConfig, predict_grades, train_grader
from .mlm_finetune import build_masking_plan
from .oracles import accuracy_loop, rmse_loop, share_loop
from .pairwise import pair_label, predict_pair_grades


class SelfTestFailure(Exception):
    pass


def _expect(condition, message: str) -> None:
    if not condition:
        raise SelfTestFailure(message)


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str


def check_metrics(seed: int = 0) -> str:
    rng = random.Random(seed)
    worst = 0.0
    for _ in range(100):
        n = rng.randint(1, 1000)
        pred = [rng.uniform(-1, 4) for _ in range(n)]
        truth = [rng.uniform(0, 3) for _ in range(n)]
        worst = max(worst, abs(rmse(pred, truth) - rmse_loop(pred, truth)))
        labels = [rng.randint(0, 2) for _ in range(n)]
        gold = [rng.randint(0, 2) for _ in range(n)]
        worst = max(worst, abs(categorical_accuracy(labels, gold) - accuracy_loop(labels, gold)))
    _expect(worst <= 1e-12, f"max deviation {worst:.3e}")
    return f"max deviation {worst:.1e}"


def check_masking(seed: int = 0) -> str:
    rng = np.random.default_rng(seed)
    special = (0, 1, 2, 3, 4)
    eligible = targets = 0
    for _ in range(4000):
        ids = [2] + [int(t) for t in rng.integers(5, 500, size=30)] + [3]
        plan = build_masking_plan(ids, 0.15, rng=rng, special_ids=special, mask_token_id=4, vocab_size=500)
        corrupted, _ = plan.apply(ids)
        outside = [i for i in range(len(ids)) if i not in plan.target_positions and corrupted[i] != ids[i]]
        _expect(not outside, f"corruption outside targets at {outside}")
        eligible += 30
        targets += len(plan.target_positions)
    frac = targets / eligible
    _expect(0.145 <= frac <= 0.155, f"target fraction {frac:.4f}")
    return f"target fraction {frac:.4f} over {eligible} positions"


def _random_tiny_grader(seed: int) -> GraderModel:
    texts = [r.edited for r in synthetic.make_records(200, seed)] + [r.original for r in synthetic.make_records(200, seed)]
    return GraderModel(load_backend("tiny", "random_init", corpus=texts, seed=seed), seed=seed)


def spread_grader(model: GraderModel, probe_records) -> GraderModel:
    """Stretch an untrained head and centre its outputs inside the grade range.

    A freshly initialised head gives nearly constant grades, so without this
    almost every pair would be a tie and the checks would be vacuous.
    """
    probe = [model.encode(r) for r in probe_records]
    with torch.no_grad():
        model.head.weight.mul_(50.0)
        raw = model.raw_grades(probe)
        model.head.bias.sub_(sum(raw) / len(raw) - 1.5)
    return model


def check_pairwise(seed: int = 0) -> str:
    model = spread_grader(_random_tiny_grader(seed), synthetic.make_records(40, seed + 3))
    pairs = synthetic.make_pairs(200, seed)
    preds = predict_pair_grades(model, pairs)
    _expect(len({p.label for p in preds}) > 1, "every predicted label is identical")
    _expect(all(p.label == pair_label(p.grade_a, p.grade_b) for p in preds), "pair label differs from the label of its grades")
    swapped = predict_pair_grades(model, [type(p)(p.id, p.record_b, p.record_a, None) for p in pairs])
    flip = {0: 0, 1: 2, 2: 1}
    _expect(all(s.label == flip[p.label] for p, s in zip(preds, swapped)), "swapping operands did not mirror the label")
    return f"{len(preds)} pairs consistent and antisymmetric"


def check_attention(seed: int = 0) -> str:
    model = _random_tiny_grader(seed)
    records = synthetic.make_records(16, seed + 7)
    pairs = [model.encode(r) for r in records]
    out = model.backend.encode(pairs, want_attention=True)
    mask = np.array([[1] * len(p.token_ids) + [0] * (out.attentions.shape[-1] - len(p.token_ids)) for p in pairs])
    attn = out.attentions.double().numpy()
    sums = attn.sum(-1)
    valid = mask[:, None, None, :].astype(bool).repeat(attn.shape[1], 1).repeat(attn.shape[2], 2)
    dev = np.abs(sums[valid] - 1.0).max()
    _expect(dev <= 1e-4, f"row sum deviation {dev:.2e}")
    rows, _ = cls_attention(model, pairs)
    worst = 0.0
    for p, r in zip(pairs, rows):
        for h in range(r.shape[0]):
            ours = edited_attention_share(r[h], p.edited_token_positions, p.non_special_positions)
            worst = max(worst, abs(ours - share_loop(list(r[h]), p.edited_token_positions, p.non_special_positions)))
    _expect(worst <= 1e-9, f"share deviation {worst:.2e}")
    grad_err = gradient_check(seed)
    _expect(grad_err < 1e-3, f"gradient check relative error {grad_err:.2e}")
    return f"row sums within {dev:.1e}, shares within {worst:.1e}, gradient rel. error {grad_err:.1e}"


def gradient_check(seed: int = 0, n_checks: int = 20) -> float:
    """Worst relative error between autograd and central differences on the tiny encoder.

    Runs in float64 with dropout off; parameters whose analytic gradient is
    essentially zero (embedding rows of absent tokens) are skipped.
    """
    torch.manual_seed(seed)
    backend = TinyBackend(tiny_spec(vocab_size=30, num_layers=2, num_heads=4, hidden_size=16, dropout=0.0),
                          TinyVocab([f"w{i}" for i in range(25)]))
    backend.double().eval()
    ids = torch.tensor([[2, 7, 9, 11, 3, 12, 14, 3], [2, 8, 10, 3, 13, 3, 0, 0]])
    mask = (ids != 0).long()
    types = torch.tensor([[0, 0, 0, 0, 0, 1, 1, 1], [0, 0, 0, 0, 1, 1, 0, 0]])
    weights = torch.linspace(-1, 1, 16, dtype=torch.float64)

    def loss():
        pooled = backend(ids, mask, types).pooled
        return (pooled * weights).sum() + (pooled ** 2).sum()

    backend.zero_grad()
    loss().backward()
    params = [p for p in backend.parameters() if p.grad is not None]
    gen = torch.Generator().manual_seed(seed)
    worst, checked = 0.0, 0
    while checked < n_checks:
        p = params[int(torch.randint(len(params), (1,), generator=gen))]
        idx = int(torch.randint(p.numel(), (1,), generator=gen))
        analytic = p.grad.view(-1)[idx].item()
        if abs(analytic) < 1e-6:
            continue
        flat = p.data.view(-1)
        orig, h = flat[idx].item(), 1e-6
        with torch.no_grad():
            flat[idx] = orig + h
            up = loss().item()
            flat[idx] = orig - h
            down = loss().item()
            flat[idx] = orig
        numeric = (up - down) / (2 * h)
        worst = max(worst, abs(analytic - numeric) / max(abs(analytic), abs(numeric)))
        checked += 1
    return worst


def run_tiny_end_to_end(seed: int = 0, n_records: int = 500) -> dict:
    """Train the tiny grader on planted-signal data and score it.

    Returns dev RMSE, the constant-mean baseline RMSE and zero-shot pair
    accuracy over non-tie synthetic pairs.
    """
    records = synthetic.make_records(n_records, seed)
    n_dev = n_records * 15 // 100
    train, dev, _ = make_splits(records, (n_records - 2 * n_dev, n_dev, n_dev), seed, "humicroedit")
    corpus = [r.original for r in train] + [r.edited for r in train]
    model = GraderModel(load_backend("tiny", "random_init", corpus=corpus, seed=seed), seed=seed)
    config = TrainConfig(epochs=10, batch=8, learn_rate=1e-3, seed=seed, early_stop_patience=2)
    model, history = train_grader(model, train, dev, config)

    truth = [r.mean_grade for r in dev]
    baseline = rmse([statistics.fmean(r.mean_grade for r in train)] * len(truth), truth)
    dev_rmse = rmse([p.grade for p in predict_grades(model, dev.records)], truth)
    pairs = [p for p in synthetic.make_pairs(300, seed + 1) if p.gold_label != 0]
    preds = predict_pair_grades(model, pairs)
    acc = categorical_accuracy([p.label for p in preds], [p.gold_label for p in pairs])
    return {"dev_rmse": dev_rmse, "baseline_rmse": baseline, "pair_accuracy": acc,
            "history": history, "model": model}


def check_tiny_end_to_end(seed: int = 0) -> str:
    result = run_tiny_end_to_end(seed)
    ratio = result["dev_rmse"] / result["baseline_rmse"]
    _expect(ratio < 0.5, f"dev RMSE {result['dev_rmse']:.3f} is {ratio:.2f} x baseline")
    _expect(result["pair_accuracy"] > 0.8, f"pair accuracy {result['pair_accuracy']:.3f}")
    return f"dev RMSE {result['dev_rmse']:.3f} ({ratio:.2f} x baseline), pair accuracy {result['pair_accuracy']:.3f}"


SUITES: dict[str, Callable[[int], str]] = {
    "metric-oracles": check_metrics,
    "masking-statistics": check_masking,
    "pairwise-consistency": check_pairwise,
    "attention-properties": check_attention,
    "tiny-end-to-end": check_tiny_end_to_end,
}


def run_selftest(seed: int = 0) -> list[SuiteResult]:
    results = []
    for name, fn in SUITES.items():
        try:
            results.append(SuiteResult(name, True, fn(seed)))
        except SelfTestFailure as exc:
            results.append(SuiteResult(name, False, str(exc)))
    return results
