"""Masked-word domain adaptation of an encoder on edited headlines."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F

from .backend import MLM_MAX_LENGTH, EncoderBackend
from .corpus import HeadlineRecord
from .errors import DivergedLoss, EmptyCorpus

logger = logging.getLogger(__name__)

IGNORE_INDEX = -100
DEFAULT_CORRUPTION = (0.8, 0.1, 0.1)


@dataclass(frozen=True)
class MaskingPlan:
    """Which positions are prediction targets and what they are replaced with.

    Targets without an entry in ``corrupted_ids`` keep their original token.
    """

    target_positions: frozenset[int]
    corrupted_ids: dict[int, int]
    mask_rate: float
    corruption_split: tuple[float, float, float]

    def apply(self, token_ids: Sequence[int]) -> tuple[list[int], list[int]]:
        """Return (model input ids, labels) with labels ignored off-target."""
        inputs = list(token_ids)
        labels = [IGNORE_INDEX] * len(inputs)
        for i in self.target_positions:
            labels[i] = token_ids[i]
        for i, tok in self.corrupted_ids.items():
            inputs[i] = tok
        return inputs, labels


def build_masking_plan(
    token_ids: Sequence[int],
    mask_rate: float = 0.15,
    corruption_split: tuple[float, float, float] = DEFAULT_CORRUPTION,
    rng: np.random.Generator | None = None,
    *,
    special_ids: Sequence[int] = (),
    mask_token_id: int,
    vocab_size: int,
) -> MaskingPlan:
    """Select each non-special position with probability ``mask_rate``.

    Selected positions become the mask token, a random non-special token or
    stay unchanged, with probabilities given by ``corruption_split``.
    """
    if not 0.0 < mask_rate <= 1.0:
        raise ValueError(f"mask_rate must lie in (0, 1], got {mask_rate}")
    if len(corruption_split) != 3 or any(p < 0 for p in corruption_split) or abs(sum(corruption_split) - 1.0) > 1e-9:
        raise ValueError(f"corruption_split must be three non-negative probabilities summing to 1: {corruption_split}")
    rng = rng if rng is not None else np.random.default_rng()
    special = set(special_ids)
    eligible = np.array([i for i, t in enumerate(token_ids) if t not in special], dtype=np.int64)
    chosen = eligible[rng.random(len(eligible)) < mask_rate]

    mask_p, random_p, _ = corruption_split
    u = rng.random(len(chosen))
    corrupted = {}
    for pos, draw in zip(chosen.tolist(), u.tolist()):
        if draw < mask_p:
            corrupted[pos] = mask_token_id
        elif draw < mask_p + random_p:
            corrupted[pos] = _random_token(rng, vocab_size, special | {mask_token_id})
    return MaskingPlan(frozenset(chosen.tolist()), corrupted, mask_rate, tuple(corruption_split))


def _random_token(rng: np.random.Generator, vocab_size: int, exclude: set[int]) -> int:
    if vocab_size <= len(exclude):
        raise ValueError("vocabulary has no ordinary tokens to sample")
    while True:
        tok = int(rng.integers(0, vocab_size))
        if tok not in exclude:
            return tok


@dataclass
class MLMConfig:
    epochs: int = 3
    batch: int = 16
    max_len: int = MLM_MAX_LENGTH
    learn_rate: float = 5e-5
    seed: int = 0
    mask_rate: float = 0.15
    corruption_split: tuple[float, float, float] = DEFAULT_CORRUPTION
    weight_decay: float = 0.0


@dataclass
class MLMResult:
    checkpoint: Path
    history: list[tuple[int, float]] = field(default_factory=list)


def edited_corpus(records: Sequence[HeadlineRecord]) -> list[str]:
    """Edited headlines only; originals never enter MLM training."""
    return [r.edited for r in records]


def _special_ids(backend: EncoderBackend) -> set[int]:
    sp = backend.spec.special_token_ids
    ids = {sp.cls, sp.sep, sp.pad, sp.mask}
    tokenizer = getattr(backend, "tokenizer", None)
    if tokenizer is not None:
        ids |= set(tokenizer.all_special_ids)
    return ids


def lm_finetune(
    backend: EncoderBackend,
    corpus: Sequence[str],
    config: MLMConfig,
    out_dir: str | Path,
) -> MLMResult:
    """Train ``backend`` in place by masked-word prediction and save a checkpoint.

    The corpus must consist of edited headlines; the function cannot tell
    originals apart and leaves that to the caller (see :func:`edited_corpus`).
    A fresh masking plan is drawn for every sequence in every epoch.
    """
    if not corpus:
        raise EmptyCorpus("MLM fine-tuning needs at least one headline")
    out_dir = Path(out_dir)
    history: list[tuple[int, float]] = []
    if config.epochs > 0:
        history = _train(backend, corpus, config)
    backend.provenance = "lm_finetuned_checkpoint"
    backend.save(out_dir, provenance="lm_finetuned_checkpoint")
    write_loss_history(history, out_dir / "loss_history.tsv")
    return MLMResult(out_dir, history)


def _train(backend: EncoderBackend, corpus: Sequence[str], config: MLMConfig) -> list[tuple[int, float]]:
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    sp = backend.spec.special_token_ids
    special = _special_ids(backend)
    vocab_size = backend.spec.vocab_size
    encoded = [backend.tokenize(text, max_length=config.max_len) for text in corpus]

    params = [p for p in backend.parameters() if p.requires_grad]
    optimizer = torch.optim.AdamW(params, lr=config.learn_rate, weight_decay=config.weight_decay)
    steps_per_epoch = math.ceil(len(encoded) / config.batch)
    total = max(steps_per_epoch * config.epochs, 1)
    scheduler = torch.optim.lr_scheduler.LambdaLR(optimizer, lambda step: max(0.0, 1.0 - step / total))

    history = []
    backend.train()
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(encoded))
        losses, weights = [], []
        for start in range(0, len(order), config.batch):
            chunk = [encoded[i] for i in order[start:start + config.batch]]
            inputs, labels = [], []
            for tok in chunk:
                plan = build_masking_plan(
                    tok.input_ids, config.mask_rate, config.corruption_split, rng,
                    special_ids=special, mask_token_id=sp.mask, vocab_size=vocab_size,
                )
                x, y = plan.apply(tok.input_ids)
                inputs.append(x)
                labels.append(y)
            batch = backend.collate(inputs)
            label_t = torch.full_like(batch["input_ids"], IGNORE_INDEX)
            for i, y in enumerate(labels):
                label_t[i, : len(y)] = torch.tensor(y)
            n_targets = int((label_t != IGNORE_INDEX).sum())
            if n_targets == 0:
                continue
            batch = {k: v.to(backend.device) for k, v in batch.items()}
            logits = backend.mlm_logits(**batch)
            loss = F.cross_entropy(
                logits.view(-1, logits.size(-1)), label_t.to(backend.device).view(-1), ignore_index=IGNORE_INDEX
            )
            if not torch.isfinite(loss):
                raise DivergedLoss(f"non-finite MLM loss at epoch {epoch}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            scheduler.step()
            losses.append(loss.item() * n_targets)
            weights.append(n_targets)
        mean_loss = sum(losses) / sum(weights) if weights else float("nan")
        history.append((epoch, mean_loss))
        logger.info("mlm epoch %d mean loss %.4f", epoch, mean_loss)
    backend.eval()
    return history


def write_loss_history(history: Sequence[tuple[int, float]], path: str | Path) -> None:
    lines = ["epoch\tmean_loss"] + [f"{e}\t{loss:.6f}" for e, loss in history]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
