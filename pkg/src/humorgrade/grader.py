"""Humor-grade regression on the pooled encoder output."""

from __future__ import annotations

import copy
import csv
import json
import logging
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import torch
from safetensors.torch import load_file, save_file
from torch import nn

from .backend import GRADING_MAX_LENGTH, EncoderBackend, load_checkpoint
from .corpus import MAX_GRADE, MIN_GRADE, DatasetSplit, HeadlineRecord
from .encoding import EncodedPair, encode_record
from .errors import CheckpointMissing, DivergedLoss, MissingGrades, TruncationDroppedEdit, TruncationWarning

logger = logging.getLogger(__name__)

INIT_PROVENANCES = ("pretrained", "lm_finetuned")


@dataclass(frozen=True)
class GradePrediction:
    record_id: str
    grade: float


@dataclass
class TrainConfig:
    epochs: int = 3
    batch: int = 32
    learn_rate: float = 2e-5
    seed: int = 0
    early_stop_patience: int = 2
    max_length: int = GRADING_MAX_LENGTH


def clamp_grade(value: float) -> float:
    return min(MAX_GRADE, max(MIN_GRADE, value))


class GraderModel(nn.Module):
    """Encoder backend plus a single affine unit over its pooled output."""

    def __init__(
        self,
        backend: EncoderBackend,
        init_provenance: str | None = None,
        train_dataset: str = "humicroedit",
        seed: int = 0,
        max_length: int = GRADING_MAX_LENGTH,
        edited_first: bool = False,
    ):
        super().__init__()
        if init_provenance is None:
            init_provenance = "lm_finetuned" if backend.provenance == "lm_finetuned_checkpoint" else "pretrained"
        if init_provenance not in INIT_PROVENANCES:
            raise ValueError(f"init_provenance must be one of {INIT_PROVENANCES}")
        self.backend = backend
        self.init_provenance = init_provenance
        self.train_dataset = train_dataset
        self.max_length = max_length
        self.edited_first = edited_first
        self.head = nn.Linear(backend.spec.hidden_size, 1)
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            self.head.weight.copy_(torch.randn(self.head.weight.shape, generator=gen) * 0.02)
            self.head.bias.zero_()

    @property
    def family(self) -> str:
        return self.backend.family

    @property
    def lm_finetuned(self) -> bool:
        return self.init_provenance == "lm_finetuned"

    def forward(self, input_ids, attention_mask, token_type_ids=None):
        out = self.backend(input_ids, attention_mask, token_type_ids)
        return self.head(out.pooled).squeeze(-1)

    def encode(self, record: HeadlineRecord, allow_dropped_edit: bool = False) -> EncodedPair:
        return encode_record(record, self.backend, self.max_length, self.edited_first, allow_dropped_edit)

    def batch_tensors(self, pairs: Sequence[EncodedPair]) -> dict[str, torch.Tensor]:
        batch = self.backend.collate(pairs)
        return {k: v.to(self.backend.device) for k, v in batch.items()}

    @torch.no_grad()
    def raw_grades(self, pairs: Sequence[EncodedPair], batch_size: int = 64) -> list[float]:
        was_training = self.training
        self.eval()
        out = []
        try:
            for start in range(0, len(pairs), batch_size):
                out.extend(self(**self.batch_tensors(pairs[start:start + batch_size])).tolist())
        finally:
            self.train(was_training)
        return out

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        self.backend.save(path / "backend")
        state = {k: v.detach().cpu().contiguous() for k, v in self.head.state_dict().items()}
        save_file(state, str(path / "head.safetensors"))
        meta = {
            "family": self.family,
            "init_provenance": self.init_provenance,
            "train_dataset": self.train_dataset,
            "max_length": self.max_length,
            "edited_first": self.edited_first,
        }
        (path / "grader.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return path


def load_grader(path: str | Path) -> GraderModel:
    path = Path(path)
    if not (path / "grader.json").is_file():
        raise CheckpointMissing(f"{path}: not a grader checkpoint (grader.json missing)")
    meta = json.loads((path / "grader.json").read_text())
    backend = load_checkpoint(path / "backend")
    model = GraderModel(
        backend, meta["init_provenance"], meta["train_dataset"],
        max_length=meta["max_length"], edited_first=meta["edited_first"],
    )
    model.head.load_state_dict(load_file(str(path / "head.safetensors")))
    model.eval()
    return model


def _require_grades(records, name: str) -> None:
    missing = [r.id for r in records if r.mean_grade is None]
    if missing:
        raise MissingGrades(f"{len(missing)} {name} records lack a mean grade (first: {missing[0]})")


def _encode_for_training(model: GraderModel, records) -> tuple[list[EncodedPair], torch.Tensor]:
    pairs, targets = [], []
    for r in records:
        try:
            pairs.append(model.encode(r))
        except TruncationDroppedEdit as exc:
            logger.warning("skipping %s: %s", r.id, exc)
            continue
        targets.append(r.mean_grade)
    return pairs, torch.tensor(targets, dtype=torch.float32)


def _mse(model: GraderModel, pairs, targets: torch.Tensor) -> float:
    preds = torch.tensor(model.raw_grades(pairs), dtype=torch.float64)
    return float(((preds - targets.double()) ** 2).mean())


def train_grader(
    model: GraderModel,
    train: DatasetSplit | Sequence[HeadlineRecord],
    dev: DatasetSplit | Sequence[HeadlineRecord],
    config: TrainConfig,
) -> tuple[GraderModel, list[dict]]:
    """Fit the grader by MSE with Adam and keep the weights with the lowest dev MSE.

    The history starts with an epoch-0 entry for the untrained model, which
    is itself a selection candidate. Training stops early once dev MSE has
    not improved for ``early_stop_patience`` epochs.
    """
    train_records, dev_records = list(train), list(dev)
    _require_grades(train_records, "train")
    _require_grades(dev_records, "dev")
    if config.epochs <= 0:
        return model, []
    if model.max_length != config.max_length:
        model.max_length = config.max_length

    torch.manual_seed(config.seed)
    gen = torch.Generator().manual_seed(config.seed)
    train_pairs, train_y = _encode_for_training(model, train_records)
    dev_pairs, dev_y = _encode_for_training(model, dev_records)
    if not train_pairs or not dev_pairs:
        raise MissingGrades("no usable train or dev records after encoding")

    history = [{"epoch": 0, "train_mse": _mse(model, train_pairs, train_y), "dev_mse": _mse(model, dev_pairs, dev_y)}]
    best_dev = history[0]["dev_mse"]
    best_state = copy.deepcopy(model.state_dict())
    stale = 0
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learn_rate)

    for epoch in range(1, config.epochs + 1):
        model.train()
        order = torch.randperm(len(train_pairs), generator=gen).tolist()
        total, count = 0.0, 0
        for start in range(0, len(order), config.batch):
            idx = order[start:start + config.batch]
            batch = model.batch_tensors([train_pairs[i] for i in idx])
            target = train_y[idx].to(model.backend.device)
            loss = nn.functional.mse_loss(model(**batch), target)
            if not torch.isfinite(loss):
                raise DivergedLoss(f"non-finite grader loss at epoch {epoch}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += loss.item() * len(idx)
            count += len(idx)
        dev_mse = _mse(model, dev_pairs, dev_y)
        if not math.isfinite(dev_mse):
            raise DivergedLoss(f"non-finite dev MSE at epoch {epoch}")
        history.append({"epoch": epoch, "train_mse": total / count, "dev_mse": dev_mse})
        logger.info("epoch %d train mse %.4f dev mse %.4f", epoch, total / count, dev_mse)
        if dev_mse < best_dev:
            best_dev, stale = dev_mse, 0
            best_state = copy.deepcopy(model.state_dict())
        else:
            stale += 1
            if stale >= config.early_stop_patience:
                logger.info("early stop after epoch %d", epoch)
                break

    model.load_state_dict(best_state)
    model.eval()
    return model, history


def predict_grades(model: GraderModel, records: Sequence[HeadlineRecord], batch_size: int = 64) -> list[GradePrediction]:
    """Clamped grades for ``records`` in input order."""
    pairs = []
    for r in records:
        try:
            pairs.append(model.encode(r))
        except TruncationDroppedEdit as exc:
            warnings.warn(str(exc), TruncationWarning, stacklevel=2)
            pairs.append(model.encode(r, allow_dropped_edit=True))
    raw = model.raw_grades(pairs, batch_size)
    return [GradePrediction(r.id, clamp_grade(g)) for r, g in zip(records, raw)]


def write_predictions(preds: Sequence[GradePrediction], path: str | Path) -> None:
    # repr keeps floats exact so pair labels can be re-derived from the file
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "pred"])
        for p in preds:
            w.writerow([p.record_id, repr(float(p.grade))])


def read_predictions(path: str | Path) -> list[GradePrediction]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [GradePrediction(row["id"], float(row["pred"])) for row in reader]
