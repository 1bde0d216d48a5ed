"""Run configuration files and dataset assembly for the CLI.

A config is a YAML (or JSON) mapping. Every key is optional::

    family: tiny
    seed: 0
    max_length: 128
    tie_epsilon: 0.0
    edited_first: false
    datasets:
      humicroedit:
        task1: {train: h1-train.csv, dev: h1-dev.csv, test: h1-test.csv}
        task2: {train: h2-train.csv, dev: h2-dev.csv, test: h2-test.csv}
      funlines:
        task1: {all: funlines-task1.csv, counts: [5274, 1322, 1652], split_seed: 2020}
        task2: {all: funlines-task2.csv}
    tiny: {num_layers: 2, num_heads: 4, hidden_size: 64, max_positions: 128, dropout: 0.1, min_freq: 2}
    train: {epochs: 10, batch: 8, learn_rate: 0.001, early_stop_patience: 2}
    mlm: {epochs: 3, batch: 16, learn_rate: 5.0e-5, max_len: 256, mask_rate: 0.15}
    pretrained_sources: {bert_base_uncased: /models/bert-base-uncased}

Relative paths resolve against the config file's directory.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from . import corpus as C
from .backend import FAMILIES, tiny_spec
from .errors import ConfigInvalid, InputMissing, MissingSplit
from .evalreport import CorpusBundle
from .grader import TrainConfig
from .mlm_finetune import MLMConfig

logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = {
    "family", "seed", "max_length", "tie_epsilon", "edited_first", "datasets",
    "tiny", "train", "mlm", "pretrained_sources",
}
TINY_KEYS = {"num_layers", "num_heads", "hidden_size", "max_positions", "dropout", "min_freq"}

# Desk-scale defaults for the tiny encoder; the published families keep TrainConfig's.
TINY_TRAIN = {"epochs": 10, "batch": 8, "learn_rate": 1e-3, "early_stop_patience": 2}
TINY_MLM = {"epochs": 3, "batch": 16, "learn_rate": 1e-3, "max_len": 128}


@dataclass
class RunConfig:
    family: str = "tiny"
    seed: int = 0
    max_length: int = 128
    tie_epsilon: float = 0.0
    edited_first: bool = False
    datasets: dict = field(default_factory=dict)
    tiny: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    mlm: dict = field(default_factory=dict)
    pretrained_sources: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "base_dir"}

    def train_config(self, family: str, seed: int) -> TrainConfig:
        values = dict(TINY_TRAIN) if family == "tiny" else {}
        values.update(self.train)
        values.update(seed=seed, max_length=self.max_length)
        return _build(TrainConfig, values, "train")

    def mlm_config(self, family: str, seed: int) -> MLMConfig:
        values = dict(TINY_MLM) if family == "tiny" else {}
        values.update(self.mlm)
        if "corruption_split" in values:
            values["corruption_split"] = tuple(values["corruption_split"])
        values["seed"] = seed
        return _build(MLMConfig, values, "mlm")

    def tiny_spec(self):
        opts = {k: v for k, v in self.tiny.items() if k != "min_freq"}
        try:
            return tiny_spec(**opts)
        except (TypeError, ValueError) as exc:
            raise ConfigInvalid(f"tiny: {exc}") from exc

    @property
    def min_freq(self) -> int:
        return int(self.tiny.get("min_freq", 2))

    def path(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p


def _build(cls, values: dict, section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigInvalid(f"{section}: unknown keys {sorted(unknown)}")
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigInvalid(f"{section}: {exc}") from exc


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise InputMissing(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"{path}: not valid YAML/JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigInvalid(f"{path}: top level must be a mapping")
    unknown = set(raw) - TOP_LEVEL_KEYS
    if unknown:
        raise ConfigInvalid(f"{path}: unknown keys {sorted(unknown)}")
    cfg = RunConfig(**raw, base_dir=path.parent.resolve())
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.family not in FAMILIES:
        raise ConfigInvalid(f"family must be one of {FAMILIES}, got {cfg.family!r}")
    for name in ("datasets", "tiny", "train", "mlm", "pretrained_sources"):
        if not isinstance(getattr(cfg, name), dict):
            raise ConfigInvalid(f"{name} must be a mapping")
    if not isinstance(cfg.seed, int) or not isinstance(cfg.max_length, int) or cfg.max_length < 8:
        raise ConfigInvalid("seed must be an integer and max_length an integer >= 8")
    if not isinstance(cfg.tie_epsilon, (int, float)) or cfg.tie_epsilon < 0:
        raise ConfigInvalid("tie_epsilon must be a non-negative number")
    unknown = set(cfg.tiny) - TINY_KEYS
    if unknown:
        raise ConfigInvalid(f"tiny: unknown keys {sorted(unknown)}")
    for name, ds in cfg.datasets.items():
        if name not in C.DATASETS:
            raise ConfigInvalid(f"datasets: unknown corpus {name!r}")
        if not isinstance(ds, dict) or set(ds) - {"task1", "task2"}:
            raise ConfigInvalid(f"datasets.{name}: expected task1/task2 mappings")
        for task, files in ds.items():
            if not isinstance(files, dict):
                raise ConfigInvalid(f"datasets.{name}.{task} must be a mapping")
            allowed = {"train", "dev", "test", "all", "counts", "split_seed"}
            if set(files) - allowed:
                raise ConfigInvalid(f"datasets.{name}.{task}: unknown keys {sorted(set(files) - allowed)}")
    cfg.train_config(cfg.family, cfg.seed)
    cfg.mlm_config(cfg.family, cfg.seed)
    cfg.tiny_spec()


def _existing(cfg: RunConfig, value: str) -> Path:
    p = cfg.path(value)
    if not p.is_file():
        raise InputMissing(f"input file not found: {p}")
    return p


def load_task1(cfg: RunConfig, dataset: str) -> dict[str, list[C.HeadlineRecord]]:
    """Task-1 splits of ``dataset``, regenerating them from ``all`` when needed."""
    files = cfg.datasets.get(dataset, {}).get("task1")
    if not files:
        raise MissingSplit(f"config has no datasets.{dataset}.task1")
    if "all" in files:
        records = C.parse_task1_file(_existing(cfg, files["all"]))
        counts = tuple(files.get("counts") or C.proportional_counts(len(records)))
        if len(counts) != 3:
            raise ConfigInvalid(f"datasets.{dataset}.task1.counts needs three integers")
        splits = C.make_splits(records, counts, files.get("split_seed", C.DEFAULT_SPLIT_SEED), dataset)
        return {s.name: s.records for s in splits}
    out = {name: C.parse_task1_file(_existing(cfg, files[name])) for name in C.SPLIT_NAMES if name in files}
    ids = [r.id for split in out.values() for r in split]
    if len(ids) != len(set(ids)):
        raise ConfigInvalid(f"datasets.{dataset}.task1: record ids shared between splits")
    return out


def load_task2(cfg: RunConfig, dataset: str) -> dict[str, list[C.PairRecord]]:
    files = cfg.datasets.get(dataset, {}).get("task2") or {}
    if "all" in files:
        return {"test": C.parse_task2_file(_existing(cfg, files["all"]))}
    return {name: C.parse_task2_file(_existing(cfg, files[name])) for name in C.SPLIT_NAMES if name in files}


def load_bundle(cfg: RunConfig, dataset: str) -> CorpusBundle:
    return CorpusBundle(dataset, load_task1(cfg, dataset), load_task2(cfg, dataset))
