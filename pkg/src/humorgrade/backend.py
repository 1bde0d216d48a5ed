"""Encoder backends behind one interface.

Two implementations share :class:`EncoderBackend`:

* :class:`TinyBackend`, a small post-LayerNorm transformer encoder with a
  whitespace tokenizer. It needs no downloaded assets and is what the
  desk-scale tests train.
* :class:`HFBackend`, an adapter over the Hugging Face masked-LM models for
  the four published base families.

Both expose tokenization with character alignment, pooled output, token
states, final attentions and masked-token logits.
"""

from __future__ import annotations

import collections
import hashlib
import json
import logging
import math
import os
import re
import warnings
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import torch
from safetensors.torch import load_file, save_file
from torch import nn

from .errors import CheckpointMissing, UnsupportedCombination

logger = logging.getLogger(__name__)

FAMILIES = ("bert_base_uncased", "roberta_base", "albert_base_v2", "distilbert_base_uncased", "tiny")
WEIGHT_KINDS = ("published_pretrained", "lm_finetuned_checkpoint", "random_init")

HF_MODEL_NAMES = {
    "bert_base_uncased": "bert-base-uncased",
    "roberta_base": "roberta-base",
    "albert_base_v2": "albert-base-v2",
    "distilbert_base_uncased": "distilbert-base-uncased",
}
# Families whose models take segment (token type) embeddings.
USES_TOKEN_TYPES = {"bert_base_uncased", "albert_base_v2", "tiny"}

CACHE_ENV = "HUMORGRADE_CACHE"
GRADING_MAX_LENGTH = 128
MLM_MAX_LENGTH = 256

MANIFEST_NAME = "manifest.txt"


@dataclass(frozen=True)
class SpecialTokens:
    cls: int
    sep: int
    pad: int
    mask: int


@dataclass(frozen=True)
class BackendSpec:
    family: str
    num_layers: int
    num_heads: int
    hidden_size: int
    max_positions: int
    special_token_ids: SpecialTokens
    vocab_size: int = 0
    intermediate_size: int = 0
    dropout: float = 0.1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.hidden_size % self.num_heads:
            raise ValueError(f"num_heads {self.num_heads} must divide hidden_size {self.hidden_size}")
        if self.family == "tiny" and (self.num_layers < 1 or self.num_heads < 2):
            raise ValueError("tiny backend needs at least 1 layer and 2 heads")

    @property
    def uses_token_types(self) -> bool:
        return self.family in USES_TOKEN_TYPES

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BackendSpec":
        d = dict(d)
        d["special_token_ids"] = SpecialTokens(**d["special_token_ids"])
        return cls(**d)


# Public configurations of the base variants.
PUBLISHED_SPECS = {
    "bert_base_uncased": BackendSpec("bert_base_uncased", 12, 12, 768, 512, SpecialTokens(101, 102, 0, 103), 30522, 3072),
    "roberta_base": BackendSpec("roberta_base", 12, 12, 768, 514, SpecialTokens(0, 2, 1, 50264), 50265, 3072),
    "albert_base_v2": BackendSpec("albert_base_v2", 12, 12, 768, 512, SpecialTokens(2, 3, 0, 4), 30000, 3072),
    "distilbert_base_uncased": BackendSpec("distilbert_base_uncased", 6, 12, 768, 512, SpecialTokens(101, 102, 0, 103), 30522, 3072),
}


def tiny_spec(vocab_size: int = 5, num_layers: int = 2, num_heads: int = 4, hidden_size: int = 64,
              max_positions: int = 128, dropout: float = 0.1) -> BackendSpec:
    return BackendSpec(
        "tiny", num_layers, num_heads, hidden_size, max_positions,
        SpecialTokens(cls=TinyVocab.CLS, sep=TinyVocab.SEP, pad=TinyVocab.PAD, mask=TinyVocab.MASK),
        vocab_size=vocab_size, intermediate_size=4 * hidden_size, dropout=dropout,
    )


@dataclass
class Tokenized:
    """One tokenized input with its segment layout and character alignment.

    ``sequence_ids`` is None for special tokens and 0/1 for the segment a
    token came from. ``offsets`` holds the character span of each token in
    its own segment text (None for special tokens).
    """

    input_ids: list[int]
    token_type_ids: list[int]
    sequence_ids: list[int | None]
    offsets: list[tuple[int, int] | None]
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.input_ids)

    def positions_in_span(self, segment: int, start: int, end: int) -> list[int]:
        """Token positions of ``segment`` whose character span overlaps [start, end)."""
        out = []
        for i, (seq, off) in enumerate(zip(self.sequence_ids, self.offsets)):
            if seq != segment or off is None:
                continue
            s, e = off
            if s < end and e > start and e > s:
                out.append(i)
        return out


@dataclass
class EncoderOutput:
    """Batched encoder outputs.

    ``attentions`` has shape [batch, layers, heads, seq, seq] when requested.
    """

    pooled: torch.Tensor
    token_states: torch.Tensor
    attentions: torch.Tensor | None = None


# -- tiny tokenizer ------------------------------------------------------------

_WS_TOKEN = re.compile(r"\S+")


class TinyVocab:
    PAD, UNK, CLS, SEP, MASK = range(5)
    SPECIALS = ("[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]")

    def __init__(self, words: Sequence[str] = ()):
        self.tokens = list(self.SPECIALS) + [w for w in words if w not in self.SPECIALS]
        self.index = {t: i for i, t in enumerate(self.tokens)}

    @classmethod
    def build(cls, texts: Iterable[str], min_freq: int = 2) -> "TinyVocab":
        counts = collections.Counter(tok for text in texts for tok in whitespace_tokens(text))
        # sorted for a vocabulary independent of corpus order
        words = sorted(w for w, c in counts.items() if c >= min_freq)
        return cls(words)

    def __len__(self) -> int:
        return len(self.tokens)

    def id(self, token: str) -> int:
        return self.index.get(token, self.UNK)

    def sha256(self) -> str:
        return hashlib.sha256("\n".join(self.tokens).encode("utf-8")).hexdigest()

    def save(self, path: Path) -> None:
        path.write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "TinyVocab":
        tokens = path.read_text(encoding="utf-8").split("\n")
        if tokens and tokens[-1] == "":
            tokens.pop()
        if tuple(tokens[:5]) != cls.SPECIALS:
            raise ValueError(f"{path}: vocabulary must start with the special tokens")
        return cls(tokens[5:])


def whitespace_tokens(text: str) -> list[str]:
    return [m.group(0).lower() for m in _WS_TOKEN.finditer(text)]


def _whitespace_spans(text: str) -> list[tuple[str, int, int]]:
    return [(m.group(0).lower(), m.start(), m.end()) for m in _WS_TOKEN.finditer(text)]


def truncate_pair(len_a: int, len_b: int, budget: int) -> tuple[int, int]:
    """Longest-first truncation: trim the tail of the longer segment until it fits."""
    while len_a + len_b > budget:
        if len_a >= len_b and len_a > 0:
            len_a -= 1
        elif len_b > 0:
            len_b -= 1
        else:
            break
    return len_a, len_b


# -- tiny encoder ----------------------------------------------------------------


class _SelfAttention(nn.Module):
    def __init__(self, hidden: int, heads: int, dropout: float):
        super().__init__()
        self.heads = heads
        self.head_dim = hidden // heads
        self.qkv = nn.Linear(hidden, 3 * hidden)
        self.out = nn.Linear(hidden, hidden)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x, key_bias):
        b, t, h = x.shape
        q, k, v = self.qkv(x).view(b, t, 3, self.heads, self.head_dim).permute(2, 0, 3, 1, 4)
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.head_dim) + key_bias
        probs = scores.softmax(dim=-1)
        ctx = self.dropout(probs) @ v
        return self.out(ctx.transpose(1, 2).reshape(b, t, h)), probs


class _Layer(nn.Module):
    def __init__(self, hidden: int, heads: int, intermediate: int, dropout: float):
        super().__init__()
        self.attn = _SelfAttention(hidden, heads, dropout)
        self.ln1 = nn.LayerNorm(hidden)
        self.ffn = nn.Sequential(nn.Linear(hidden, intermediate), nn.GELU(), nn.Linear(intermediate, hidden))
        self.ln2 = nn.LayerNorm(hidden)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x, key_bias):
        a, probs = self.attn(x, key_bias)
        x = self.ln1(x + self.dropout(a))
        x = self.ln2(x + self.dropout(self.ffn(x)))
        return x, probs


class TinyEncoder(nn.Module):
    def __init__(self, spec: BackendSpec):
        super().__init__()
        h = spec.hidden_size
        self.word = nn.Embedding(spec.vocab_size, h, padding_idx=spec.special_token_ids.pad)
        self.position = nn.Embedding(spec.max_positions, h)
        self.token_type = nn.Embedding(2, h)
        self.ln = nn.LayerNorm(h)
        self.dropout = nn.Dropout(spec.dropout)
        self.layers = nn.ModuleList(
            _Layer(h, spec.num_heads, spec.intermediate_size or 4 * h, spec.dropout) for _ in range(spec.num_layers)
        )
        self.mlm_transform = nn.Sequential(nn.Linear(h, h), nn.GELU(), nn.LayerNorm(h))
        self.mlm_bias = nn.Parameter(torch.zeros(spec.vocab_size))
        self.apply(self._init)

    @staticmethod
    def _init(module):
        if isinstance(module, (nn.Linear, nn.Embedding)):
            nn.init.normal_(module.weight, std=0.02)
        if isinstance(module, nn.Linear) and module.bias is not None:
            nn.init.zeros_(module.bias)

    def forward(self, input_ids, attention_mask, token_type_ids=None):
        b, t = input_ids.shape
        pos = torch.arange(t, device=input_ids.device).unsqueeze(0)
        if token_type_ids is None:
            token_type_ids = torch.zeros_like(input_ids)
        x = self.word(input_ids) + self.position(pos) + self.token_type(token_type_ids)
        x = self.dropout(self.ln(x))
        key_bias = torch.zeros(b, 1, 1, t, dtype=x.dtype, device=x.device)
        key_bias = key_bias.masked_fill(attention_mask[:, None, None, :] == 0, torch.finfo(x.dtype).min)
        attentions = []
        for layer in self.layers:
            x, probs = layer(x, key_bias)
            attentions.append(probs)
        return x, torch.stack(attentions, dim=1)

    def mlm_logits(self, hidden):
        return self.mlm_transform(hidden) @ self.word.weight.T + self.mlm_bias


# -- backends ------------------------------------------------------------------------


def _ids_and_types(item) -> tuple[list[int], list[int]]:
    if isinstance(item, Tokenized):
        return item.input_ids, item.token_type_ids
    if hasattr(item, "token_ids"):
        return list(item.token_ids), list(item.segment_ids)
    return list(item), [0] * len(item)


class EncoderBackend(nn.Module):
    """Common surface of all encoder backends."""

    spec: BackendSpec
    provenance: str

    @property
    def family(self) -> str:
        return self.spec.family

    def tokenize(self, text_a: str, text_b: str | None = None, max_length: int | None = None) -> Tokenized:
        raise NotImplementedError

    def forward(self, input_ids, attention_mask, token_type_ids=None, want_attention: bool = False) -> EncoderOutput:
        raise NotImplementedError

    def mlm_logits(self, input_ids, attention_mask, token_type_ids=None) -> torch.Tensor:
        raise NotImplementedError

    def convert_ids_to_tokens(self, ids: Sequence[int]) -> list[str]:
        raise NotImplementedError

    def vocab_hash(self) -> str:
        raise NotImplementedError

    def save(self, path: str | Path, provenance: str | None = None) -> Path:
        raise NotImplementedError

    @property
    def device(self) -> torch.device:
        return next(self.parameters()).device

    def collate(self, items: Sequence[Tokenized | Sequence[int]]) -> dict[str, torch.Tensor]:
        """Right-pad a batch and build the attention mask."""
        pad = self.spec.special_token_ids.pad
        seqs, types = zip(*(_ids_and_types(it) for it in items)) if items else ((), ())
        width = max((len(s) for s in seqs), default=0)
        ids = torch.full((len(seqs), width), pad, dtype=torch.long)
        tt = torch.zeros((len(seqs), width), dtype=torch.long)
        mask = torch.zeros((len(seqs), width), dtype=torch.long)
        for i, (s, t) in enumerate(zip(seqs, types)):
            ids[i, : len(s)] = torch.tensor(s, dtype=torch.long)
            tt[i, : len(t)] = torch.tensor(t, dtype=torch.long)
            mask[i, : len(s)] = 1
        batch = {"input_ids": ids, "attention_mask": mask}
        if self.spec.uses_token_types:
            batch["token_type_ids"] = tt
        return batch

    @torch.no_grad()
    def encode(self, items: Sequence[Tokenized | Sequence[int]], want_attention: bool = False) -> EncoderOutput:
        """Inference-mode forward pass over a batch of token sequences."""
        was_training = self.training
        self.eval()
        try:
            batch = {k: v.to(self.device) for k, v in self.collate(items).items()}
            return self(**batch, want_attention=want_attention)
        finally:
            self.train(was_training)

    @torch.no_grad()
    def mlm_scores(self, items: Sequence[Tokenized | Sequence[int]], masked_positions: Sequence[Sequence[int]]):
        """Vocabulary logits at each requested position, one [n_i, vocab] tensor per item."""
        was_training = self.training
        self.eval()
        try:
            batch = {k: v.to(self.device) for k, v in self.collate(items).items()}
            logits = self.mlm_logits(**batch)
        finally:
            self.train(was_training)
        return [logits[i, list(pos)] for i, pos in enumerate(masked_positions)]

    def _write_manifest(self, path: Path, provenance: str) -> None:
        lines = [
            f"family: {self.family}",
            f"provenance: {provenance}",
            f"vocab_sha256: {self.vocab_hash()}",
            f"created: {datetime.now(timezone.utc).isoformat(timespec='seconds')}",
        ]
        (path / MANIFEST_NAME).write_text("\n".join(lines) + "\n", encoding="utf-8")


class TinyBackend(EncoderBackend):
    def __init__(self, spec: BackendSpec, vocab: TinyVocab, provenance: str = "random_init"):
        super().__init__()
        if spec.vocab_size != len(vocab):
            spec = replace(spec, vocab_size=len(vocab))
        self.spec = spec
        self.vocab = vocab
        self.provenance = provenance
        self.encoder = TinyEncoder(spec)

    def tokenize(self, text_a, text_b=None, max_length=None):
        max_length = min(max_length or self.spec.max_positions, self.spec.max_positions)
        a = _whitespace_spans(text_a)
        b = _whitespace_spans(text_b) if text_b is not None else []
        n_special = 3 if text_b is not None else 2
        la, lb = truncate_pair(len(a), len(b), max(max_length - n_special, 0))
        truncated = (la, lb) != (len(a), len(b))
        sp = self.spec.special_token_ids

        ids, types, seqs, offs = [sp.cls], [0], [None], [None]
        for tok, s, e in a[:la]:
            ids.append(self.vocab.id(tok)); types.append(0); seqs.append(0); offs.append((s, e))
        ids.append(sp.sep); types.append(0); seqs.append(None); offs.append(None)
        if text_b is not None:
            for tok, s, e in b[:lb]:
                ids.append(self.vocab.id(tok)); types.append(1); seqs.append(1); offs.append((s, e))
            ids.append(sp.sep); types.append(1); seqs.append(None); offs.append(None)
        return Tokenized(ids, types, seqs, offs, truncated)

    def forward(self, input_ids, attention_mask, token_type_ids=None, want_attention=False):
        states, attn = self.encoder(input_ids, attention_mask, token_type_ids)
        # no pooler head: the first token's final state is the pooled output
        return EncoderOutput(states[:, 0], states, attn if want_attention else None)

    def mlm_logits(self, input_ids, attention_mask, token_type_ids=None):
        states, _ = self.encoder(input_ids, attention_mask, token_type_ids)
        return self.encoder.mlm_logits(states)

    def convert_ids_to_tokens(self, ids):
        return [self.vocab.tokens[i] for i in ids]

    def vocab_hash(self):
        return self.vocab.sha256()

    def save(self, path, provenance=None):
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        state = {k: v.detach().cpu().contiguous() for k, v in self.encoder.state_dict().items()}
        save_file(state, str(path / "weights.safetensors"))
        (path / "config.json").write_text(json.dumps(self.spec.to_dict(), indent=2, sort_keys=True) + "\n")
        self.vocab.save(path / "vocab.txt")
        self._write_manifest(path, provenance or self.provenance)
        return path


class _Pooler(nn.Module):
    def __init__(self, hidden: int):
        super().__init__()
        self.dense = nn.Linear(hidden, hidden)

    def forward(self, states):
        return torch.tanh(self.dense(states[:, 0]))


def _hf_pooler(base_model, family: str, hidden: int) -> _Pooler | None:
    """Copy the family's native pooler out of a full base model, if it has one."""
    if family == "distilbert_base_uncased":
        return None
    pooler = _Pooler(hidden)
    if family == "albert_base_v2":
        src = base_model.pooler
    else:
        src = base_model.pooler.dense
    pooler.dense.load_state_dict(src.state_dict())
    return pooler


class HFBackend(EncoderBackend):
    """Adapter over a Hugging Face masked-LM model plus its native pooler."""

    def __init__(self, family: str, mlm_model, tokenizer, pooler: _Pooler | None, provenance: str):
        super().__init__()
        self.mlm = mlm_model
        self.tokenizer = tokenizer
        self.pooler = pooler
        self.provenance = provenance
        cfg = mlm_model.config
        sp = SpecialTokens(tokenizer.cls_token_id, tokenizer.sep_token_id, tokenizer.pad_token_id, tokenizer.mask_token_id)
        self.spec = BackendSpec(
            family,
            getattr(cfg, "num_hidden_layers", None) or cfg.n_layers,
            getattr(cfg, "num_attention_heads", None) or cfg.n_heads,
            getattr(cfg, "hidden_size", None) or cfg.dim,
            cfg.max_position_embeddings,
            sp,
            vocab_size=cfg.vocab_size,
        )

    def tokenize(self, text_a, text_b=None, max_length=None):
        max_length = min(max_length or GRADING_MAX_LENGTH, self.tokenizer.model_max_length)
        enc = self.tokenizer(
            text_a, text_b, truncation=True, max_length=max_length,
            return_offsets_mapping=True, return_token_type_ids=True,
            return_overflowing_tokens=False,
        )
        seqs = enc.sequence_ids()
        offs = [tuple(o) if s is not None else None for o, s in zip(enc["offset_mapping"], seqs)]
        types = enc.get("token_type_ids") or _types_from_sequence_ids(seqs)
        full = self.tokenizer(text_a, text_b, truncation=False)["input_ids"]
        return Tokenized(list(enc["input_ids"]), list(types), list(seqs), offs, len(full) > len(enc["input_ids"]))

    def forward(self, input_ids, attention_mask, token_type_ids=None, want_attention=False):
        kwargs = {"input_ids": input_ids, "attention_mask": attention_mask, "output_attentions": want_attention}
        if token_type_ids is not None and self.spec.uses_token_types:
            kwargs["token_type_ids"] = token_type_ids
        out = self.mlm.base_model(**kwargs)
        states = out.last_hidden_state
        pooled = self.pooler(states) if self.pooler is not None else states[:, 0]
        attn = torch.stack(out.attentions, dim=1) if want_attention else None
        return EncoderOutput(pooled, states, attn)

    def mlm_logits(self, input_ids, attention_mask, token_type_ids=None):
        kwargs = {"input_ids": input_ids, "attention_mask": attention_mask}
        if token_type_ids is not None and self.spec.uses_token_types:
            kwargs["token_type_ids"] = token_type_ids
        return self.mlm(**kwargs).logits

    def convert_ids_to_tokens(self, ids):
        return self.tokenizer.convert_ids_to_tokens(list(ids))

    def vocab_hash(self):
        vocab = sorted(self.tokenizer.get_vocab().items(), key=lambda kv: kv[1])
        return hashlib.sha256("\n".join(t for t, _ in vocab).encode("utf-8")).hexdigest()

    def save(self, path, provenance=None):
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        self.mlm.save_pretrained(path)
        self.tokenizer.save_pretrained(path)
        if self.pooler is not None:
            state = {k: v.detach().cpu().contiguous() for k, v in self.pooler.state_dict().items()}
            save_file(state, str(path / "pooler.safetensors"))
        self._write_manifest(path, provenance or self.provenance)
        return path


def _types_from_sequence_ids(seqs: Sequence[int | None]) -> list[int]:
    types, seen_b = [], False
    for s in seqs:
        seen_b = seen_b or s == 1
        types.append(int(seen_b))
    return types


def read_manifest(path: str | Path) -> dict[str, str]:
    path = Path(path) / MANIFEST_NAME
    if not path.is_file():
        raise CheckpointMissing(f"no manifest at {path}")
    out = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if ":" in line:
            key, value = line.split(":", 1)
            out[key.strip()] = value.strip()
    return out


def _hf_source(family: str, source: str | Path | None) -> str:
    if source is not None:
        return str(source)
    return HF_MODEL_NAMES[family]


def _load_hf(family: str, source: str, provenance: str, checkpoint: bool) -> HFBackend:
    from transformers import AutoModel, AutoModelForMaskedLM, AutoTokenizer
    from transformers.utils import logging as hf_logging

    hf_logging.set_verbosity_error()
    hf_logging.disable_progress_bar()
    cache_dir = os.environ.get(CACHE_ENV)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tokenizer = AutoTokenizer.from_pretrained(source, cache_dir=cache_dir, use_fast=True)
        mlm = AutoModelForMaskedLM.from_pretrained(source, cache_dir=cache_dir, attn_implementation="eager")
    hidden = mlm.config.hidden_size if hasattr(mlm.config, "hidden_size") else mlm.config.dim
    if checkpoint:
        pooler = None
        pooler_file = Path(source) / "pooler.safetensors"
        if pooler_file.is_file():
            pooler = _Pooler(hidden)
            pooler.load_state_dict(load_file(str(pooler_file)))
        elif family != "distilbert_base_uncased":
            raise CheckpointMissing(f"{source}: pooler weights missing")
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            base = AutoModel.from_pretrained(source, cache_dir=cache_dir, attn_implementation="eager")
        pooler = _hf_pooler(base, family, hidden)
        del base
    return HFBackend(family, mlm, tokenizer, pooler, provenance)


def load_backend(
    spec: BackendSpec | str,
    weights: str = "published_pretrained",
    checkpoint: str | Path | None = None,
    *,
    source: str | Path | None = None,
    corpus: Iterable[str] | None = None,
    vocab: TinyVocab | None = None,
    seed: int = 0,
) -> EncoderBackend:
    """Build a backend for ``spec`` from the requested weight source.

    ``spec`` may be a family name, in which case the default configuration
    for that family is used. ``source`` overrides the Hugging Face model id
    for published weights (a local directory works). ``corpus`` or ``vocab``
    supply the tiny tokenizer's vocabulary for random initialization.
    """
    if isinstance(spec, str):
        if spec == "tiny":
            spec = tiny_spec()
        elif spec in PUBLISHED_SPECS:
            spec = PUBLISHED_SPECS[spec]
        else:
            raise UnsupportedCombination(f"unknown family {spec!r}")
    if weights not in WEIGHT_KINDS:
        raise UnsupportedCombination(f"unknown weight kind {weights!r}")
    family = spec.family

    if weights == "lm_finetuned_checkpoint":
        if checkpoint is None or not Path(checkpoint).is_dir():
            raise CheckpointMissing(f"LM fine-tuned checkpoint not found: {checkpoint}")
        manifest = read_manifest(checkpoint)
        if manifest.get("family") != family:
            raise UnsupportedCombination(
                f"checkpoint {checkpoint} holds family {manifest.get('family')!r}, requested {family!r}"
            )
        if family == "tiny":
            return load_tiny_checkpoint(checkpoint, provenance=weights)
        return _load_hf(family, str(checkpoint), weights, checkpoint=True)

    if family == "tiny":
        if weights != "random_init":
            raise UnsupportedCombination("tiny family has no published weights; use random_init")
        if vocab is None:
            vocab = TinyVocab.build(corpus) if corpus is not None else TinyVocab()
        torch.manual_seed(seed)
        return TinyBackend(spec, vocab, provenance="random_init")

    if weights == "random_init":
        raise UnsupportedCombination(f"random_init is only legal for the tiny family, not {family}")
    return _load_hf(family, _hf_source(family, source), weights, checkpoint=False)


def load_tiny_checkpoint(path: str | Path, provenance: str | None = None) -> TinyBackend:
    path = Path(path)
    for name in ("weights.safetensors", "config.json", "vocab.txt"):
        if not (path / name).is_file():
            raise CheckpointMissing(f"{path}: missing {name}")
    spec = BackendSpec.from_dict(json.loads((path / "config.json").read_text()))
    vocab = TinyVocab.load(path / "vocab.txt")
    manifest = read_manifest(path)
    backend = TinyBackend(spec, vocab, provenance=provenance or manifest.get("provenance", "random_init"))
    backend.encoder.load_state_dict(load_file(str(path / "weights.safetensors")))
    return backend


def load_checkpoint(path: str | Path) -> EncoderBackend:
    """Load any saved backend, keeping the provenance recorded in its manifest."""
    manifest = read_manifest(path)
    family = manifest.get("family")
    provenance = manifest.get("provenance", "published_pretrained")
    if family == "tiny":
        return load_tiny_checkpoint(path, provenance)
    if family not in HF_MODEL_NAMES:
        raise UnsupportedCombination(f"{path}: unknown family {family!r}")
    return _load_hf(family, str(path), provenance, checkpoint=True)
