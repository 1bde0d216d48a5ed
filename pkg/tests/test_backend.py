import math

import pytest
import torch

from humorgrade.backend import (
    PUBLISHED_SPECS,
    BackendSpec,
    TinyVocab,
    load_backend,
    load_checkpoint,
    read_manifest,
    tiny_spec,
    truncate_pair,
)
from humorgrade.errors import CheckpointMissing, UnsupportedCombination
from humorgrade.selftest import gradient_check

from conftest import EXAMPLE_EDITED


def test_published_family_configurations():
    bert = PUBLISHED_SPECS["bert_base_uncased"]
    assert (bert.num_layers, bert.num_heads, bert.hidden_size) == (12, 12, 768)
    assert PUBLISHED_SPECS["distilbert_base_uncased"].num_layers == 6
    for spec in PUBLISHED_SPECS.values():
        assert spec.hidden_size % spec.num_heads == 0


def test_spec_invariants():
    with pytest.raises(ValueError):
        tiny_spec(num_heads=3, hidden_size=64)
    with pytest.raises(ValueError):
        tiny_spec(num_heads=1, hidden_size=64)
    with pytest.raises(ValueError):
        tiny_spec(num_layers=0)
    spec = tiny_spec()
    assert BackendSpec.from_dict(spec.to_dict()) == spec


def test_tiny_random_init_usable_immediately():
    backend = load_backend("tiny", "random_init")
    out = backend.encode([backend.tokenize("hello world")])
    assert out.pooled.shape == (1, 64)
    assert backend.provenance == "random_init"


@pytest.mark.parametrize(
    "family, weights",
    [("tiny", "published_pretrained"), ("bert_base_uncased", "random_init"), ("roberta_base", "random_init")],
)
def test_unsupported_combinations(family, weights):
    with pytest.raises(UnsupportedCombination):
        load_backend(family, weights)


def test_missing_checkpoint(tmp_path):
    with pytest.raises(CheckpointMissing):
        load_backend("tiny", "lm_finetuned_checkpoint", tmp_path / "nope")
    with pytest.raises(CheckpointMissing):
        load_backend("tiny", "lm_finetuned_checkpoint", None)


def test_tokenize_single_and_pair():
    backend = load_backend("tiny", "random_init", vocab=TinyVocab(["a", "b"]))
    v = backend.vocab
    assert backend.tokenize("a").input_ids == [TinyVocab.CLS, v.id("a"), TinyVocab.SEP]
    pair = backend.tokenize("a", "b")
    assert pair.input_ids == [TinyVocab.CLS, v.id("a"), TinyVocab.SEP, v.id("b"), TinyVocab.SEP]
    assert pair.sequence_ids == [None, 0, None, 1, None]
    assert pair.token_type_ids == [0, 0, 0, 1, 1]
    assert backend.tokenize("").input_ids == [TinyVocab.CLS, TinyVocab.SEP]


def test_tokenize_alignment_locates_edit(tiny_backend):
    tok = tiny_backend.tokenize(EXAMPLE_EDITED)
    start = EXAMPLE_EDITED.find("tequila")
    positions = tok.positions_in_span(0, start, start + len("tequila"))
    assert len(positions) == 1
    s, e = tok.offsets[positions[0]]
    assert EXAMPLE_EDITED[s:e] == "tequila"
    # every non-special token is covered by the alignment map
    assert all((off is None) == (seq is None) for off, seq in zip(tok.offsets, tok.sequence_ids))


def test_vocabulary_frequency_cutoff():
    vocab = TinyVocab.build(["a a b", "c"], min_freq=2)
    assert vocab.id("a") != TinyVocab.UNK
    assert vocab.id("b") == TinyVocab.UNK and vocab.id("c") == TinyVocab.UNK


@pytest.mark.parametrize("la, lb, budget, expected", [(10, 2, 8, (6, 2)), (5, 5, 6, (3, 3)), (3, 3, 10, (3, 3)), (4, 0, 2, (2, 0))])
def test_longest_first_truncation(la, lb, budget, expected):
    assert truncate_pair(la, lb, budget) == expected


def test_truncation_keeps_special_tokens(tiny_backend):
    tok = tiny_backend.tokenize("one two three four five six", "seven eight", max_length=7)
    assert len(tok) == 7 and tok.truncated
    assert tok.input_ids[0] == TinyVocab.CLS and tok.input_ids[-1] == TinyVocab.SEP
    assert tok.sequence_ids.count(None) == 3


def _batch(backend, texts):
    return [backend.tokenize(a, b) for a, b in texts]


TEXTS = [
    ("trump signs new order", "trump signs new clown"),
    ("police investigate leak at city hall", "police investigate pickle leak"),
    ("a", None),
]


def test_attention_rows_normalised_over_real_keys(tiny_backend):
    items = _batch(tiny_backend, TEXTS)
    out = tiny_backend.encode(items, want_attention=True)
    assert out.attentions.shape[1:3] == (2, 4)
    for i, item in enumerate(items):
        n = len(item)
        a = out.attentions[i, :, :, :n, :]
        assert torch.allclose(a[..., :n].sum(-1), torch.ones_like(a[..., 0]), atol=1e-4)
        if a.shape[-1] > n:
            assert float(a[..., n:].abs().max()) == 0.0


def test_encode_is_deterministic(tiny_backend):
    items = _batch(tiny_backend, TEXTS)
    first = tiny_backend.encode(items, want_attention=True)
    second = tiny_backend.encode(items, want_attention=True)
    assert torch.allclose(first.pooled, second.pooled, atol=1e-6, rtol=0)
    assert torch.allclose(first.attentions, second.attentions, atol=1e-6, rtol=0)


def test_padding_invariance(tiny_backend):
    alone = tiny_backend.encode([tiny_backend.tokenize("a")])
    padded = tiny_backend.encode(_batch(tiny_backend, TEXTS))
    assert torch.allclose(alone.pooled[0], padded.pooled[2], atol=1e-4)


def test_encode_does_not_change_mode_or_weights(tiny_backend):
    before = {k: v.clone() for k, v in tiny_backend.state_dict().items()}
    tiny_backend.train()
    tiny_backend.encode(_batch(tiny_backend, TEXTS))
    assert tiny_backend.training
    tiny_backend.eval()
    assert all(torch.equal(before[k], v) for k, v in tiny_backend.state_dict().items())


def test_mlm_scores_finite(tiny_backend):
    tok = tiny_backend.tokenize("trump signs new order")
    masked = list(tok.input_ids)
    masked[2] = TinyVocab.MASK
    (scores,) = tiny_backend.mlm_scores([masked], [[2]])
    assert scores.shape == (1, tiny_backend.spec.vocab_size)
    assert torch.isfinite(scores).all()


@pytest.mark.parametrize("seed", [0, 1])
def test_gradient_check_against_finite_differences(seed):
    assert gradient_check(seed) < 1e-3


def test_tiny_checkpoint_round_trip(tmp_path, tiny_backend):
    path = tiny_backend.save(tmp_path / "ck", provenance="lm_finetuned_checkpoint")
    manifest = read_manifest(path)
    assert manifest["family"] == "tiny"
    assert manifest["provenance"] == "lm_finetuned_checkpoint"
    assert manifest["vocab_sha256"] == tiny_backend.vocab.sha256()
    assert "created" in manifest
    loaded = load_backend("tiny", "lm_finetuned_checkpoint", path)
    assert loaded.provenance == "lm_finetuned_checkpoint"
    items = _batch(tiny_backend, TEXTS)
    assert torch.equal(loaded.encode(items).pooled, tiny_backend.encode(items).pooled)
    assert load_checkpoint(path).provenance == "lm_finetuned_checkpoint"


def test_family_mismatch_rejected(tmp_path, tiny_backend):
    path = tiny_backend.save(tmp_path / "ck")
    with pytest.raises(UnsupportedCombination):
        load_backend("bert_base_uncased", "lm_finetuned_checkpoint", path)


# -- Hugging Face adapter, exercised on a locally built two-layer BERT --------------


@pytest.fixture(scope="module")
def hf_backend(minibert_dir):
    backend = load_backend("bert_base_uncased", "published_pretrained", source=minibert_dir)
    backend.eval()
    return backend


def test_hf_spec_from_model_config(hf_backend):
    spec = hf_backend.spec
    assert (spec.num_layers, spec.num_heads, spec.hidden_size) == (2, 4, 32)
    assert spec.special_token_ids.cls == hf_backend.tokenizer.cls_token_id
    assert hf_backend.pooler is not None


def test_hf_tokenize_layout_and_alignment(hf_backend):
    tok = hf_backend.tokenize("us navy", EXAMPLE_EDITED.lower())
    sp = hf_backend.spec.special_token_ids
    assert tok.input_ids[0] == sp.cls and tok.input_ids[-1] == sp.sep
    assert tok.sequence_ids[:4] == [None, 0, 0, None]
    start = EXAMPLE_EDITED.lower().find("tequila")
    positions = tok.positions_in_span(1, start, start + 7)
    pieces = hf_backend.convert_ids_to_tokens([tok.input_ids[i] for i in positions])
    assert "".join(p.removeprefix("##") for p in pieces) == "tequila"


def test_hf_attention_and_pooler(hf_backend):
    items = [hf_backend.tokenize("us navy ship", "us navy tequila"), hf_backend.tokenize("trump")]
    out = hf_backend.encode(items, want_attention=True)
    assert out.attentions.shape[:3] == (2, 2, 4)
    n = len(items[1])
    rows = out.attentions[1, :, :, :n, :n].sum(-1)
    assert torch.allclose(rows, torch.ones_like(rows), atol=1e-4)
    alone = hf_backend.encode([items[1]])
    assert torch.allclose(alone.pooled[0], out.pooled[1], atol=1e-4)
    # native pooler: tanh of a dense map over the first token's state
    expected = torch.tanh(hf_backend.pooler.dense(out.token_states[:, 0]))
    assert torch.allclose(out.pooled, expected, atol=1e-6)


def test_hf_mlm_scores(hf_backend):
    tok = hf_backend.tokenize("us navy ship")
    ids = list(tok.input_ids)
    ids[1] = hf_backend.spec.special_token_ids.mask
    (scores,) = hf_backend.mlm_scores([ids], [[1]])
    assert scores.shape == (1, hf_backend.spec.vocab_size) and torch.isfinite(scores).all()


def test_hf_checkpoint_round_trip(tmp_path, hf_backend):
    path = hf_backend.save(tmp_path / "hf", provenance="lm_finetuned_checkpoint")
    loaded = load_backend("bert_base_uncased", "lm_finetuned_checkpoint", path)
    items = [hf_backend.tokenize("us navy ship", "us navy tequila")]
    assert torch.allclose(loaded.encode(items).pooled, hf_backend.encode(items).pooled, atol=1e-6)
    assert read_manifest(path)["family"] == "bert_base_uncased"
    assert math.isclose(loaded.spec.hidden_size, 32)
