import copy
import warnings
from pathlib import Path

import pytest
import torch

from humorgrade import synthetic
from humorgrade.backend import load_backend
from humorgrade.corpus import write_task1_csv, write_task2_csv
from humorgrade.grader import GraderModel

EXAMPLE_MARKED = "US Navy ship fired <warning/> shots at an Iranian boat in the Persian Gulf"
EXAMPLE_EDITED = "US Navy ship fired tequila shots at an Iranian boat in the Persian Gulf"

MINI_WORDS = (
    "us navy ship fired warning tequila texts shots at an iranian boat in the persian gulf ice cream "
    "trump signs new order on trade with china"
).split()


@pytest.fixture(scope="session")
def synthetic_records():
    return synthetic.make_records(120, seed=5)


@pytest.fixture(scope="session")
def tiny_backend(synthetic_records):
    texts = [t for r in synthetic_records for t in (r.original, r.edited)]
    backend = load_backend("tiny", "random_init", corpus=texts, seed=0)
    backend.eval()
    return backend


@pytest.fixture()
def tiny_grader(tiny_backend):
    # a private copy so tests that tweak or train the grader cannot leak into others
    return GraderModel(copy.deepcopy(tiny_backend), seed=0)


@pytest.fixture(scope="session")
def minibert_dir(tmp_path_factory):
    """A randomly initialised two-layer BERT saved in Hugging Face layout."""
    from transformers import BertConfig, BertForPreTraining, BertTokenizerFast
    from transformers.utils import logging as hf_logging

    hf_logging.set_verbosity_error()
    hf_logging.disable_progress_bar()
    path = tmp_path_factory.mktemp("minibert")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + list(dict.fromkeys(MINI_WORDS)) + ["##s", "##quila", "te"]
    tokenizer = BertTokenizerFast(vocab={w: i for i, w in enumerate(vocab)}, do_lower_case=True)
    config = BertConfig(
        vocab_size=len(vocab), hidden_size=32, num_hidden_layers=2, num_attention_heads=4,
        intermediate_size=64, max_position_embeddings=64,
    )
    torch.manual_seed(0)
    BertForPreTraining(config).save_pretrained(path)
    tokenizer.save_pretrained(path)
    return Path(path)


@pytest.fixture(scope="session")
def synthetic_files(tmp_path_factory):
    """Synthetic sub-task-1 and sub-task-2 files in the released CSV layout."""
    root = tmp_path_factory.mktemp("data")
    records = synthetic.make_records(300, seed=11, prefix="h")
    write_task1_csv(records[:200], root / "task1-train.csv")
    write_task1_csv(records[200:250], root / "task1-dev.csv")
    write_task1_csv(records[250:], root / "task1-test.csv")
    write_task1_csv(synthetic.make_records(120, seed=12, prefix="f"), root / "funlines-task1.csv")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        write_task2_csv(synthetic.make_pairs(40, seed=13, prefix="hp"), root / "task2-test.csv")
        write_task2_csv(synthetic.make_pairs(30, seed=14, prefix="fp"), root / "funlines-task2.csv")
    return root


ACCEPTANCE_RESULTS: list[str] = []


def record_acceptance(criterion: int, status: str, detail: str) -> None:
    line = f"{status} criterion {criterion}: {detail}"
    ACCEPTANCE_RESULTS.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_RESULTS, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
