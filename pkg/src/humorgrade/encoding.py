"""Two-sentence (original, edited) model inputs."""

from __future__ import annotations

from dataclasses import dataclass

from .backend import GRADING_MAX_LENGTH, EncoderBackend, Tokenized
from .corpus import HeadlineRecord, edit_span, strip_edit
from .errors import TruncationDroppedEdit


@dataclass(frozen=True)
class EncodedPair:
    record_id: str
    token_ids: tuple[int, ...]
    segment_ids: tuple[int, ...]
    attention_mask: tuple[int, ...]
    edited_token_positions: frozenset[int]
    sequence_ids: tuple[int | None, ...]
    edited_segment: int = 1
    truncated: bool = False
    edit_dropped: bool = False

    def __post_init__(self):
        n = len(self.token_ids)
        if not (len(self.segment_ids) == len(self.attention_mask) == len(self.sequence_ids) == n):
            raise ValueError("token_ids, segment_ids and attention_mask must have equal length")
        for i in self.edited_token_positions:
            if self.sequence_ids[i] != self.edited_segment:
                raise ValueError(f"edited position {i} is outside the edited segment")

    @property
    def non_special_positions(self) -> frozenset[int]:
        return frozenset(i for i, s in enumerate(self.sequence_ids) if s is not None)

    def as_tokenized(self) -> Tokenized:
        return Tokenized(list(self.token_ids), list(self.segment_ids), list(self.sequence_ids),
                         [None] * len(self.token_ids), self.truncated)


def encode_record(
    record: HeadlineRecord,
    backend: EncoderBackend,
    max_length: int = GRADING_MAX_LENGTH,
    edited_first: bool = False,
    allow_dropped_edit: bool = False,
) -> EncodedPair:
    """Tokenize ``record`` as original followed by edited headline.

    ``edited_first`` swaps the two sentences. Raises TruncationDroppedEdit
    when truncation removed every token of the replacement word, unless
    ``allow_dropped_edit`` is set, in which case the pair comes back with no
    edited positions and ``edit_dropped`` set.
    """
    original = strip_edit(record.original_marked)
    edited, start, end = edit_span(record.original_marked, record.edit_word)
    if edited_first:
        tok = backend.tokenize(edited, original, max_length=max_length)
        segment = 0
    else:
        tok = backend.tokenize(original, edited, max_length=max_length)
        segment = 1
    positions = tok.positions_in_span(segment, start, end)
    if not positions and not allow_dropped_edit:
        raise TruncationDroppedEdit(
            f"record {record.id}: no token of the edit {record.edit_word!r} survived encoding", record.id
        )
    return EncodedPair(
        record_id=record.id,
        token_ids=tuple(tok.input_ids),
        segment_ids=tuple(tok.token_type_ids),
        attention_mask=(1,) * len(tok),
        edited_token_positions=frozenset(positions),
        sequence_ids=tuple(tok.sequence_ids),
        edited_segment=segment,
        truncated=tok.truncated,
        edit_dropped=not positions,
    )
