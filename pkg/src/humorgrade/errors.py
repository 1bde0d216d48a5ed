"""Exception and warning types shared across the pipeline.

Every error carries a short ``category`` string. The CLI prints it as the
first field of its one-line failure message.
"""

from __future__ import annotations


class HumorGradeError(Exception):
    category = "Error"


class MissingColumn(HumorGradeError):
    category = "MissingColumn"


class MalformedEditMarker(HumorGradeError, ValueError):
    category = "MalformedEditMarker"


class GradeOutOfRange(HumorGradeError, ValueError):
    category = "GradeOutOfRange"


class OriginalMismatch(HumorGradeError, ValueError):
    category = "OriginalMismatch"


class InsufficientRecords(HumorGradeError, ValueError):
    category = "InsufficientRecords"


class CheckpointMissing(HumorGradeError, FileNotFoundError):
    category = "CheckpointMissing"


class UnsupportedCombination(HumorGradeError, ValueError):
    category = "UnsupportedCombination"


class TruncationDroppedEdit(HumorGradeError):
    category = "TruncationDroppedEdit"

    def __init__(self, message: str, record_id: str | None = None):
        super().__init__(message)
        self.record_id = record_id


class EmptyCorpus(HumorGradeError, ValueError):
    category = "EmptyCorpus"


class DivergedLoss(HumorGradeError, FloatingPointError):
    category = "DivergedLoss"


class MissingGrades(HumorGradeError, ValueError):
    category = "MissingGrades"


class NonFiniteGrade(HumorGradeError, ValueError):
    category = "NonFiniteGrade"


class LengthMismatch(HumorGradeError, ValueError):
    category = "LengthMismatch"


class EmptyInput(HumorGradeError, ValueError):
    category = "EmptyInput"


class MissingSplit(HumorGradeError, KeyError):
    category = "MissingSplit"

    def __str__(self) -> str:
        return Exception.__str__(self)


class EmptyDenominator(HumorGradeError, ZeroDivisionError):
    category = "EmptyDenominator"


class ConfigInvalid(HumorGradeError, ValueError):
    category = "ConfigInvalid"


class InputMissing(HumorGradeError, FileNotFoundError):
    category = "InputMissing"


class OutputExists(HumorGradeError, FileExistsError):
    category = "OutputExists"


class ConsistencyWarning(UserWarning):
    """Gold pair label disagrees with the two mean grades."""


class MeanGradeMismatch(UserWarning):
    """File mean column disagrees with the mean recomputed from the grades."""


class LongInputWarning(UserWarning):
    """Input exceeded the maximum length and was truncated."""


class TruncationWarning(UserWarning):
    """A record was graded although truncation removed its edited tokens."""
