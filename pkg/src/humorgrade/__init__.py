"""Grade the funniness of micro-edited news headlines with transformer encoders."""

from .corpus import (
    DatasetSplit,
    HeadlineRecord,
    PairRecord,
    apply_edit,
    make_splits,
    parse_task1_file,
    parse_task2_file,
    strip_edit,
)
from .evalreport import categorical_accuracy, cross_dataset_eval, render_report, rmse
from .grader import GraderModel, TrainConfig, predict_grades, train_grader
from .pairwise import pair_label, predict_pairs

__version__ = "0.1.0"

__all__ = [
    "DatasetSplit",
    "GraderModel",
    "HeadlineRecord",
    "PairRecord",
    "TrainConfig",
    "apply_edit",
    "categorical_accuracy",
    "cross_dataset_eval",
    "make_splits",
    "pair_label",
    "parse_task1_file",
    "parse_task2_file",
    "predict_grades",
    "predict_pairs",
    "render_report",
    "rmse",
    "strip_edit",
    "train_grader",
]
