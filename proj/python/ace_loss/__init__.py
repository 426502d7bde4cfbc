"""Aggregation cross-entropy and CTC losses with closed-form logit gradients."""

from ._ace import (
    AceError,
    CapacityError,
    InvalidInputError,
    IoError,
    SizeError,
    TrainingFailure,
    VocabularyError,
    ace_ce_loss,
    ace_ce_loss_2d,
    ace_regression_loss,
    cer,
    counts_from_sequence,
    ctc_loss,
    flatten_2d,
    greedy_decode,
    rmse_metrics,
    run_bench,
    softmax,
)

__all__ = [
    "AceError",
    "CapacityError",
    "InvalidInputError",
    "IoError",
    "SizeError",
    "TrainingFailure",
    "VocabularyError",
    "ace_ce_loss",
    "ace_ce_loss_2d",
    "ace_regression_loss",
    "cer",
    "counts_from_sequence",
    "ctc_loss",
    "flatten_2d",
    "greedy_decode",
    "rmse_metrics",
    "run_bench",
    "softmax",
]
