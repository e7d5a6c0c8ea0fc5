"""Python bindings for the psyosr library."""

from ._core import (
    Error,
    MultiExitNetwork,
    aggregate_rt_file,
    combined_loss,
    cross_entropy,
    exit_loss,
    f1,
    infer,
    mcc,
    median_max_scores,
    performance_loss,
    quintile_cutoffs,
    run_synthetic_experiment,
    target_exit,
    unknown_accuracy,
)

__all__ = [
    "Error",
    "MultiExitNetwork",
    "aggregate_rt_file",
    "combined_loss",
    "cross_entropy",
    "exit_loss",
    "f1",
    "infer",
    "mcc",
    "median_max_scores",
    "performance_loss",
    "quintile_cutoffs",
    "run_synthetic_experiment",
    "target_exit",
    "unknown_accuracy",
]
