"""Python access to the hybrid relation assignment core."""

from ._hydra import (
    ConfigError,
    GtTriplet,
    NonFiniteLossError,
    NormBox,
    PredTriplet,
    RunConfig,
    analyze,
    average_precision,
    evaluate,
    f_recall,
    gen_data,
    giou,
    hungarian,
    iou,
    score_o2m,
    score_wtd,
    select_o2m,
    train,
    union_box,
)

__all__ = [
    "ConfigError",
    "GtTriplet",
    "NonFiniteLossError",
    "NormBox",
    "PredTriplet",
    "RunConfig",
    "analyze",
    "average_precision",
    "evaluate",
    "f_recall",
    "gen_data",
    "giou",
    "hungarian",
    "iou",
    "score_o2m",
    "score_wtd",
    "select_o2m",
    "train",
    "union_box",
]
