"""
offscreen_tap.train - Alternating trainer, metrics, evaluation paradigms and sweeps.
"""

from offscreen_tap.train.evaluate import PARADIGMS, build_report, evaluate, predict
from offscreen_tap.train.metrics import (
    MetricsReport,
    accuracy,
    confusion_matrix,
    location_mae,
    r2,
    weighted_f1,
)
from offscreen_tap.train.sweep import (
    ResultRow,
    SweepConfig,
    plateau_budget,
    sweep,
    write_results,
)
from offscreen_tap.train.trainer import (
    History,
    TrainPlan,
    TrainResult,
    fine_tune,
    head_losses,
    train,
    train_mixed,
)

__all__ = [
    "PARADIGMS",
    "History",
    "MetricsReport",
    "ResultRow",
    "SweepConfig",
    "TrainPlan",
    "TrainResult",
    "accuracy",
    "build_report",
    "confusion_matrix",
    "evaluate",
    "fine_tune",
    "head_losses",
    "location_mae",
    "plateau_budget",
    "predict",
    "r2",
    "sweep",
    "train",
    "train_mixed",
    "weighted_f1",
]
