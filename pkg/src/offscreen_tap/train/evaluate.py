"""
Evaluation paradigms.

``one_to_n`` runs the frozen graph over every participant. ``leave_one_out``
holds out one participant at a time, fine-tunes a copy of the graph on the
others and pools the held-out predictions, so the summary metrics are
support-weighted over folds.

Property heads are scored on every tap sample, whatever the event head says.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from typing import Any

import numpy as np

from offscreen_tap.core.errors import ConfigError, InputError
from offscreen_tap.core.models import HEAD_WIDTHS
from offscreen_tap.data.dataset import SampleArrays
from offscreen_tap.data.labels import Sample
from offscreen_tap.nn.graph import ModelGraph
from offscreen_tap.train.metrics import (
    MetricsReport,
    accuracy,
    center_baseline_mae,
    confusion_matrix,
    location_mae,
    per_class_f1,
    r2,
    weighted_f1,
)
from offscreen_tap.train.trainer import TrainPlan, fine_tune

log = logging.getLogger(__name__)

PARADIGMS = ("one_to_n", "leave_one_out")
PREDICT_BATCH = 256


def predict(
    graph: ModelGraph,
    samples: Sequence[Sample] | SampleArrays,
    batch_size: int = PREDICT_BATCH,
) -> dict[str, np.ndarray]:
    """
    Inference-mode predictions for every head of ``graph``: class indices for
    classifier heads, clamped [N, 2] ratios for ``loc_reg``.
    """
    data = samples if isinstance(samples, SampleArrays) else SampleArrays.from_samples(samples)
    n = len(data)
    chunks: dict[str, list[np.ndarray]] = {name: [] for name in graph.heads}
    for start in range(0, n, batch_size):
        outputs = graph.forward(
            data.features[start : start + batch_size], data.devices[start : start + batch_size]
        )
        for name, out in outputs.items():
            if name == "loc_reg":
                chunks[name].append(np.clip(out, 0.0, 1.0))
            else:
                chunks[name].append(out.argmax(axis=1))
    out: dict[str, np.ndarray] = {}
    for name, parts in chunks.items():
        if parts:
            out[name] = np.concatenate(parts)
        else:
            out[name] = np.zeros((0, 2)) if name == "loc_reg" else np.zeros(0, dtype=np.int64)
    return out


def _head_scores(truth: np.ndarray, pred: np.ndarray, head: str) -> dict[str, Any]:
    confusion = confusion_matrix(truth, pred, HEAD_WIDTHS[head])
    return {
        "f1": weighted_f1(confusion),
        "accuracy": accuracy(confusion),
        "per_class_f1": [float(v) for v in per_class_f1(confusion)],
        "confusion": confusion.tolist(),
    }


def build_report(
    predictions: dict[str, np.ndarray], data: SampleArrays, paradigm: str = "one_to_n"
) -> MetricsReport:
    """Score ``predictions`` (as returned by :func:`predict`) against ``data``."""
    taps = data.is_tap
    fields: dict[str, Any] = {
        "paradigm": paradigm,
        "counts": {"samples": len(data), "taps": int(taps.sum()), "nontaps": int((~taps).sum())},
        "f1": {},
        "accuracy": {},
        "per_class_f1": {},
        "confusion": {},
    }
    for head, pred in predictions.items():
        rows = np.ones(len(data), dtype=bool) if head == "event" else taps
        if not rows.any():
            log.warning("No samples to score head %s", head)
            continue
        if head == "loc_reg":
            truth_xy = data.loc_xy[rows]
            fields["location_mae"] = location_mae(truth_xy, pred[rows])
            fields["center_baseline_mae"] = center_baseline_mae(truth_xy)
            fields["r2"] = r2(pred[rows], truth_xy)
            continue
        for key, value in _head_scores(data.targets(head)[rows], pred[rows], head).items():
            fields[key][head] = value
    return MetricsReport(**fields)


def _fold_summary(participant: str, report: MetricsReport) -> dict[str, Any]:
    return {
        "participant": participant,
        "f1": report.f1,
        "location_mae": report.location_mae,
        "counts": report.counts,
    }


def evaluate(
    graph: ModelGraph,
    dataset: Sequence[Sample] | SampleArrays,
    paradigm: str = "one_to_n",
    plan: TrainPlan | None = None,
) -> MetricsReport:
    """
    Score ``graph`` on ``dataset`` under ``paradigm``. The graph passed in is
    never modified; leave-one-out fine-tunes copies.
    """
    if paradigm not in PARADIGMS:
        raise ConfigError(f"Unknown paradigm {paradigm!r}; expected one of {PARADIGMS}")
    data = dataset if isinstance(dataset, SampleArrays) else SampleArrays.from_samples(dataset)
    if len(data) == 0:
        raise InputError("Cannot evaluate on an empty dataset")

    if paradigm == "one_to_n":
        return build_report(predict(graph, data), data, paradigm)

    participants = sorted(set(data.participants.tolist()))
    if len(participants) < 2:
        raise InputError(
            f"leave_one_out needs at least 2 participants, got {len(participants)}"
        )
    plan = plan or TrainPlan()
    pooled: dict[str, list[np.ndarray]] = {name: [] for name in graph.heads}
    held_parts: list[SampleArrays] = []
    folds: list[dict[str, Any]] = []
    for participant in participants:
        held = data.participants == participant
        tuned = graph.copy()
        fine_tune(tuned, data.subset(~held), plan)
        held_out = data.subset(held)
        preds = predict(tuned, held_out)
        for name, value in preds.items():
            pooled[name].append(value)
        held_parts.append(held_out)
        fold_report = build_report(preds, held_out, paradigm)
        folds.append(_fold_summary(participant, fold_report))
        log.info("Fold %s: F1 %s", participant, fold_report.f1)

    merged = SampleArrays.concat(held_parts)
    predictions = {name: np.concatenate(parts) for name, parts in pooled.items()}
    report = build_report(predictions, merged, paradigm)
    report.folds = folds
    return report
