"""
Alternating multi-task trainer.

One cycle is ``property_epochs`` epochs on the property heads (direction,
finger, loc_class, loc_reg) over tap samples only, followed by
``event_epochs`` epochs on the event head over taps and non-taps. The trunk
is trained in both phases. Each phase has its own Adam state, so the event
head never moves during property epochs and the property heads never move
during event epochs.

Training stops when the validation loss has not improved by ``min_delta``
for ``patience`` consecutive cycles, or after ``max_cycles``.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from offscreen_tap.core.config import check_keys, load_yaml
from offscreen_tap.core.errors import ConfigError, InputError, TrainingFault
from offscreen_tap.core.models import ALL_HEADS, PROPERTY_HEADS
from offscreen_tap.data.augment import augment_batch
from offscreen_tap.data.dataset import SampleArrays
from offscreen_tap.data.labels import Sample
from offscreen_tap.nn.functional import mse, softmax_cross_entropy
from offscreen_tap.nn.graph import ModelGraph
from offscreen_tap.nn.optim import OptimizerState, adam_step

log = logging.getLogger(__name__)

PROPERTY_PHASE = "property"
EVENT_PHASE = "event"


@dataclass
class TrainPlan:
    property_epochs: int = 10
    event_epochs: int = 1
    batch_size: int = 64
    max_cycles: int = 20
    patience: int = 3
    min_delta: float = 1e-4
    validation_fraction: float = 0.05
    loss_weights: dict[str, float] = field(default_factory=lambda: dict.fromkeys(ALL_HEADS, 1.0))
    learning_rate: float = 1e-4
    decay: float = 1e-6
    max_shift: int = 5
    max_scale: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must be in (0, 1)")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2 (batch norm needs two samples)")
        if min(self.property_epochs, self.event_epochs, self.max_cycles) < 0:
            raise ConfigError("epoch and cycle counts must be >= 0")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        unknown = set(self.loss_weights) - set(ALL_HEADS)
        if unknown:
            raise ConfigError(f"Unknown loss weight heads: {sorted(unknown)}")
        if any(w < 0 for w in self.loss_weights.values()):
            raise ConfigError("loss weights must be >= 0")
        if self.learning_rate < 0 or self.decay < 0:
            raise ConfigError("learning_rate and decay must be >= 0")

    def weight(self, head: str) -> float:
        return self.loss_weights.get(head, 1.0)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TrainPlan:
        check_keys(cls, data)
        return cls(**data)

    @classmethod
    def load(cls, name_or_path: str | Path) -> TrainPlan:
        return cls.from_dict(load_yaml(name_or_path))


@dataclass
class EpochRecord:
    cycle: int
    phase: str
    epoch: int
    loss: float


@dataclass
class CycleRecord:
    cycle: int
    val_loss: float
    improved: bool


@dataclass
class History:
    epochs: list[EpochRecord] = field(default_factory=list)
    cycles: list[CycleRecord] = field(default_factory=list)
    best_val_loss: float = math.inf
    stopped_early: bool = False

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class TrainResult:
    graph: ModelGraph
    history: History
    optimizers: dict[str, OptimizerState]


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def head_losses(
    outputs: dict[str, np.ndarray], data: SampleArrays, weights: dict[str, float] | None = None
) -> tuple[float, dict[str, float], dict[str, np.ndarray]]:
    """
    Weighted sum of per-head losses (batch means) and the output gradient of
    each head. Returns (total, per-head loss, per-head gradient).
    """
    weights = weights or {}
    total = 0.0
    per_head: dict[str, float] = {}
    grads: dict[str, np.ndarray] = {}
    for head, out in outputs.items():
        if head == "loc_reg":
            loss, grad = mse(out, data.loc_xy)
        else:
            loss, grad = softmax_cross_entropy(out, data.targets(head))
        w = weights.get(head, 1.0)
        per_head[head] = loss
        total += w * loss
        grads[head] = w * grad
    if not math.isfinite(total):
        raise TrainingFault(f"Non-finite loss: {per_head}")
    return total, per_head, grads


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


def _as_arrays(data: Sequence[Sample] | SampleArrays) -> SampleArrays:
    return data if isinstance(data, SampleArrays) else SampleArrays.from_samples(data)


def split_validation(
    data: SampleArrays, fraction: float, rng: np.random.Generator
) -> tuple[SampleArrays, SampleArrays]:
    """Seeded disjoint (train, validation) split; validation gets at least one sample."""
    n = len(data)
    order = rng.permutation(n)
    n_val = min(max(1, round(fraction * n)), n - 1) if n >= 2 else 0
    return data.subset(np.sort(order[n_val:])), data.subset(np.sort(order[:n_val]))


def batches(n: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffled index batches; a trailing batch of one is merged into the previous."""
    order = rng.permutation(n)
    out = [order[i : i + batch_size] for i in range(0, n, batch_size)]
    if len(out) > 1 and len(out[-1]) == 1:
        last = out.pop()
        out[-1] = np.concatenate([out[-1], last])
    return out


class Trainer:
    """Runs the alternating schedule on one graph, updating it in place."""

    def __init__(
        self,
        graph: ModelGraph,
        plan: TrainPlan,
        optimizers: dict[str, OptimizerState] | None = None,
    ):
        self.graph = graph
        self.plan = plan
        self.rng = np.random.default_rng(plan.seed)
        self.property_heads = [h for h in PROPERTY_HEADS if h in graph.heads]
        self.has_event = "event" in graph.heads
        self.optimizers = optimizers or {
            PROPERTY_PHASE: OptimizerState(plan.learning_rate, plan.decay),
            EVENT_PHASE: OptimizerState(plan.learning_rate, plan.decay),
        }
        self.history = History()

    def _step(self, data: SampleArrays, index: np.ndarray, heads: list[str], phase: str) -> float:
        batch = data.subset(index)
        features = augment_batch(
            batch.features, self.rng, self.plan.max_shift, self.plan.max_scale
        )
        outputs = self.graph.forward(features, batch.devices, training=True, heads=heads)
        loss, _, head_grads = head_losses(outputs, batch, self.plan.loss_weights)
        inactive = set(self.graph.heads) - set(heads)
        grads = self.graph.backward(head_grads, inactive)
        params = self.graph.parameters(heads=heads)
        adam_step(self.optimizers[phase], params, grads)
        return loss

    def _epoch(self, data: SampleArrays, heads: list[str], phase: str) -> float:
        total, count = 0.0, 0
        for index in batches(len(data), self.plan.batch_size, self.rng):
            total += self._step(data, index, heads, phase) * len(index)
            count += len(index)
        return total / max(count, 1)

    def validation_loss(self, taps: SampleArrays, events: SampleArrays) -> float:
        loss = 0.0
        if self.property_heads and len(taps):
            outputs = self.graph.forward(taps.features, taps.devices, heads=self.property_heads)
            loss += head_losses(outputs, taps, self.plan.loss_weights)[0]
        if self.has_event and len(events):
            outputs = self.graph.forward(events.features, events.devices, heads=["event"])
            loss += head_losses(outputs, events, self.plan.loss_weights)[0]
        return loss

    def fit(self, taps: SampleArrays, nontaps: SampleArrays) -> TrainResult:
        plan = self.plan
        if plan.max_cycles == 0:
            return TrainResult(self.graph, self.history, self.optimizers)
        if self.property_heads and len(taps) < 3:
            raise InputError(f"Need at least 3 tap samples to train, got {len(taps)}")
        if not self.property_heads and len(taps) + len(nontaps) < 3:
            raise InputError("Need at least 3 samples to train")
        if self.has_event and len(nontaps) == 0:
            log.warning("No non-tap samples; the event head only sees taps")

        tap_train, tap_val = split_validation(taps, plan.validation_fraction, self.rng)
        parts = [tap_train]
        val_parts = [tap_val]
        if len(nontaps) >= 2:
            non_train, non_val = split_validation(nontaps, plan.validation_fraction, self.rng)
            parts.append(non_train)
            val_parts.append(non_val)
        elif len(nontaps):
            parts.append(nontaps)
        event_train = SampleArrays.concat(parts)
        event_val = SampleArrays.concat(val_parts)
        if self.property_heads and len(tap_train) < 2:
            raise InputError("Training split too small for batch norm")

        history = self.history
        stale = 0
        for cycle in range(plan.max_cycles):
            if self.property_heads:
                for epoch in range(plan.property_epochs):
                    loss = self._epoch(tap_train, self.property_heads, PROPERTY_PHASE)
                    history.epochs.append(EpochRecord(cycle, PROPERTY_PHASE, epoch, loss))
                    log.info("cycle %d property epoch %d loss %.5f", cycle, epoch, loss)
            if self.has_event:
                for epoch in range(plan.event_epochs):
                    loss = self._epoch(event_train, ["event"], EVENT_PHASE)
                    history.epochs.append(EpochRecord(cycle, EVENT_PHASE, epoch, loss))
                    log.info("cycle %d event epoch %d loss %.5f", cycle, epoch, loss)

            val_loss = self.validation_loss(tap_val, event_val)
            improved = history.best_val_loss - val_loss > plan.min_delta
            history.cycles.append(CycleRecord(cycle, val_loss, improved))
            log.info("cycle %d validation loss %.5f%s", cycle, val_loss, " *" if improved else "")
            if improved:
                history.best_val_loss = val_loss
                stale = 0
            else:
                stale += 1
                if stale >= plan.patience:
                    history.stopped_early = True
                    log.info("Validation loss converged after %d cycles", cycle + 1)
                    break
        return TrainResult(self.graph, history, self.optimizers)


def _split_by_event(data: Sequence[Sample] | SampleArrays) -> tuple[SampleArrays, SampleArrays]:
    arrays = _as_arrays(data)
    return arrays.subset(arrays.is_tap), arrays.subset(~arrays.is_tap)


def train(
    graph: ModelGraph,
    tap_data: Sequence[Sample] | SampleArrays,
    nontap_data: Sequence[Sample] | SampleArrays,
    plan: TrainPlan | None = None,
) -> TrainResult:
    """Train ``graph`` in place with the alternating schedule."""
    plan = plan or TrainPlan()
    taps, nontaps = _as_arrays(tap_data), _as_arrays(nontap_data)
    if len(taps) and not taps.is_tap.all():
        raise InputError("tap_data contains non-tap samples")
    if len(nontaps) and nontaps.is_tap.any():
        raise InputError("nontap_data contains tap samples")
    return Trainer(graph, plan).fit(taps, nontaps)


def train_mixed(
    graph: ModelGraph, data: Sequence[Sample] | SampleArrays, plan: TrainPlan | None = None
) -> TrainResult:
    """:func:`train` on one list holding both taps and non-taps."""
    taps, nontaps = _split_by_event(data)
    return train(graph, taps, nontaps, plan)


def fine_tune(
    graph: ModelGraph, new_data: Sequence[Sample] | SampleArrays, plan: TrainPlan | None = None
) -> TrainResult:
    """
    Continue training a pre-trained graph on ``new_data`` (taps and non-taps)
    with the same schedule at a tenth of the learning rate and fresh
    optimizer state. All layers stay trainable.
    """
    plan = plan or TrainPlan()
    tuned = replace(plan, learning_rate=plan.learning_rate / 10.0)
    taps, nontaps = _split_by_event(new_data)
    return Trainer(graph, tuned).fit(taps, nontaps)
