"""
Streaming tap detector.

Raw frames -> derivative -> 150 ms window -> gate -> aligned feature. A
candidate is emitted once the 44 post-anchor samples have arrived; the
impulse that produced it is then suppressed so a tap fires once.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Iterator
from dataclasses import dataclass

import numpy as np

from offscreen_tap.core.models import (
    ANCHOR_CHANNEL,
    DEFAULT_SAMPLE_RATE_HZ,
    GAP_FACTOR,
    POST_ANCHOR_SAMPLES,
    period_us,
)
from offscreen_tap.signal.features import FeatureVector, build_feature
from offscreen_tap.signal.gating import GateConfig, GateDecision, StreamingThreshold, gate
from offscreen_tap.signal.pipeline import DerivFrame, ImuFrame, SignalWindow, WindowSnapshot

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TapCandidate:
    """A gated, aligned tap-like event."""

    feature: FeatureVector
    decision: GateDecision
    anchor_timestamp: int
    anchor_frame: int
    emitted_at_us: int

    @property
    def wait_ms(self) -> float:
        """Time spent waiting for the feature window to fill after the anchor."""
        return (self.emitted_at_us - self.anchor_timestamp) / 1000.0


class IncrementalDifferentiator:
    """Frame-by-frame form of :func:`offscreen_tap.signal.pipeline.differentiate`."""

    def __init__(self, sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ):
        self.gap_us = GAP_FACTOR * period_us(sample_rate_hz)
        self._prev: ImuFrame | None = None

    def __call__(self, frame: ImuFrame) -> DerivFrame:
        prev, self._prev = self._prev, frame
        if prev is None or frame.timestamp - prev.timestamp >= self.gap_us:
            return DerivFrame(frame.timestamp, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))
        d = np.subtract(frame.values, prev.values)
        return DerivFrame.from_values(frame.timestamp, d)


class TapDetector:
    def __init__(
        self,
        gate_config: GateConfig | None = None,
        sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
        capacity: int | None = None,
    ):
        self.gate_config = gate_config or GateConfig()
        self.sample_rate_hz = sample_rate_hz
        self.window = SignalWindow(capacity, sample_rate_hz)
        self.threshold = StreamingThreshold(self.gate_config, sample_rate_hz)
        self.differentiate = IncrementalDifferentiator(sample_rate_hz)
        self.frames_seen = 0
        self._suppress_until = np.iinfo(np.int64).min

    def _pending(self) -> tuple[WindowSnapshot, GateDecision] | None:
        snap = self.window.snapshot().since(self._suppress_until)
        if len(snap) < 3:
            return None
        decision = gate(snap, self.threshold.resolved())
        if not decision.passed:
            return None
        return snap, decision

    def _emit(self, snap: WindowSnapshot, decision: GateDecision) -> TapCandidate:
        assert decision.anchor_index is not None and decision.impulse is not None
        feature = build_feature(snap, decision.anchor_index)
        anchor_us = int(snap.timestamps[decision.anchor_index])
        self._suppress_until = max(decision.impulse.end, anchor_us)
        candidate = TapCandidate(
            feature=feature,
            decision=decision,
            anchor_timestamp=int(snap.timestamps[decision.anchor_index]),
            anchor_frame=self.frames_seen - len(snap) + decision.anchor_index,
            emitted_at_us=int(snap.timestamps[-1]),
        )
        log.debug("Tap candidate at t=%d us", candidate.anchor_timestamp)
        return candidate

    def push(self, frame: DerivFrame) -> TapCandidate | None:
        self.window.push(frame)
        self.frames_seen += 1
        self.threshold.update(frame.values[ANCHOR_CHANNEL])
        pending = self._pending()
        if pending is None:
            return None
        snap, decision = pending
        assert decision.anchor_index is not None
        if len(snap) - 1 - decision.anchor_index < POST_ANCHOR_SAMPLES:
            return None
        return self._emit(snap, decision)

    def push_raw(self, frame: ImuFrame) -> TapCandidate | None:
        return self.push(self.differentiate(frame))

    def flush(self) -> TapCandidate | None:
        """End of stream: emit a pending candidate, zero-padded on the right."""
        pending = self._pending()
        return self._emit(*pending) if pending else None

    def run(self, frames: Iterable[ImuFrame]) -> list[TapCandidate]:
        out = [c for c in (self.push_raw(f) for f in frames) if c is not None]
        last = self.flush()
        if last is not None:
            out.append(last)
        return out


def gate_stream(
    frames: Iterable[ImuFrame],
    config: GateConfig | None = None,
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
    hop: int = 1,
) -> Iterator[tuple[int, GateDecision, int | None]]:
    """
    Gate every ``hop``-th window position of a raw stream.

    Yields (t_us, decision, anchor frame index in the stream or None).
    """
    config = config or GateConfig()
    window = SignalWindow(None, sample_rate_hz)
    threshold = StreamingThreshold(config, sample_rate_hz)
    diff = IncrementalDifferentiator(sample_rate_hz)
    for i, frame in enumerate(frames):
        d = diff(frame)
        window.push(d)
        threshold.update(d.values[ANCHOR_CHANNEL])
        if len(window) < 3 or (i + 1) % hop:
            continue
        snap = window.snapshot()
        decision = gate(snap, threshold.resolved())
        anchor = None
        if decision.anchor_index is not None:
            anchor = i + 1 - len(snap) + decision.anchor_index
        yield frame.timestamp, decision, anchor
