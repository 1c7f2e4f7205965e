"""
Signal gating for offscreen-tap.

Cheap pre-filter on the accelerometer z-derivative: a window passes when
it holds an impulse (a run of extrema whose adjacent gaps are shorter than
``t_v``) containing at least one supra-threshold peak. High recall, low
precision; the network decides the rest.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Any, Literal

import numpy as np

from offscreen_tap.core.config import check_keys
from offscreen_tap.core.errors import ConfigError
from offscreen_tap.core.models import ANCHOR_CHANNEL, DEFAULT_SAMPLE_RATE_HZ
from offscreen_tap.signal.pipeline import SignalWindow, WindowSnapshot, as_snapshot

log = logging.getLogger(__name__)


class ExtremumKind(Enum):
    PEAK = "peak"
    VALLEY = "valley"


@dataclass(frozen=True)
class Extremum:
    index: int
    timestamp: int
    value: float
    kind: ExtremumKind


@dataclass(frozen=True)
class Impulse:
    """Maximal run of extrema whose adjacent gaps are below t_v."""

    extrema: tuple[Extremum, ...]

    def __post_init__(self) -> None:
        if not self.extrema:
            raise ValueError("An impulse holds at least one extremum")

    @property
    def start(self) -> int:
        return self.extrema[0].timestamp

    @property
    def end(self) -> int:
        return self.extrema[-1].timestamp

    @property
    def peaks(self) -> list[Extremum]:
        return [e for e in self.extrema if e.kind is ExtremumKind.PEAK]


@dataclass
class GateConfig:
    """
    Gating parameters.

    ``peak_threshold`` / ``valley_threshold`` left as None are adaptive:
    ``std_multiplier`` x the standard deviation of the gating signal over the
    last ``history_s`` seconds, floored at ``threshold_floor``.
    """

    t_v_ms: float = 80.0
    peak_threshold: float | None = None
    valley_threshold: float | None = None
    threshold_floor: float = 1.0
    std_multiplier: float = 3.0
    history_s: float = 1.0
    signal: Literal["derivative", "raw"] = "derivative"
    anchor_mode: Literal["max", "first"] = "max"

    def __post_init__(self) -> None:
        if not self.t_v_ms > 0:
            raise ConfigError("t_v_ms must be positive")
        for name in ("peak_threshold", "valley_threshold"):
            value = getattr(self, name)
            if value is not None and (value < 0 or not math.isfinite(value)):
                raise ConfigError(f"{name} must be >= 0")
        if self.threshold_floor < 0 or self.std_multiplier < 0:
            raise ConfigError("threshold_floor and std_multiplier must be >= 0")
        if self.signal not in ("derivative", "raw"):
            raise ConfigError(f"Unknown gating signal: {self.signal}")
        if self.anchor_mode not in ("max", "first"):
            raise ConfigError(f"Unknown anchor mode: {self.anchor_mode}")

    @property
    def t_v_us(self) -> float:
        return self.t_v_ms * 1000.0

    @property
    def adaptive(self) -> bool:
        return self.peak_threshold is None or self.valley_threshold is None

    def adaptive_threshold(self, history: np.ndarray) -> float:
        std = float(np.std(history)) if len(history) > 1 else 0.0
        return max(self.threshold_floor, self.std_multiplier * std)

    def resolve(self, history: np.ndarray) -> GateConfig:
        """Copy with both thresholds fixed, adaptive ones computed from ``history``."""
        if not self.adaptive:
            return self
        level = self.adaptive_threshold(np.asarray(history, dtype=np.float64))
        return replace(
            self,
            peak_threshold=self.peak_threshold if self.peak_threshold is not None else level,
            valley_threshold=(
                self.valley_threshold if self.valley_threshold is not None else level
            ),
        )

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> GateConfig:
        check_keys(cls, data)
        return cls(**data)


@dataclass(frozen=True)
class GateDecision:
    passed: bool
    anchor_index: int | None = None
    anchor_timestamp: int | None = None
    impulse: Impulse | None = None
    peak_threshold: float = 0.0
    valley_threshold: float = 0.0
    impulses: tuple[Impulse, ...] = field(default=(), repr=False)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "reject"


def _split_signal(
    z_signal: Sequence[tuple[int, float]] | np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(z_signal, dtype=np.float64)
    if arr.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("z_signal must be a sequence of (timestamp, value) pairs")
    return arr[:, 0].astype(np.int64), arr[:, 1]


def _scan_extrema(
    timestamps: np.ndarray, values: np.ndarray, peak_threshold: float, valley_threshold: float
) -> list[Extremum]:
    # Single pass. A plateau reports its first sample.
    out: list[Extremum] = []
    direction = 0
    plateau_start: int | None = None
    for i in range(1, len(values)):
        step = values[i] - values[i - 1]
        if step == 0:
            if plateau_start is None:
                plateau_start = i - 1
            continue
        turn = plateau_start if plateau_start is not None else i - 1
        if step > 0:
            if direction < 0 and values[turn] <= -valley_threshold:
                out.append(
                    Extremum(turn, int(timestamps[turn]), float(values[turn]), ExtremumKind.VALLEY)
                )
            direction = 1
        else:
            if direction > 0 and values[turn] >= peak_threshold:
                out.append(
                    Extremum(turn, int(timestamps[turn]), float(values[turn]), ExtremumKind.PEAK)
                )
            direction = -1
        plateau_start = None
    return out


def detect_extrema(
    z_signal: Sequence[tuple[int, float]] | np.ndarray, config: GateConfig
) -> list[Extremum]:
    """
    Local maxima >= peak_threshold and local minima <= -valley_threshold, in
    index order. Adaptive thresholds are resolved against ``z_signal`` itself.
    Signals shorter than 3 samples yield no extrema.
    """
    timestamps, values = _split_signal(z_signal)
    if len(values) < 3:
        return []
    resolved = config.resolve(values)
    assert resolved.peak_threshold is not None and resolved.valley_threshold is not None
    return _scan_extrema(timestamps, values, resolved.peak_threshold, resolved.valley_threshold)


def group_impulses(extrema: Sequence[Extremum], t_v_us: float) -> list[Impulse]:
    """Partition time-ordered extrema into maximal runs with adjacent gaps < t_v."""
    impulses: list[Impulse] = []
    run: list[Extremum] = []
    for e in extrema:
        if run and e.timestamp - run[-1].timestamp >= t_v_us:
            impulses.append(Impulse(tuple(run)))
            run = []
        run.append(e)
    if run:
        impulses.append(Impulse(tuple(run)))
    return impulses


def gating_signal(snapshot: WindowSnapshot, config: GateConfig) -> np.ndarray:
    """The d_az channel, or the reconstructed mean-removed raw z-axis."""
    z = snapshot.values[:, ANCHOR_CHANNEL]
    if config.signal == "raw":
        raw = np.cumsum(z)
        return raw - raw.mean()
    return np.asarray(z, dtype=np.float64)


def gate(window: SignalWindow | WindowSnapshot, config: GateConfig | None = None) -> GateDecision:
    """
    Pass iff some impulse holds a peak. The anchor is taken from the earliest
    such impulse: its largest peak (``anchor_mode="max"``) or its first one.
    """
    config = config or GateConfig()
    snap = as_snapshot(window)
    if len(snap) < 3:
        return GateDecision(passed=False)

    z = gating_signal(snap, config)
    resolved = config.resolve(z)
    assert resolved.peak_threshold is not None and resolved.valley_threshold is not None
    extrema = _scan_extrema(
        snap.timestamps, z, resolved.peak_threshold, resolved.valley_threshold
    )
    impulses = group_impulses(extrema, config.t_v_us)
    for impulse in impulses:
        peaks = impulse.peaks
        if not peaks:
            continue
        anchor = max(peaks, key=lambda e: e.value) if config.anchor_mode == "max" else peaks[0]
        return GateDecision(
            passed=True,
            anchor_index=anchor.index,
            anchor_timestamp=anchor.timestamp,
            impulse=impulse,
            peak_threshold=resolved.peak_threshold,
            valley_threshold=resolved.valley_threshold,
            impulses=tuple(impulses),
        )
    return GateDecision(
        passed=False,
        peak_threshold=resolved.peak_threshold,
        valley_threshold=resolved.valley_threshold,
        impulses=tuple(impulses),
    )


class StreamingThreshold:
    """Running one-second history of the gating signal for adaptive thresholds."""

    def __init__(self, config: GateConfig, sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ):
        self.config = config
        self._history: deque[float] = deque(maxlen=max(3, round(config.history_s * sample_rate_hz)))

    def update(self, value: float) -> None:
        self._history.append(float(value))

    def resolved(self) -> GateConfig:
        return self.config.resolve(np.fromiter(self._history, dtype=np.float64))
