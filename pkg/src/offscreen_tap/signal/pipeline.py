"""
Signal pipeline for offscreen-tap.

Raw six-channel IMU frames in, first-order derivative frames out, plus the
rolling window that gating and feature extraction read.

Derivatives are raw per-sample differences (not divided by the sample
interval). A gap of two nominal periods or more resets the derivative
baseline, so the first frame after a dropout is all-zero.
"""

from __future__ import annotations

import csv
import logging
import math
import threading
from collections import deque
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from offscreen_tap.core.errors import StreamError
from offscreen_tap.core.models import (
    DEFAULT_SAMPLE_RATE_HZ,
    GAP_FACTOR,
    N_CHANNELS,
    period_us,
    window_capacity,
)

log = logging.getLogger(__name__)

CSV_HEADER = ("t_us", "ax", "ay", "az", "gx", "gy", "gz")

Vec3 = tuple[float, float, float]


def _vec3(values: Iterable[float], name: str) -> Vec3:
    v = tuple(float(x) for x in values)
    if len(v) != 3:
        raise StreamError(f"{name} must have 3 components, got {len(v)}")
    if not all(math.isfinite(x) for x in v):
        raise StreamError(f"{name} contains non-finite values: {v}")
    return v  # type: ignore[return-value]


@dataclass(frozen=True)
class ImuFrame:
    """One raw IMU sample. accel in m/s^2, gyro in rad/s, timestamp in microseconds."""

    timestamp: int
    accel: Vec3
    gyro: Vec3

    def __post_init__(self) -> None:
        object.__setattr__(self, "timestamp", int(self.timestamp))
        object.__setattr__(self, "accel", _vec3(self.accel, "accel"))
        object.__setattr__(self, "gyro", _vec3(self.gyro, "gyro"))

    @property
    def values(self) -> tuple[float, ...]:
        return (*self.accel, *self.gyro)


@dataclass(frozen=True)
class DerivFrame:
    """Per-sample difference of two consecutive ImuFrames."""

    timestamp: int
    d_accel: Vec3
    d_gyro: Vec3

    def __post_init__(self) -> None:
        object.__setattr__(self, "timestamp", int(self.timestamp))
        object.__setattr__(self, "d_accel", _vec3(self.d_accel, "d_accel"))
        object.__setattr__(self, "d_gyro", _vec3(self.d_gyro, "d_gyro"))

    @property
    def values(self) -> tuple[float, ...]:
        return (*self.d_accel, *self.d_gyro)

    @classmethod
    def from_values(cls, timestamp: int, values: Sequence[float]) -> DerivFrame:
        return cls(timestamp, tuple(values[:3]), tuple(values[3:6]))  # type: ignore[arg-type]


def check_timestamps(timestamps: np.ndarray) -> None:
    if timestamps.size > 1 and np.any(np.diff(timestamps) <= 0):
        bad = int(np.argmax(np.diff(timestamps) <= 0)) + 1
        raise StreamError(f"Timestamps must be strictly increasing (frame {bad})")


def differentiate_array(
    timestamps: np.ndarray,
    values: np.ndarray,
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
) -> np.ndarray:
    """Array form of :func:`differentiate`: ``values`` is [n, 6], returns [n, 6]."""
    timestamps = np.asarray(timestamps, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != N_CHANNELS or len(values) != len(timestamps):
        raise StreamError(f"Expected [n, {N_CHANNELS}] values matching timestamps")
    if len(values) == 0:
        raise StreamError("Stream is empty")
    check_timestamps(timestamps)
    if not np.all(np.isfinite(values)):
        raise StreamError("Stream contains non-finite values")

    out = np.zeros_like(values)
    out[1:] = values[1:] - values[:-1]
    gaps = np.diff(timestamps) >= GAP_FACTOR * period_us(sample_rate_hz)
    if np.any(gaps):
        log.info("Stream has %d gap(s); derivative baseline reset", int(gaps.sum()))
        out[1:][gaps] = 0.0
    return out


def differentiate(
    stream: Sequence[ImuFrame], sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
) -> list[DerivFrame]:
    """First-order per-sample derivative of a raw stream; frame 0 is all-zero."""
    if not stream:
        raise StreamError("Stream is empty")
    timestamps = np.array([f.timestamp for f in stream], dtype=np.int64)
    values = np.array([f.values for f in stream], dtype=np.float64)
    d = differentiate_array(timestamps, values, sample_rate_hz)
    return [DerivFrame.from_values(int(t), row) for t, row in zip(timestamps, d, strict=True)]


@dataclass(frozen=True)
class WindowSnapshot:
    """Immutable view of a SignalWindow. ``values`` is [n, 6] in channel order."""

    timestamps: np.ndarray
    values: np.ndarray
    sample_rate_hz: float

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def discontinuous(self) -> bool:
        if len(self.timestamps) < 2:
            return False
        return bool(np.any(np.diff(self.timestamps) >= GAP_FACTOR * period_us(self.sample_rate_hz)))

    def since(self, timestamp: int) -> WindowSnapshot:
        """Frames strictly after ``timestamp``."""
        keep = self.timestamps > timestamp
        return WindowSnapshot(self.timestamps[keep], self.values[keep], self.sample_rate_hz)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class SignalWindow:
    """
    Rolling window of DerivFrames, oldest evicted first.

    Single writer; readers take :meth:`snapshot`, which is immutable and safe to
    hand to another thread.
    """

    def __init__(
        self,
        capacity: int | None = None,
        sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
    ):
        if sample_rate_hz <= 0:
            raise StreamError("sample_rate_hz must be positive")
        self.sample_rate_hz = float(sample_rate_hz)
        self.capacity = capacity if capacity is not None else window_capacity(sample_rate_hz)
        if self.capacity <= 0:
            raise StreamError("capacity must be positive")
        self._frames: deque[DerivFrame] = deque(maxlen=self.capacity)
        self._lock = threading.Lock()
        self._snapshot: WindowSnapshot | None = None

    def __len__(self) -> int:
        return len(self._frames)

    @property
    def frames(self) -> list[DerivFrame]:
        return list(self._frames)

    @property
    def last_timestamp(self) -> int | None:
        return self._frames[-1].timestamp if self._frames else None

    @property
    def discontinuous(self) -> bool:
        return self.snapshot().discontinuous

    def push(self, frame: DerivFrame) -> SignalWindow:
        with self._lock:
            last = self._frames[-1].timestamp if self._frames else None
            if last is not None and frame.timestamp <= last:
                raise StreamError(
                    f"Stale frame: timestamp {frame.timestamp} <= last {last}"
                )
            if last is not None and frame.timestamp - last >= GAP_FACTOR * period_us(
                self.sample_rate_hz
            ):
                log.debug("Discontinuity at t=%d us", frame.timestamp)
            self._frames.append(frame)
            self._snapshot = None
        return self

    def extend(self, frames: Iterable[DerivFrame]) -> SignalWindow:
        for frame in frames:
            self.push(frame)
        return self

    def snapshot(self) -> WindowSnapshot:
        with self._lock:
            if self._snapshot is None:
                ts = np.array([f.timestamp for f in self._frames], dtype=np.int64)
                vals = np.array([f.values for f in self._frames], dtype=np.float64)
                self._snapshot = WindowSnapshot(
                    _frozen(ts), _frozen(vals.reshape(-1, N_CHANNELS)), self.sample_rate_hz
                )
            return self._snapshot

    @classmethod
    def from_arrays(
        cls,
        timestamps: np.ndarray,
        values: np.ndarray,
        sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
        capacity: int | None = None,
    ) -> SignalWindow:
        """Window holding the given derivative frames (capacity defaults to their count)."""
        window = cls(capacity or max(len(timestamps), 1), sample_rate_hz)
        for t, row in zip(timestamps, values, strict=True):
            window.push(DerivFrame.from_values(int(t), row))
        return window


def as_snapshot(window: SignalWindow | WindowSnapshot) -> WindowSnapshot:
    return window.snapshot() if isinstance(window, SignalWindow) else window


# ---------------------------------------------------------------------------
# Stream CSV
# ---------------------------------------------------------------------------


def read_stream_csv(path: str | Path) -> list[ImuFrame]:
    """Read a ``t_us,ax,ay,az,gx,gy,gz`` stream file."""
    frames: list[ImuFrame] = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise StreamError(f"{path}: expected header {','.join(CSV_HEADER)}")
        last: int | None = None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise StreamError(f"{path}: line {lineno}: expected 7 columns, got {len(row)}")
            try:
                t = int(row[0])
                vals = [float(x) for x in row[1:]]
                frame = ImuFrame(t, vals[:3], vals[3:])  # type: ignore[arg-type]
            except (ValueError, StreamError) as e:
                raise StreamError(f"{path}: line {lineno}: {e}") from e
            if last is not None and t <= last:
                raise StreamError(f"{path}: line {lineno}: non-monotonic timestamp {t}")
            last = t
            frames.append(frame)
    log.info("Read %d frames from %s", len(frames), path)
    return frames


def write_stream_csv(path: str | Path, frames: Iterable[ImuFrame]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_HEADER)
        for frame in frames:
            writer.writerow([frame.timestamp, *(f"{v:.9g}" for v in frame.values)])
