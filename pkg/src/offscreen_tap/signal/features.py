"""
Feature builder for offscreen-tap.

Layout of the 300-element feature vector: the six derivative channels
(d_ax, d_ay, d_az, d_gx, d_gy, d_gz), 50 samples each, concatenated in that
order. Each segment spans [anchor - 5, anchor + 44], so the d_az anchor peak
lands at global index 105 (the 106th element). Samples outside the window
are zero-padded and the padding is recorded on the vector.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from offscreen_tap.core.config import load_yaml
from offscreen_tap.core.errors import AlignmentError, ConfigError, InputError
from offscreen_tap.core.models import (
    ANCHOR_INDEX,
    ANCHOR_OFFSET,
    DEFAULT_SAMPLE_RATE_HZ,
    DEVICE_SCALE_MM,
    DEVICE_VECTOR_WIDTH,
    FEATURE_LEN,
    N_CHANNELS,
    SEGMENT_LEN,
    period_us,
)
from offscreen_tap.signal.pipeline import SignalWindow, WindowSnapshot, as_snapshot

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Aligned network input. ``values`` has exactly 300 elements."""

    values: np.ndarray
    pad_before: int = 0
    pad_after: int = 0
    anchor_timestamp: int | None = None
    anchor_global_index: int = field(default=ANCHOR_INDEX, init=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if values.shape != (FEATURE_LEN,):
            raise InputError(f"Feature vector must have {FEATURE_LEN} values, got {values.size}")
        object.__setattr__(self, "values", values)

    def channels(self) -> np.ndarray:
        """The [6, 50] channel matrix."""
        return split_channels(self.values)

    @property
    def anchor_value(self) -> float:
        return float(self.values[ANCHOR_INDEX])


def split_channels(values: np.ndarray) -> np.ndarray:
    return np.asarray(values).reshape(N_CHANNELS, SEGMENT_LEN)


def join_channels(channels: np.ndarray) -> np.ndarray:
    return np.asarray(channels).reshape(FEATURE_LEN)


def build_feature(window: SignalWindow | WindowSnapshot, anchor: int) -> FeatureVector:
    """Extract the 50-sample segment around ``anchor`` from every channel."""
    snap = as_snapshot(window)
    n = len(snap)
    if not 0 <= anchor < n:
        raise AlignmentError(f"Anchor {anchor} outside window of {n} frames")

    start = anchor - ANCHOR_OFFSET
    end = start + SEGMENT_LEN
    lo, hi = max(start, 0), min(end, n)
    segment = np.zeros((SEGMENT_LEN, N_CHANNELS))
    segment[lo - start : hi - start] = snap.values[lo:hi]
    pad_before, pad_after = lo - start, end - hi
    if pad_before or pad_after:
        log.debug("Zero-padded feature: %d before, %d after", pad_before, pad_after)
    return FeatureVector(
        values=segment.T.reshape(FEATURE_LEN),
        pad_before=pad_before,
        pad_after=pad_after,
        anchor_timestamp=int(snap.timestamps[anchor]),
    )


def feature_window(
    feature: FeatureVector | np.ndarray,
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
    t0_us: int = 0,
) -> WindowSnapshot:
    """The 50 frames a feature vector was cut from, as a window snapshot."""
    values = feature.values if isinstance(feature, FeatureVector) else np.asarray(feature)
    frames = split_channels(values).T.copy()
    step = period_us(sample_rate_hz)
    timestamps = t0_us + np.round(np.arange(SEGMENT_LEN) * step).astype(np.int64)
    return WindowSnapshot(timestamps, frames, sample_rate_hz)


def post_anchor_span_ms(sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ) -> float:
    """Time from the anchor to the last sample of the feature window."""
    return (SEGMENT_LEN - ANCHOR_OFFSET - 1) * 1000.0 / sample_rate_hz


# ---------------------------------------------------------------------------
# Device vector
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeviceVector:
    """Phone form factor. Positions are relative to the upper-left housing corner."""

    screen_w_mm: float
    screen_h_mm: float
    imu_pos_x_mm: float
    imu_pos_y_mm: float
    imu_dir: tuple[int, int, int] = (1, 1, 1)

    def __post_init__(self) -> None:
        if not (self.screen_w_mm > 0 and self.screen_h_mm > 0):
            raise InputError(
                f"Screen dimensions must be positive, got {self.screen_w_mm}x{self.screen_h_mm}"
            )
        imu_dir = tuple(int(s) for s in self.imu_dir)
        if len(imu_dir) != 3 or any(s not in (-1, 0, 1) for s in imu_dir):
            raise InputError(f"imu_dir components must be in {{-1, 0, 1}}, got {self.imu_dir}")
        object.__setattr__(self, "imu_dir", imu_dir)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["imu_dir"] = list(self.imu_dir)
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> DeviceVector:
        try:
            return cls(
                screen_w_mm=float(data["screen_w_mm"]),
                screen_h_mm=float(data["screen_h_mm"]),
                imu_pos_x_mm=float(data["imu_pos_x_mm"]),
                imu_pos_y_mm=float(data["imu_pos_y_mm"]),
                imu_dir=tuple(data.get("imu_dir", (1, 1, 1))),  # type: ignore[arg-type]
            )
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"Invalid device entry {data!r}: {e}") from e


def normalize_device(raw: DeviceVector) -> np.ndarray:
    """(w/200, h/200, x/w, y/h, dir_x, dir_y, dir_z), clipped to [-1, 1]."""
    if raw.screen_w_mm <= 0 or raw.screen_h_mm <= 0:
        raise InputError("Degenerate screen size")
    vec = np.array(
        [
            raw.screen_w_mm / DEVICE_SCALE_MM,
            raw.screen_h_mm / DEVICE_SCALE_MM,
            raw.imu_pos_x_mm / raw.screen_w_mm,
            raw.imu_pos_y_mm / raw.screen_h_mm,
            *raw.imu_dir,
        ],
        dtype=np.float64,
    )
    assert vec.shape == (DEVICE_VECTOR_WIDTH,)
    return np.clip(vec, -1.0, 1.0)


class DeviceRegistry:
    """
    device_id -> DeviceVector.

    The bundled entries for phones A and B are always present; files loaded
    with :meth:`load` add devices or override those entries.
    """

    def __init__(self, devices: dict[str, DeviceVector] | None = None):
        self.devices: dict[str, DeviceVector] = dict(devices or {})

    def __contains__(self, device_id: str) -> bool:
        return device_id in self.devices

    def __getitem__(self, device_id: str) -> DeviceVector:
        try:
            return self.devices[device_id]
        except KeyError:
            raise InputError(
                f"Unknown device {device_id!r}; known: {', '.join(sorted(self.devices))}"
            ) from None

    def ids(self) -> list[str]:
        return sorted(self.devices)

    def normalized(self, device_id: str) -> np.ndarray:
        return normalize_device(self[device_id])

    def to_dict(self) -> dict[str, Any]:
        return {k: v.to_dict() for k, v in sorted(self.devices.items())}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> DeviceRegistry:
        return cls({str(k): DeviceVector.from_dict(v) for k, v in data.items()})

    @classmethod
    def default(cls) -> DeviceRegistry:
        registry = cls.from_dict(load_yaml("devices"))
        if "A" not in registry or "B" not in registry:
            raise ConfigError("Bundled device registry must define devices A and B")
        return registry

    @classmethod
    def load(cls, path: str | Path | None = None) -> DeviceRegistry:
        registry = cls.default()
        if path is not None:
            registry.devices.update(cls.from_dict(load_yaml(path)).devices)
        return registry
