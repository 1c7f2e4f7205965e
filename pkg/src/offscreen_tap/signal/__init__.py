"""
offscreen_tap.signal - IMU signal pipeline, gating and feature extraction.
"""

from offscreen_tap.signal.features import (
    DeviceRegistry,
    DeviceVector,
    FeatureVector,
    build_feature,
    feature_window,
    normalize_device,
)
from offscreen_tap.signal.gating import (
    Extremum,
    ExtremumKind,
    GateConfig,
    GateDecision,
    Impulse,
    detect_extrema,
    gate,
    group_impulses,
)
from offscreen_tap.signal.pipeline import (
    DerivFrame,
    ImuFrame,
    SignalWindow,
    WindowSnapshot,
    differentiate,
    read_stream_csv,
    write_stream_csv,
)
from offscreen_tap.signal.stream import TapCandidate, TapDetector, gate_stream

__all__ = [
    "DerivFrame",
    "DeviceRegistry",
    "DeviceVector",
    "Extremum",
    "ExtremumKind",
    "FeatureVector",
    "GateConfig",
    "GateDecision",
    "ImuFrame",
    "Impulse",
    "SignalWindow",
    "TapCandidate",
    "TapDetector",
    "WindowSnapshot",
    "build_feature",
    "detect_extrema",
    "differentiate",
    "feature_window",
    "gate",
    "gate_stream",
    "group_impulses",
    "normalize_device",
    "read_stream_csv",
    "write_stream_csv",
]
