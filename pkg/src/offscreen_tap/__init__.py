"""
offscreen-tap -- Off-screen tap sensing from IMU streams
=========================================================
Gating, aligned feature extraction and a multi-task 1D CNN that predicts
whether a motion is a tap on the phone body, and if so its direction,
finger part and location.

Quick start::

    from offscreen_tap import SynthConfig, TapNetConfig, build, synthesize, train_mixed

    samples = synthesize(SynthConfig(seed=0), 2000)
    graph = build(TapNetConfig.load("model_small"))
    result = train_mixed(graph, samples)
"""

__version__ = "0.1.0"

# --- Eager imports (core, always available) ---
from offscreen_tap.core import (
    ALL_HEADS,
    ANCHOR_INDEX,
    DEFAULT_SAMPLE_RATE_HZ,
    FEATURE_LEN,
    ConfigError,
    Direction,
    FingerPart,
    InputError,
    RunManifest,
    SchemaMismatchError,
    TapError,
    TrainingFault,
)

# --- Lazy imports (numpy-heavy subpackages) ---
_LAZY_MODULES = {
    "GateConfig": "offscreen_tap.signal",
    "TapDetector": "offscreen_tap.signal",
    "DeviceRegistry": "offscreen_tap.signal",
    "build_feature": "offscreen_tap.signal",
    "gate": "offscreen_tap.signal",
    "ModelGraph": "offscreen_tap.nn",
    "load_checkpoint": "offscreen_tap.nn",
    "save_checkpoint": "offscreen_tap.nn",
    "TapNetConfig": "offscreen_tap.model",
    "build": "offscreen_tap.model",
    "forward": "offscreen_tap.model",
    "load_model": "offscreen_tap.model",
    "Sample": "offscreen_tap.data",
    "SynthConfig": "offscreen_tap.data",
    "load_dataset": "offscreen_tap.data",
    "save_dataset": "offscreen_tap.data",
    "synthesize": "offscreen_tap.data",
    "TrainPlan": "offscreen_tap.train",
    "evaluate": "offscreen_tap.train",
    "fine_tune": "offscreen_tap.train",
    "sweep": "offscreen_tap.train",
    "train": "offscreen_tap.train",
    "train_mixed": "offscreen_tap.train",
}


def __getattr__(name):
    module_path = _LAZY_MODULES.get(name)
    if module_path is not None:
        import importlib

        mod = importlib.import_module(module_path)
        return getattr(mod, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


__all__ = [
    # Version
    "__version__",
    # Core (eager)
    "ALL_HEADS",
    "ANCHOR_INDEX",
    "DEFAULT_SAMPLE_RATE_HZ",
    "FEATURE_LEN",
    "ConfigError",
    "Direction",
    "FingerPart",
    "InputError",
    "RunManifest",
    "SchemaMismatchError",
    "TapError",
    "TrainingFault",
    # Lazy
    "GateConfig",
    "TapDetector",
    "DeviceRegistry",
    "build_feature",
    "gate",
    "ModelGraph",
    "load_checkpoint",
    "save_checkpoint",
    "TapNetConfig",
    "build",
    "forward",
    "load_model",
    "Sample",
    "SynthConfig",
    "load_dataset",
    "save_dataset",
    "synthesize",
    "TrainPlan",
    "evaluate",
    "fine_tune",
    "sweep",
    "train",
    "train_mixed",
]
