"""
offscreen_tap.core - Shared constants, errors and config helpers.
"""

from offscreen_tap.core.config import config_hash, load_yaml, resolve_preset
from offscreen_tap.core.errors import (
    AlignmentError,
    ConfigError,
    DatasetError,
    InputError,
    SchemaMismatchError,
    ShapeError,
    StreamError,
    TapError,
    TrainingFault,
)
from offscreen_tap.core.manifest import RunManifest, manifest_path
from offscreen_tap.core.models import (
    ALL_HEADS,
    ANCHOR_INDEX,
    DEFAULT_SAMPLE_RATE_HZ,
    FEATURE_LEN,
    PROPERTY_HEADS,
    Direction,
    FingerPart,
    Head,
)

__all__ = [
    "ALL_HEADS",
    "ANCHOR_INDEX",
    "DEFAULT_SAMPLE_RATE_HZ",
    "FEATURE_LEN",
    "PROPERTY_HEADS",
    "RunManifest",
    "AlignmentError",
    "ConfigError",
    "DatasetError",
    "Direction",
    "FingerPart",
    "Head",
    "InputError",
    "SchemaMismatchError",
    "ShapeError",
    "StreamError",
    "TapError",
    "TrainingFault",
    "config_hash",
    "load_yaml",
    "manifest_path",
    "resolve_preset",
]
