"""
Core constants and enums for offscreen-tap.

Shared by the signal pipeline, the model graph and the dataset schema.
"""

import math
from enum import Enum

# Stream
DEFAULT_SAMPLE_RATE_HZ = 416.0
WINDOW_MS = 150.0
GAP_FACTOR = 2.0  # a gap of GAP_FACTOR nominal periods or more breaks contiguity

# Feature layout: 6 derivative channels x 50 samples, anchor at local offset 5 of d_az
CHANNELS = ("d_ax", "d_ay", "d_az", "d_gx", "d_gy", "d_gz")
N_CHANNELS = len(CHANNELS)
SEGMENT_LEN = 50
FEATURE_LEN = N_CHANNELS * SEGMENT_LEN
ANCHOR_CHANNEL = 2
ANCHOR_OFFSET = 5
ANCHOR_INDEX = ANCHOR_CHANNEL * SEGMENT_LEN + ANCHOR_OFFSET  # 105
POST_ANCHOR_SAMPLES = SEGMENT_LEN - ANCHOR_OFFSET - 1  # 44

# Device vector normalisation
DEVICE_SCALE_MM = 200.0
DEVICE_VECTOR_WIDTH = 7

# Location grid
GRID_COLS = 5
GRID_ROWS = 7
N_REGIONS = GRID_COLS * GRID_ROWS


def window_capacity(sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ) -> int:
    """Window length in samples: ceil(0.150 s x rate), so 150 ms always fits. 63 at 416 Hz."""
    return math.ceil(WINDOW_MS * sample_rate_hz / 1000.0)


def period_us(sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ) -> float:
    return 1e6 / sample_rate_hz


class Direction(Enum):
    """Tap direction (6-class task)"""

    FRONT = "front"
    BACK = "back"
    LEFT = "left"
    RIGHT = "right"
    TOP = "top"
    BOTTOM = "bottom"

    @property
    def index(self) -> int:
        return list(Direction).index(self)


class FingerPart(Enum):
    """Finger part (2-class task)"""

    PAD = "pad"
    NAIL = "nail"

    @property
    def index(self) -> int:
        return list(FingerPart).index(self)


class Head(Enum):
    """Network output heads and their widths."""

    EVENT = "event"
    DIRECTION = "direction"
    FINGER = "finger"
    LOC_CLASS = "loc_class"
    LOC_REG = "loc_reg"

    @property
    def width(self) -> int:
        return HEAD_WIDTHS[self.value]

    @property
    def is_classifier(self) -> bool:
        return self is not Head.LOC_REG


HEAD_WIDTHS = {
    "event": 2,
    "direction": len(Direction),
    "finger": len(FingerPart),
    "loc_class": N_REGIONS,
    "loc_reg": 2,
}

PROPERTY_HEADS = ("direction", "finger", "loc_class", "loc_reg")
ALL_HEADS = ("event", *PROPERTY_HEADS)
