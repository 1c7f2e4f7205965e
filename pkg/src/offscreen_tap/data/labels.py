"""
Labels, samples and the 5 x 7 location grid.

Region ids are row-major over 5 columns, so the region directly above or
below another differs by 5::

     0  1  2  3  4
     5  6  7  8  9
    ...
    30 31 32 33 34
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

from offscreen_tap.core.errors import InputError
from offscreen_tap.core.models import GRID_COLS, GRID_ROWS, N_REGIONS, Direction, FingerPart
from offscreen_tap.signal.features import DeviceVector, FeatureVector

# Collection condition tags and their allowed values. Tap force is a 1..5 level.
CONDITION_VALUES: dict[str, tuple[Any, ...]] = {
    "case": ("none", "case"),
    "grip": ("one_hand", "two_hand", "table"),
    "grip_force": ("light", "normal", "firm"),
    "tap_force": (1, 2, 3, 4, 5),
    "orientation": ("portrait", "landscape"),
}


def region_id(x_ratio: float, y_ratio: float) -> int:
    """Grid cell of a location given as screen-width / screen-height ratios."""
    for name, v in (("x_ratio", x_ratio), ("y_ratio", y_ratio)):
        if not (math.isfinite(v) and 0.0 <= v <= 1.0):
            raise InputError(f"{name} must be in [0, 1], got {v}")
    col = min(math.floor(GRID_COLS * x_ratio), GRID_COLS - 1)
    row = min(math.floor(GRID_ROWS * y_ratio), GRID_ROWS - 1)
    return GRID_COLS * row + col


def region_center(region: int) -> tuple[float, float]:
    if not 0 <= region < N_REGIONS:
        raise InputError(f"Region id must be in [0, {N_REGIONS}), got {region}")
    row, col = divmod(region, GRID_COLS)
    return (col + 0.5) / GRID_COLS, (row + 0.5) / GRID_ROWS


@dataclass(frozen=True)
class TapLabel:
    """
    Targets for one sample.

    Non-tap samples carry ``is_tap=False`` and no property labels. For taps,
    ``loc_region`` always equals ``region_id(*loc_xy)``.
    """

    is_tap: bool
    direction: Direction | None = None
    finger_part: FingerPart | None = None
    loc_region: int | None = None
    loc_xy: tuple[float, float] | None = None
    participant_id: str = "p0"
    device_id: str = "A"
    conditions: dict[str, Any] = field(default_factory=dict, hash=False)

    def __post_init__(self) -> None:
        props = (self.direction, self.finger_part, self.loc_region, self.loc_xy)
        if not self.is_tap:
            if any(p is not None for p in props):
                raise InputError("Non-tap labels carry no property labels")
        else:
            if any(p is None for p in props):
                raise InputError("Tap labels need direction, finger_part, loc_region and loc_xy")
            assert self.loc_xy is not None
            x, y = (float(v) for v in self.loc_xy)
            object.__setattr__(self, "loc_xy", (x, y))
            if self.loc_region != region_id(x, y):
                raise InputError(
                    f"loc_region {self.loc_region} inconsistent with loc_xy {self.loc_xy}"
                )
        for key, value in self.conditions.items():
            allowed = CONDITION_VALUES.get(key)
            if allowed is not None and value not in allowed:
                raise InputError(f"Condition {key}={value!r} not in {allowed}")

    @classmethod
    def tap(
        cls,
        direction: Direction,
        finger_part: FingerPart,
        loc_xy: tuple[float, float],
        participant_id: str = "p0",
        device_id: str = "A",
        conditions: dict[str, Any] | None = None,
    ) -> TapLabel:
        return cls(
            is_tap=True,
            direction=direction,
            finger_part=finger_part,
            loc_region=region_id(*loc_xy),
            loc_xy=loc_xy,
            participant_id=participant_id,
            device_id=device_id,
            conditions=dict(conditions or {}),
        )

    @classmethod
    def nontap(
        cls,
        participant_id: str = "p0",
        device_id: str = "A",
        conditions: dict[str, Any] | None = None,
    ) -> TapLabel:
        return cls(
            is_tap=False,
            participant_id=participant_id,
            device_id=device_id,
            conditions=dict(conditions or {}),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "is_tap": self.is_tap,
            "direction": self.direction.value if self.direction else None,
            "finger_part": self.finger_part.value if self.finger_part else None,
            "loc_region": self.loc_region,
            "loc_xy": list(self.loc_xy) if self.loc_xy else None,
            "participant_id": self.participant_id,
            "device_id": self.device_id,
            "conditions": dict(self.conditions),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TapLabel:
        try:
            loc_xy = data.get("loc_xy")
            return cls(
                is_tap=bool(data["is_tap"]),
                direction=Direction(data["direction"]) if data.get("direction") else None,
                finger_part=(
                    FingerPart(data["finger_part"]) if data.get("finger_part") else None
                ),
                loc_region=data.get("loc_region"),
                loc_xy=(float(loc_xy[0]), float(loc_xy[1])) if loc_xy is not None else None,
                participant_id=str(data.get("participant_id", "p0")),
                device_id=str(data.get("device_id", "A")),
                conditions=dict(data.get("conditions") or {}),
            )
        except (KeyError, TypeError, ValueError, IndexError) as e:
            raise InputError(f"Invalid label {data!r}: {e}") from e


@dataclass(frozen=True, eq=False)
class Sample:
    """Network input plus targets. ``label`` is None for unlabeled (extracted) samples."""

    feature: FeatureVector
    device: DeviceVector
    label: TapLabel | None = None

    @property
    def is_tap(self) -> bool:
        return self.label is not None and self.label.is_tap
