"""
JSON-lines dataset store.

Line 1 is a header, every following line one sample::

    {"format": "offscreen-tap-samples", "schema_version": 1,
     "synth_config_hash": "<sha256 or null>", "count": 2}
    {"feature": [300 floats], "pad_before": 0, "pad_after": 0,
     "anchor_timestamp": null, "device": {...}, "label": {...} | null}

Feature values are stored at single precision (``%.9g`` of the float32
value), which round-trips exactly. Datasets from other sources can be
imported by writing this same schema.
"""

from __future__ import annotations

import json
import logging
import os
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from offscreen_tap.core.errors import DatasetError, InputError, SchemaMismatchError
from offscreen_tap.core.models import DEVICE_VECTOR_WIDTH, FEATURE_LEN
from offscreen_tap.data.labels import Sample, TapLabel
from offscreen_tap.signal.features import DeviceVector, FeatureVector, normalize_device

log = logging.getLogger(__name__)

DATASET_FORMAT = "offscreen-tap-samples"
DATASET_SCHEMA_VERSION = 1


def _feature_json(values: np.ndarray) -> str:
    return "[" + ",".join(f"{v:.9g}" for v in values.astype(np.float32)) + "]"


def _sample_line(sample: Sample) -> str:
    feature = sample.feature
    meta = {
        "pad_before": feature.pad_before,
        "pad_after": feature.pad_after,
        "anchor_timestamp": feature.anchor_timestamp,
        "device": sample.device.to_dict(),
        "label": sample.label.to_dict() if sample.label is not None else None,
    }
    body = json.dumps(meta, sort_keys=True, separators=(",", ":"))
    return '{"feature":' + _feature_json(feature.values) + "," + body[1:]


def _atomic_write_lines(path: Path, lines: Sequence[str]) -> None:
    tmp = path.with_name(f"{path.name}.{os.getpid()}.tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        for line in lines:
            f.write(line)
            f.write("\n")
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def save_dataset(
    path: str | Path, samples: Sequence[Sample], synth_config_hash: str | None = None
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "format": DATASET_FORMAT,
        "schema_version": DATASET_SCHEMA_VERSION,
        "synth_config_hash": synth_config_hash,
        "count": len(samples),
    }
    lines = [json.dumps(header, sort_keys=True)]
    lines += [_sample_line(s) for s in samples]
    _atomic_write_lines(path, lines)
    log.info("Wrote %d samples to %s", len(samples), path)
    return path


def _parse_sample(row: dict[str, Any], line: int) -> Sample:
    try:
        feature = FeatureVector(
            np.asarray(row["feature"], dtype=np.float64),
            pad_before=int(row.get("pad_before", 0)),
            pad_after=int(row.get("pad_after", 0)),
            anchor_timestamp=row.get("anchor_timestamp"),
        )
        device = DeviceVector.from_dict(row["device"])
        label = TapLabel.from_dict(row["label"]) if row.get("label") is not None else None
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetError(f"invalid sample: {e}", line) from e
    return Sample(feature=feature, device=device, label=label)


def read_header(path: str | Path) -> dict[str, Any]:
    with open(path, encoding="utf-8") as f:
        first = f.readline()
    return _parse_header(first, path)


def _parse_header(text: str, path: str | Path) -> dict[str, Any]:
    try:
        header = json.loads(text)
    except json.JSONDecodeError as e:
        raise DatasetError(f"{path}: unreadable header: {e}", 1) from e
    if not isinstance(header, dict) or header.get("format") != DATASET_FORMAT:
        raise DatasetError(f"{path}: not an offscreen-tap dataset", 1)
    version = header.get("schema_version")
    if version != DATASET_SCHEMA_VERSION:
        raise SchemaMismatchError(
            f"{path}: dataset schema version {version}, expected {DATASET_SCHEMA_VERSION}"
        )
    return header


def load_dataset(path: str | Path) -> list[Sample]:
    """
    Load a dataset file. A zero-byte file is an empty dataset. Corrupt rows
    and truncation raise DatasetError naming the 1-based line.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"Dataset not found: {path}")
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        return []

    header = _parse_header(lines[0], path)
    samples: list[Sample] = []
    for lineno, text in enumerate(lines[1:], start=2):
        if not text.strip():
            continue
        try:
            row = json.loads(text)
        except json.JSONDecodeError as e:
            raise DatasetError(f"{path}: corrupt row: {e.msg}", lineno) from e
        if not isinstance(row, dict):
            raise DatasetError(f"{path}: row is not an object", lineno)
        samples.append(_parse_sample(row, lineno))

    expected = header.get("count")
    if expected is not None and expected != len(samples):
        raise DatasetError(
            f"{path}: truncated, header promises {expected} samples, found {len(samples)}",
            len(lines) + 1,
        )
    log.info("Loaded %d samples from %s", len(samples), path)
    return samples


# ---------------------------------------------------------------------------
# Array view for training
# ---------------------------------------------------------------------------


@dataclass
class SampleArrays:
    """
    Column view of a sample list. Property targets of non-tap samples are -1
    (classes) or NaN (locations).
    """

    features: np.ndarray
    devices: np.ndarray
    is_tap: np.ndarray
    direction: np.ndarray
    finger: np.ndarray
    loc_class: np.ndarray
    loc_xy: np.ndarray
    participants: np.ndarray
    device_ids: np.ndarray

    def __len__(self) -> int:
        return len(self.features)

    def targets(self, head: str) -> np.ndarray:
        if head == "event":
            return self.is_tap.astype(np.int64)
        if head == "loc_reg":
            return self.loc_xy
        return getattr(self, head)

    def subset(self, index: np.ndarray) -> SampleArrays:
        return SampleArrays(**{k: v[index] for k, v in vars(self).items()})

    @classmethod
    def concat(cls, parts: Sequence[SampleArrays]) -> SampleArrays:
        keys = vars(parts[0]).keys()
        return cls(**{k: np.concatenate([getattr(p, k) for p in parts]) for k in keys})

    @classmethod
    def from_samples(cls, samples: Sequence[Sample]) -> SampleArrays:
        n = len(samples)
        features = np.zeros((n, FEATURE_LEN))
        devices = np.zeros((n, DEVICE_VECTOR_WIDTH))
        is_tap = np.zeros(n, dtype=bool)
        direction = np.full(n, -1, dtype=np.int64)
        finger = np.full(n, -1, dtype=np.int64)
        loc_class = np.full(n, -1, dtype=np.int64)
        loc_xy = np.full((n, 2), np.nan)
        participants = np.empty(n, dtype=object)
        device_ids = np.empty(n, dtype=object)
        normalized: dict[DeviceVector, np.ndarray] = {}
        for i, s in enumerate(samples):
            features[i] = s.feature.values
            if s.device not in normalized:
                normalized[s.device] = normalize_device(s.device)
            devices[i] = normalized[s.device]
            label = s.label
            if label is None:
                raise InputError(f"Sample {i} has no label")
            participants[i] = label.participant_id
            device_ids[i] = label.device_id
            if label.is_tap:
                assert label.direction and label.finger_part and label.loc_xy
                is_tap[i] = True
                direction[i] = label.direction.index
                finger[i] = label.finger_part.index
                loc_class[i] = label.loc_region
                loc_xy[i] = label.loc_xy
        return cls(
            features, devices, is_tap, direction, finger, loc_class, loc_xy,
            participants, device_ids,
        )
