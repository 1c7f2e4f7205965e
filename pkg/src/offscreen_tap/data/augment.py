"""
Training-time augmentation.

Shifting every channel segment by the same number of samples helps; scaling
amplitudes does not, so ``augment_scale`` exists but training leaves it off
unless asked.
"""

from __future__ import annotations

import numpy as np

from offscreen_tap.core.errors import InputError
from offscreen_tap.core.models import FEATURE_LEN, N_CHANNELS, SEGMENT_LEN
from offscreen_tap.data.labels import Sample
from offscreen_tap.signal.features import FeatureVector

DEFAULT_MAX_SHIFT = 5


def _check_max_shift(max_shift: int) -> None:
    if not 0 <= max_shift < SEGMENT_LEN:
        raise InputError(f"max_shift must be in [0, {SEGMENT_LEN}), got {max_shift}")


def shift_features(features: np.ndarray, shifts: np.ndarray | int) -> np.ndarray:
    """
    Shift each 50-sample channel segment of ``features`` ([N, 300] or [300])
    right by ``shifts`` (per row, negative = left), zero-filling the vacated edge.
    """
    single = features.ndim == 1
    x = np.atleast_2d(features).reshape(-1, N_CHANNELS, SEGMENT_LEN)
    shifts = np.broadcast_to(np.asarray(shifts, dtype=np.int64), (x.shape[0],))
    out = np.zeros_like(x)
    for k in np.unique(shifts):
        rows = shifts == k
        if k >= 0:
            out[rows, :, k:] = x[rows, :, : SEGMENT_LEN - k]
        else:
            out[rows, :, :k] = x[rows, :, -k:]
    out = out.reshape(-1, FEATURE_LEN)
    return out[0] if single else out


def augment_shift(
    sample: Sample, max_shift: int = DEFAULT_MAX_SHIFT, rng: np.random.Generator | None = None
) -> Sample:
    """Copy of ``sample`` with a uniform shift in [-max_shift, max_shift]; label unchanged."""
    _check_max_shift(max_shift)
    rng = rng or np.random.default_rng()
    k = int(rng.integers(-max_shift, max_shift + 1))
    return shifted(sample, k)


def shifted(sample: Sample, k: int) -> Sample:
    _check_max_shift(abs(k))
    feature = sample.feature
    return Sample(
        feature=FeatureVector(
            shift_features(feature.values, k),
            pad_before=feature.pad_before,
            pad_after=feature.pad_after,
            anchor_timestamp=feature.anchor_timestamp,
        ),
        device=sample.device,
        label=sample.label,
    )


def augment_scale(
    sample: Sample, max_scale: float = 0.2, rng: np.random.Generator | None = None
) -> Sample:
    """Copy of ``sample`` with amplitudes scaled by a factor in [1 - s, 1 + s]."""
    if not 0.0 <= max_scale < 1.0:
        raise InputError(f"max_scale must be in [0, 1), got {max_scale}")
    rng = rng or np.random.default_rng()
    factor = float(rng.uniform(1.0 - max_scale, 1.0 + max_scale))
    feature = sample.feature
    return Sample(
        feature=FeatureVector(
            feature.values * factor,
            pad_before=feature.pad_before,
            pad_after=feature.pad_after,
            anchor_timestamp=feature.anchor_timestamp,
        ),
        device=sample.device,
        label=sample.label,
    )


def augment_batch(
    features: np.ndarray,
    rng: np.random.Generator,
    max_shift: int = DEFAULT_MAX_SHIFT,
    max_scale: float = 0.0,
) -> np.ndarray:
    """Vectorized per-row shift (and optional scale) of an [N, 300] batch."""
    _check_max_shift(max_shift)
    out = features
    if max_shift:
        out = shift_features(out, rng.integers(-max_shift, max_shift + 1, size=len(out)))
    if max_scale:
        out = out * rng.uniform(1.0 - max_scale, 1.0 + max_scale, size=(len(out), 1))
    return out
