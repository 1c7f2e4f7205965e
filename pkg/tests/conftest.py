"""
Shared fixtures for offscreen-tap tests
"""

import numpy as np
import pytest

from offscreen_tap.core.models import N_CHANNELS, period_us
from offscreen_tap.data.dataset import SampleArrays
from offscreen_tap.data.synth import SynthConfig, synthesize
from offscreen_tap.model.tapnet import TapNetConfig, build
from offscreen_tap.signal.features import DeviceRegistry, DeviceVector
from offscreen_tap.signal.pipeline import ImuFrame, WindowSnapshot
from offscreen_tap.train.trainer import TrainPlan


@pytest.fixture
def rng():
    """Seeded generator"""
    return np.random.default_rng(1234)


@pytest.fixture
def synth_config():
    """Default generator settings, seed 0"""
    return SynthConfig(seed=0)


@pytest.fixture
def quiet_config():
    """Noise-free generator with no per-person variation"""
    return SynthConfig(seed=0, noise_std=0.0, person_variation=0.0)


@pytest.fixture
def samples(synth_config):
    """Small labeled set spanning five participants"""
    return synthesize(synth_config, 120)


@pytest.fixture
def sample_arrays(samples):
    return SampleArrays.from_samples(samples)


@pytest.fixture
def tiny_plan():
    """Plan short enough for unit tests"""
    return TrainPlan(property_epochs=1, event_epochs=1, batch_size=16, max_cycles=2, seed=0)


@pytest.fixture
def small_graph():
    return build(TapNetConfig.load("model_small"))


@pytest.fixture
def device_a():
    return DeviceRegistry.default()["A"]


@pytest.fixture
def unit_device():
    """100 x 200 mm screen with the IMU at its centre"""
    return DeviceVector(100.0, 200.0, 50.0, 100.0, (0, 0, 1))


def _make_snapshot(values, rate=416.0, t0_us=0):
    """Window snapshot over a [n, 6] array (or a 1-D d_az signal) at a steady rate."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        full = np.zeros((len(values), N_CHANNELS))
        full[:, 2] = values
        values = full
    ts = t0_us + np.round(np.arange(len(values)) * period_us(rate)).astype(np.int64)
    return WindowSnapshot(ts, values, rate)


def _make_frames(raw, rate=416.0, t0_us=0):
    """ImuFrames over a [n, 6] raw array at a steady rate."""
    raw = np.asarray(raw, dtype=np.float64)
    ts = t0_us + np.round(np.arange(len(raw)) * period_us(rate)).astype(np.int64)
    return [ImuFrame(int(t), row[:3], row[3:]) for t, row in zip(ts, raw, strict=True)]


@pytest.fixture
def make_snapshot():
    return _make_snapshot


@pytest.fixture
def make_frames():
    return _make_frames
