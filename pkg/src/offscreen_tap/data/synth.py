"""
Synthetic tap generator.

Windows are generated directly in the derivative domain (one 150 ms window
per sample, six channels). A tap is a damped-sinusoid impulse with a short
pre-rise so its largest d_az peak sits at a known anchor:

    d_az[a-2] = 0.1 A,  d_az[a-1] = 0.35 A,
    d_az[a+j] = A exp(-j dt / tau) cos(2 pi f j dt),   j >= 0

Class structure is controllable and separable:

* direction: oscillation frequency, lateral accel mix along the push axis,
  and the sign of the induced rotation;
* location: gyro magnitudes follow the torque r x F, with r the lever arm
  from the IMU to the tap point in mm;
* finger part: nail taps decay faster and ring higher;
* participants: seeded per-person channel gains, frequency scale and offsets;
* devices: screen size scales the resonance, IMU position sets the lever arm.

Every sample draws from its own generator seeded with (seed, first
participant, index), so a dataset is reproducible and any prefix of it is
stable.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from offscreen_tap.core.config import check_keys, load_yaml
from offscreen_tap.core.errors import ConfigError, InputError
from offscreen_tap.core.models import (
    ANCHOR_CHANNEL,
    ANCHOR_OFFSET,
    DEFAULT_SAMPLE_RATE_HZ,
    N_CHANNELS,
    POST_ANCHOR_SAMPLES,
    Direction,
    FingerPart,
    period_us,
    window_capacity,
)
from offscreen_tap.data.labels import CONDITION_VALUES, Sample, TapLabel
from offscreen_tap.signal.features import DeviceRegistry, DeviceVector, build_feature
from offscreen_tap.signal.gating import GateConfig, gate
from offscreen_tap.signal.pipeline import ImuFrame, WindowSnapshot

log = logging.getLogger(__name__)

NONTAP_KINDS = ("grasp", "rub", "release", "knock", "shake", "noise", "bump")
GRAVITY = 9.81

# Push direction of the finger on the housing, in sensor axes (y points down the screen).
DIRECTION_FORCE: dict[Direction, tuple[float, float, float]] = {
    Direction.FRONT: (0.0, 0.0, 1.0),
    Direction.BACK: (0.0, 0.0, -1.0),
    Direction.LEFT: (1.0, 0.0, 0.0),
    Direction.RIGHT: (-1.0, 0.0, 0.0),
    Direction.TOP: (0.0, 1.0, 0.0),
    Direction.BOTTOM: (0.0, -1.0, 0.0),
}


def _uniform_directions() -> dict[str, float]:
    return {d.value: 1.0 / len(Direction) for d in Direction}


def _default_frequencies() -> dict[str, float]:
    return {"front": 60.0, "back": 35.0, "left": 45.0, "right": 45.0, "top": 45.0, "bottom": 45.0}


def _default_nontap_kinds() -> dict[str, float]:
    return dict.fromkeys(NONTAP_KINDS, 1.0)


@dataclass
class SynthConfig:
    """Generator parameters. Ranges are ``[low, high]`` pairs."""

    seed: int = 0
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    n_participants: int = 5
    first_participant: int = 0
    devices: list[str] = field(default_factory=lambda: ["A"])
    nontap_fraction: float = 0.2
    direction_proportions: dict[str, float] = field(default_factory=_uniform_directions)
    nail_fraction: float = 0.5
    amplitude: list[float] = field(default_factory=lambda: [3.0, 8.0])
    damping_ms: list[float] = field(default_factory=lambda: [6.0, 10.0])
    direction_frequency_hz: dict[str, float] = field(default_factory=_default_frequencies)
    frequency_jitter: float = 0.08
    lateral_gain: float = 0.6
    lever_gain: float = 0.01
    nail_damping_factor: float = 0.5
    nail_frequency_factor: float = 1.4
    noise_std: float = 0.05
    person_variation: float = 0.15
    tap_force_levels: list[float] = field(default_factory=lambda: [0.6, 0.8, 1.0, 1.25, 1.5])
    nontap_kinds: dict[str, float] = field(default_factory=_default_nontap_kinds)
    anchor_range: list[int] = field(default_factory=lambda: [ANCHOR_OFFSET, 18])

    def __post_init__(self) -> None:
        for name in ("amplitude", "damping_ms", "anchor_range"):
            rng = getattr(self, name)
            if len(rng) != 2 or rng[0] > rng[1]:
                raise ConfigError(f"{name} must be a nonempty [low, high] range")
        if self.amplitude[0] < 0 or self.damping_ms[0] <= 0:
            raise ConfigError("amplitude must be >= 0 and damping_ms > 0")
        if self.sample_rate_hz <= 0 or self.n_participants < 1:
            raise ConfigError("sample_rate_hz and n_participants must be positive")
        if not self.devices:
            raise ConfigError("devices must not be empty")
        for name in ("nontap_fraction", "nail_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        if min(self.noise_std, self.person_variation, self.frequency_jitter) < 0:
            raise ConfigError("noise_std, person_variation and frequency_jitter must be >= 0")

        known = {d.value for d in Direction}
        if set(self.direction_proportions) - known or set(self.direction_frequency_hz) != known:
            raise ConfigError(f"direction keys must be among {sorted(known)}")
        props = list(self.direction_proportions.values())
        if any(p < 0 for p in props) or not math.isclose(sum(props), 1.0, abs_tol=1e-6):
            raise ConfigError("direction_proportions must be >= 0 and sum to 1")
        if any(f <= 0 for f in self.direction_frequency_hz.values()):
            raise ConfigError("direction frequencies must be positive")

        if set(self.nontap_kinds) - set(NONTAP_KINDS):
            raise ConfigError(f"nontap_kinds must be among {NONTAP_KINDS}")
        weights = list(self.nontap_kinds.values())
        if any(w < 0 for w in weights) or (self.nontap_fraction > 0 and sum(weights) <= 0):
            raise ConfigError("nontap_kinds weights must be >= 0 with a positive sum")
        if len(self.tap_force_levels) != len(CONDITION_VALUES["tap_force"]):
            raise ConfigError("tap_force_levels needs one multiplier per force level")

        capacity = window_capacity(self.sample_rate_hz)
        lo, hi = self.anchor_range
        if lo < ANCHOR_OFFSET or hi + POST_ANCHOR_SAMPLES > capacity - 1:
            raise ConfigError(
                f"anchor_range must lie in [{ANCHOR_OFFSET}, {capacity - 1 - POST_ANCHOR_SAMPLES}]"
            )

    @property
    def window_len(self) -> int:
        return window_capacity(self.sample_rate_hz)

    @property
    def participant_ids(self) -> list[str]:
        return [f"p{self.first_participant + k}" for k in range(self.n_participants)]

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SynthConfig:
        check_keys(cls, data)
        return cls(**data)

    @classmethod
    def load(cls, name_or_path: str | Path) -> SynthConfig:
        return cls.from_dict(load_yaml(name_or_path))


@dataclass(frozen=True)
class ParticipantTraits:
    """Latent per-person variation."""

    channel_gain: np.ndarray
    frequency_scale: float
    offset: np.ndarray


def participant_traits(config: SynthConfig, participant: int) -> ParticipantTraits:
    rng = np.random.default_rng([config.seed, 7919, participant])
    v = config.person_variation
    return ParticipantTraits(
        channel_gain=np.clip(1.0 + v * rng.standard_normal(N_CHANNELS), 0.75, 1.25),
        frequency_scale=float(np.clip(1.0 + 0.5 * v * rng.standard_normal(), 0.85, 1.15)),
        offset=0.1 * v * rng.standard_normal(N_CHANNELS),
    )


def device_frequency_scale(device: DeviceVector) -> float:
    """Larger housings resonate lower."""
    return math.sqrt(140.0 / device.screen_h_mm)


# ---------------------------------------------------------------------------
# Waveforms (derivative domain, length n)
# ---------------------------------------------------------------------------


def impulse(n: int, anchor: int, dt: float, tau_s: float, freq_hz: float) -> np.ndarray:
    """Unit tap impulse whose maximum (1.0) is at ``anchor``."""
    s = np.zeros(n)
    j = np.arange(n - anchor)
    s[anchor:] = np.exp(-j * dt / tau_s) * np.cos(2.0 * np.pi * freq_hz * j * dt)
    if anchor >= 1:
        s[anchor - 1] = 0.35
    if anchor >= 2:
        s[anchor - 2] = 0.1
    return s


def _draw_conditions(rng: np.random.Generator) -> dict[str, Any]:
    return {key: values[int(rng.integers(len(values)))] for key, values in CONDITION_VALUES.items()}


def _draw_location(rng: np.random.Generator, direction: Direction) -> tuple[float, float]:
    x, y = float(rng.uniform(0.0, 1.0)), float(rng.uniform(0.0, 1.0))
    # Side taps land on the corresponding edge.
    if direction is Direction.LEFT:
        x = 0.0
    elif direction is Direction.RIGHT:
        x = 1.0
    elif direction is Direction.TOP:
        y = 0.0
    elif direction is Direction.BOTTOM:
        y = 1.0
    return x, y


def tap_window(
    rng: np.random.Generator,
    config: SynthConfig,
    direction: Direction,
    finger: FingerPart,
    loc_xy: tuple[float, float],
    device: DeviceVector,
    traits: ParticipantTraits,
    conditions: dict[str, Any],
    anchor: int,
) -> np.ndarray:
    """Noise-free [window_len, 6] derivative window of one tap."""
    n = config.window_len
    dt = 1.0 / config.sample_rate_hz

    amp = rng.uniform(*config.amplitude)
    amp *= config.tap_force_levels[int(conditions.get("tap_force", 3)) - 1]
    tau = rng.uniform(*config.damping_ms) / 1000.0
    freq = config.direction_frequency_hz[direction.value]
    freq *= 1.0 + config.frequency_jitter * rng.uniform(-1.0, 1.0)
    freq *= traits.frequency_scale * device_frequency_scale(device)
    if finger is FingerPart.NAIL:
        tau *= config.nail_damping_factor
        freq *= config.nail_frequency_factor
    if conditions.get("case") == "case":
        freq *= 0.85
    tau *= {"light": 1.15, "firm": 0.8}.get(conditions.get("grip_force", "normal"), 1.0)

    pulse = amp * impulse(n, anchor, dt, tau, freq)
    fx, fy, fz = DIRECTION_FORCE[direction]
    lateral = config.lateral_gain
    accel = np.array([lateral * fx, lateral * fy, 1.0 if fz else 0.8])

    rx = loc_xy[0] * device.screen_w_mm - device.imu_pos_x_mm
    ry = loc_xy[1] * device.screen_h_mm - device.imu_pos_y_mm
    torque = np.cross([rx, ry, 0.0], [fx, fy, fz]) * config.lever_gain

    axes = np.asarray(device.imu_dir, dtype=np.float64)
    mix = np.concatenate([accel * axes, torque * axes])
    # d_az stays positive-first so gating always finds the anchor peak.
    mix[ANCHOR_CHANNEL] = abs(mix[ANCHOR_CHANNEL])
    return pulse[:, None] * (mix * traits.channel_gain)[None, :]


def nontap_window(
    rng: np.random.Generator, config: SynthConfig, kind: str, traits: ParticipantTraits
) -> np.ndarray:
    """Noise-free [window_len, 6] derivative window of non-tap motion."""
    n = config.window_len
    dt = 1.0 / config.sample_rate_hz
    t = np.arange(n) * dt
    out = np.zeros((n, N_CHANNELS))
    mix = rng.uniform(-1.0, 1.0, N_CHANNELS)

    if kind == "shake":
        # slow sinusoid in the raw signal; its per-sample difference stays small
        a, f = rng.uniform(1.0, 4.0), rng.uniform(2.0, 6.0)
        phase = rng.uniform(0, 2 * np.pi)
        raw = a * np.sin(2 * np.pi * f * t + phase)
        out = np.diff(raw, prepend=raw[0])[:, None] * mix[None, :]
    elif kind == "bump":
        a = rng.uniform(0.2, 0.6)
        anchor = int(rng.integers(config.anchor_range[0], config.anchor_range[1] + 1))
        out = a * impulse(n, anchor, dt, 0.008, 40.0)[:, None] * np.abs(mix)[None, :]
    elif kind == "grasp":
        a, width = rng.uniform(0.5, 2.5), rng.uniform(0.015, 0.030)
        center = rng.uniform(0.3, 0.7) * n * dt
        g = -(t - center) / width * np.exp(-0.5 * ((t - center) / width) ** 2)
        out = a * g[:, None] * mix[None, :]
    elif kind == "rub":
        a, f = rng.uniform(0.3, 1.2), rng.uniform(15.0, 30.0)
        phases = rng.uniform(0, 2 * np.pi, N_CHANNELS)
        out = a * np.sin(2 * np.pi * f * t[:, None] + phases[None, :]) * mix[None, :]
        out[:, ANCHOR_CHANNEL] *= 0.5
    elif kind == "release":
        a = rng.uniform(1.0, 3.0)
        start = int(rng.integers(5, n // 3))
        down = max(int(0.020 / dt), 2)
        up = max(int(0.040 / dt), 2)
        profile = np.zeros(n)
        seg = profile[start : start + down]
        seg[:] = -np.sin(np.linspace(0, np.pi, down))[: len(seg)]
        seg2 = profile[start + down : start + down + up]
        seg2[:] = 0.5 * np.sin(np.linspace(0, np.pi, up))[: len(seg2)]
        out = a * profile[:, None] * mix[None, :]
    elif kind == "knock":
        a = rng.uniform(1.0, 4.0)
        anchor = int(rng.integers(config.anchor_range[0], config.anchor_range[1] + 1))
        pulse = impulse(n, anchor, dt, 0.003, rng.uniform(100.0, 150.0))
        out[:, :3] = a * pulse[:, None]
    elif kind != "noise":
        raise ConfigError(f"Unknown non-tap kind: {kind}")
    return out * traits.channel_gain[None, :]


# ---------------------------------------------------------------------------
# Samples
# ---------------------------------------------------------------------------


@dataclass
class _Draw:
    window: np.ndarray
    anchor: int
    label: TapLabel
    device: DeviceVector


class _Generator:
    def __init__(self, config: SynthConfig, registry: DeviceRegistry | None = None):
        self.config = config
        self.registry = registry or DeviceRegistry.default()
        for device_id in config.devices:
            self.registry[device_id]  # raises on unknown ids
        self.traits = {
            pid: participant_traits(config, config.first_participant + k)
            for k, pid in enumerate(config.participant_ids)
        }
        self.directions = [Direction(d) for d in config.direction_proportions]
        direction_w = np.array(list(config.direction_proportions.values()), dtype=np.float64)
        self.direction_p = direction_w / direction_w.sum()
        kinds = list(config.nontap_kinds)
        weights = np.array([config.nontap_kinds[k] for k in kinds], dtype=np.float64)
        self.kinds = kinds
        self.kind_p = weights / weights.sum() if weights.sum() > 0 else weights

    def draw(self, index: int) -> _Draw:
        config = self.config
        rng = np.random.default_rng([config.seed, config.first_participant, index])
        pids = config.participant_ids
        pid = pids[index % len(pids)]
        traits = self.traits[pid]
        device_id = config.devices[int(rng.integers(len(config.devices)))]
        device = self.registry[device_id]
        conditions = _draw_conditions(rng)
        n = config.window_len

        if rng.uniform() >= config.nontap_fraction:
            direction = self.directions[int(rng.choice(len(self.directions), p=self.direction_p))]
            finger = FingerPart.NAIL if rng.uniform() < config.nail_fraction else FingerPart.PAD
            loc_xy = _draw_location(rng, direction)
            anchor = int(rng.integers(config.anchor_range[0], config.anchor_range[1] + 1))
            window = tap_window(
                rng, config, direction, finger, loc_xy, device, traits, conditions, anchor
            )
            label = TapLabel.tap(direction, finger, loc_xy, pid, device_id, conditions)
        else:
            kind = self.kinds[int(rng.choice(len(self.kinds), p=self.kind_p))]
            window = nontap_window(rng, config, kind, traits)
            anchor = -1
            label = TapLabel.nontap(pid, device_id, {**conditions, "scenario": kind})

        window = window + traits.offset[None, :]
        if config.noise_std > 0:
            window = window + config.noise_std * rng.standard_normal((n, N_CHANNELS))
        window[0] = 0.0
        if anchor < 0:
            anchor = self._nontap_anchor(window)
        return _Draw(window, anchor, label, device)

    def _nontap_anchor(self, window: np.ndarray) -> int:
        snap = self.snapshot(window)
        decision = gate(snap, GateConfig())
        if decision.anchor_index is not None:
            return decision.anchor_index
        lo, hi = self.config.anchor_range
        return lo + int(np.argmax(window[lo : hi + 1, ANCHOR_CHANNEL]))

    def snapshot(self, window: np.ndarray, t0_us: int = 0) -> WindowSnapshot:
        step = period_us(self.config.sample_rate_hz)
        ts = t0_us + np.round(np.arange(len(window)) * step).astype(np.int64)
        return WindowSnapshot(ts, window, self.config.sample_rate_hz)

    def sample(self, index: int) -> Sample:
        d = self.draw(index)
        feature = build_feature(self.snapshot(d.window), d.anchor)
        return Sample(feature=feature, device=d.device, label=d.label)


def synthesize(
    config: SynthConfig, n: int, registry: DeviceRegistry | None = None
) -> list[Sample]:
    """``n`` labeled samples, deterministic in ``config.seed``."""
    if n <= 0:
        raise InputError(f"n must be positive, got {n}")
    gen = _Generator(config, registry)
    samples = [gen.sample(i) for i in range(n)]
    n_taps = sum(s.is_tap for s in samples)
    log.info("Synthesized %d samples (%d taps, %d non-taps)", n, n_taps, n - n_taps)
    return samples


@dataclass(frozen=True)
class StreamEvent:
    """Ground truth for one event embedded in a synthetic stream."""

    frame_index: int
    label: TapLabel


@dataclass
class SynthStream:
    frames: list[ImuFrame]
    events: list[StreamEvent]
    device_id: str

    @property
    def taps(self) -> list[StreamEvent]:
        return [e for e in self.events if e.label.is_tap]


def synthesize_stream(
    config: SynthConfig,
    n_events: int,
    registry: DeviceRegistry | None = None,
    gap_ms: tuple[float, float] = (250.0, 600.0),
    t0_us: int = 0,
) -> SynthStream:
    """
    A continuous raw six-channel stream with ``n_events`` events separated by
    quiet gaps. Raw values are the cumulative sum of the derivative windows
    plus gravity on z, so differentiating the stream recovers the events.
    """
    if n_events < 0:
        raise InputError("n_events must be >= 0")
    if len(config.devices) > 1:
        log.info("Stream uses device %s only", config.devices[0])
        config = replace(config, devices=config.devices[:1])
    gen = _Generator(config, registry)
    rng = np.random.default_rng([config.seed, 104729])
    rate = config.sample_rate_hz

    def quiet(ms: float) -> np.ndarray:
        count = max(int(ms / 1000.0 * rate), 1)
        return config.noise_std * rng.standard_normal((count, N_CHANNELS))

    pieces = [quiet(200.0)]
    offset = len(pieces[0])
    events: list[StreamEvent] = []
    for i in range(n_events):
        d = gen.draw(i)
        if d.label.is_tap:
            events.append(StreamEvent(offset + d.anchor, d.label))
        else:
            events.append(StreamEvent(offset, d.label))
        window = d.window.copy()
        window[0] = config.noise_std * rng.standard_normal(N_CHANNELS)
        pieces += [window, quiet(float(rng.uniform(*gap_ms)))]
        offset += len(window) + len(pieces[-1])

    deriv = np.concatenate(pieces)
    deriv[0] = 0.0
    raw = np.cumsum(deriv, axis=0)
    raw[:, ANCHOR_CHANNEL] += GRAVITY
    step = period_us(rate)
    ts = t0_us + np.round(np.arange(len(raw)) * step).astype(np.int64)
    frames = [ImuFrame(int(t), row[:3], row[3:]) for t, row in zip(ts, raw, strict=True)]
    device_id = config.devices[0]
    log.info("Synthesized stream: %d frames, %d events", len(frames), n_events)
    return SynthStream(frames=frames, events=events, device_id=device_id)
