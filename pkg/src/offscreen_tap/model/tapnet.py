"""
TapNet graph builder.

One-channel variants convolve the whole 300-vector as a single channel, so
every filter is reused across the six IMU channels. The six-channel variant
reshapes the input to [50, 6] and convolves across channels. Both share the
same head layout:

    trunk: 4 x (conv1d -> relu -> batchnorm) -> flatten
    concat normalized device vector
    head:  (dense -> relu)* -> dense(width) [-> sigmoid for loc_reg]

Capacity presets live in ``presets/`` and were sized once so the trainable
parameter counts land near 11K / 163K (one-channel) and 9K / 144K (six-channel).
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, ClassVar

import numpy as np

from offscreen_tap.core.config import check_keys, load_yaml
from offscreen_tap.core.errors import ConfigError, ShapeError
from offscreen_tap.core.models import ALL_HEADS, DEVICE_VECTOR_WIDTH, HEAD_WIDTHS
from offscreen_tap.nn.checkpoint import Checkpoint, load_checkpoint
from offscreen_tap.nn.graph import ModelGraph
from offscreen_tap.nn.layers import LayerSpec
from offscreen_tap.signal.features import FeatureVector

log = logging.getLogger(__name__)

VARIANTS = ("mimo", "siso", "six_channel", "tiny_cnn")
TAPNET_CONV_LAYERS = 4

_LAYOUTS = {
    "mimo": "one_channel",
    "siso": "one_channel",
    "six_channel": "six_channel",
    "tiny_cnn": "z_segment",
}


def _default_hidden() -> dict[str, list[int]]:
    return {"event": [4], "direction": [8], "finger": [4], "loc_class": [8], "loc_reg": [6]}


@dataclass
class TapNetConfig:
    """
    Graph description.

    ``task`` selects the single head of a ``siso`` graph (optional for
    ``tiny_cnn``). ``kernel`` is shared by all conv layers.
    """

    variant: str = "mimo"
    task: str | None = None
    capacity_preset: str = "small"
    filters: list[int] = field(default_factory=lambda: [8, 12, 16, 16])
    kernel: int = 7
    strides: list[int] = field(default_factory=lambda: [2, 2, 2, 2])
    head_hidden: dict[str, list[int]] = field(default_factory=_default_hidden)
    device_injection: str = "representation"
    seed: int = 0

    def __post_init__(self) -> None:
        self.filters = [int(f) for f in self.filters]
        self.strides = [int(s) for s in self.strides]
        self.head_hidden = {k: [int(u) for u in v] for k, v in self.head_hidden.items()}
        if self.variant not in VARIANTS:
            raise ConfigError(f"Unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if len(self.filters) != len(self.strides):
            raise ConfigError("filters and strides must have the same length")
        if self.variant != "tiny_cnn" and len(self.filters) != TAPNET_CONV_LAYERS:
            raise ConfigError(f"TapNet variants have exactly {TAPNET_CONV_LAYERS} conv layers")
        if any(f <= 0 for f in self.filters) or any(s <= 0 for s in self.strides):
            raise ConfigError("filters and strides must be positive")
        if self.kernel <= 0:
            raise ConfigError("kernel must be positive")
        if self.variant == "siso" and self.task is None:
            raise ConfigError("siso variant needs a task")
        if self.task is not None and self.task not in ALL_HEADS:
            raise ConfigError(f"Unknown task {self.task!r}")
        if self.task is not None and self.variant not in ("siso", "tiny_cnn"):
            raise ConfigError(f"Variant {self.variant} does not take a task")
        missing = [h for h in self.heads if h not in self.head_hidden]
        if missing:
            raise ConfigError(f"head_hidden missing entries for: {', '.join(missing)}")
        if self.device_injection not in ("representation", "input"):
            raise ConfigError(f"Unknown device injection: {self.device_injection}")

    @property
    def heads(self) -> tuple[str, ...]:
        return (self.task,) if self.task is not None else ALL_HEADS

    @property
    def layout(self) -> str:
        return _LAYOUTS[self.variant]

    def as_siso(self, task: str) -> TapNetConfig:
        """Same trunk and head widths, truncated to one task."""
        variant = "tiny_cnn" if self.variant == "tiny_cnn" else "siso"
        if self.variant == "six_channel":
            raise ConfigError("SISO truncation is defined for one-channel graphs")
        return replace(self, variant=variant, task=task)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TapNetConfig:
        check_keys(cls, data)
        return cls(**data)

    @classmethod
    def load(cls, name_or_path: str | Path) -> TapNetConfig:
        """Load a bundled preset (``model_small``) or a YAML/JSON file."""
        return cls.from_dict(load_yaml(name_or_path))


@dataclass
class TapNetOutput:
    """Batched head outputs; heads absent from the graph are None."""

    event_logits: np.ndarray | None = None
    direction_logits: np.ndarray | None = None
    finger_logits: np.ndarray | None = None
    location_logits: np.ndarray | None = None
    location_xy: np.ndarray | None = None

    _FIELDS: ClassVar[dict[str, str]] = {
        "event": "event_logits",
        "direction": "direction_logits",
        "finger": "finger_logits",
        "loc_class": "location_logits",
        "loc_reg": "location_xy",
    }

    @classmethod
    def from_heads(cls, outputs: dict[str, np.ndarray], clamp: bool = True) -> TapNetOutput:
        out = cls(**{cls._FIELDS[name]: value for name, value in outputs.items()})
        if clamp and out.location_xy is not None:
            out.location_xy = np.clip(out.location_xy, 0.0, 1.0)
        return out

    def head(self, name: str) -> np.ndarray | None:
        return getattr(self, self._FIELDS[name])

    def predictions(self) -> dict[str, np.ndarray]:
        """Arg-max class per classifier head plus the location ratios."""
        out: dict[str, np.ndarray] = {}
        for name, attr in self._FIELDS.items():
            value = getattr(self, attr)
            if value is None:
                continue
            out[name] = value if name == "loc_reg" else value.argmax(axis=1)
        return out


# ---------------------------------------------------------------------------
# Build / forward
# ---------------------------------------------------------------------------


def trunk_specs(config: TapNetConfig) -> list[LayerSpec]:
    specs: list[LayerSpec] = []
    for filters, stride in zip(config.filters, config.strides, strict=True):
        specs += [
            LayerSpec("conv1d", filters=filters, kernel=config.kernel, stride=stride),
            LayerSpec("relu"),
            LayerSpec("batchnorm"),
        ]
    specs.append(LayerSpec("flatten"))
    return specs


def head_specs(config: TapNetConfig, head: str) -> list[LayerSpec]:
    specs: list[LayerSpec] = []
    for units in config.head_hidden[head]:
        specs += [LayerSpec("dense", units=units), LayerSpec("relu")]
    specs.append(LayerSpec("dense", units=HEAD_WIDTHS[head]))
    if head == "loc_reg":
        specs.append(LayerSpec("sigmoid"))
    return specs


def build(config: TapNetConfig) -> ModelGraph:
    """Build and initialize (seeded Glorot) the graph ``config`` describes."""
    try:
        graph = ModelGraph(
            trunk=trunk_specs(config),
            heads={h: head_specs(config, h) for h in config.heads},
            layout=config.layout,  # type: ignore[arg-type]
            device_injection=config.device_injection,  # type: ignore[arg-type]
            seed=config.seed,
            config=config.to_dict(),
        )
    except ShapeError as e:
        raise ConfigError(f"Inconsistent layer widths: {e}") from e
    for name, head in graph.heads.items():
        assert head.output_shape[-1] == HEAD_WIDTHS[name]
    log.debug(
        "Built %s/%s graph: %d parameters", config.variant, config.capacity_preset,
        graph.count_params(),
    )
    return graph


def build_preset(name: str, **overrides: Any) -> ModelGraph:
    config = TapNetConfig.load(name)
    return build(replace(config, **overrides) if overrides else config)


def _as_batch(feature: FeatureVector | np.ndarray) -> np.ndarray:
    values = feature.values if isinstance(feature, FeatureVector) else np.asarray(feature)
    return np.atleast_2d(np.asarray(values, dtype=np.float64))


def forward(
    graph: ModelGraph,
    feature: FeatureVector | np.ndarray,
    device: np.ndarray,
    mode: str = "infer",
) -> TapNetOutput:
    """
    Run every head of ``graph``. ``device`` is the normalized 7-vector (or a
    batch of them). Infer mode clamps location ratios to [0, 1].
    """
    if mode not in ("train", "infer"):
        raise ConfigError(f"Unknown mode: {mode}")
    device = np.asarray(device, dtype=np.float64)
    if device.shape[-1] != DEVICE_VECTOR_WIDTH:
        raise ShapeError(f"Device vector must have {DEVICE_VECTOR_WIDTH} values")
    outputs = graph.forward(_as_batch(feature), device, training=mode == "train")
    return TapNetOutput.from_heads(outputs, clamp=mode == "infer")


def count_params(graph: ModelGraph) -> int:
    return graph.count_params()


def load_model(path: str | Path) -> tuple[ModelGraph, Checkpoint]:
    """Rebuild a graph from a checkpoint and copy its weights in."""
    checkpoint = load_checkpoint(path)
    graph = build(TapNetConfig.from_dict(checkpoint.model_config))
    graph.load_state_dict(checkpoint.state)
    return graph, checkpoint
