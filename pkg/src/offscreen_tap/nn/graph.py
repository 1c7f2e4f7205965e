"""
Model graph: a shared trunk feeding named heads.

::

    feature [N, 300] --layout--> trunk (conv / relu / batchnorm ... flatten)
                                   |
                   device [N, 7] --+-- concat --> heads[name] (dense ...)

Parameter names are ``trunk.<layer>.<param>`` and
``heads.<head>.<layer>.<param>``. Every head reads the same trunk arrays.
"""

from __future__ import annotations

import copy
import logging
from collections.abc import Iterable
from typing import Any, Literal

import numpy as np

from offscreen_tap.core.errors import ConfigError, ShapeError
from offscreen_tap.core.models import (
    ANCHOR_CHANNEL,
    DEVICE_VECTOR_WIDTH,
    FEATURE_LEN,
    N_CHANNELS,
    SEGMENT_LEN,
)
from offscreen_tap.nn.layers import LayerSpec, Sequential

log = logging.getLogger(__name__)

InputLayout = Literal["one_channel", "six_channel", "z_segment"]
DeviceInjection = Literal["representation", "input"]

INPUT_LAYOUTS = ("one_channel", "six_channel", "z_segment")
DEVICE_INJECTIONS = ("representation", "input")


def prepare_input(
    features: np.ndarray, devices: np.ndarray, layout: str, injection: str
) -> np.ndarray:
    """Reshape a batch of 300-vectors into the trunk's [N, length, channels] input."""
    n = features.shape[0]
    if layout == "one_channel":
        x = features
        if injection == "input":
            x = np.concatenate([devices, features], axis=1)
        return x[:, :, None]
    if layout == "six_channel":
        return features.reshape(n, N_CHANNELS, SEGMENT_LEN).transpose(0, 2, 1)
    if layout == "z_segment":
        lo = ANCHOR_CHANNEL * SEGMENT_LEN
        return features[:, lo : lo + SEGMENT_LEN, None]
    raise ConfigError(f"Unknown input layout: {layout}")


def trunk_input_shape(layout: str, injection: str) -> tuple[int, int]:
    if layout == "one_channel":
        return (FEATURE_LEN + (DEVICE_VECTOR_WIDTH if injection == "input" else 0), 1)
    if layout == "six_channel":
        return (SEGMENT_LEN, N_CHANNELS)
    if layout == "z_segment":
        return (SEGMENT_LEN, 1)
    raise ConfigError(f"Unknown input layout: {layout}")


class ModelGraph:
    """
    Trainable graph plus its named parameter store.

    ``config`` is an opaque dict describing how the graph was built; it is
    written into checkpoints so the graph can be rebuilt on load.
    """

    def __init__(
        self,
        trunk: list[LayerSpec],
        heads: dict[str, list[LayerSpec]],
        layout: InputLayout = "one_channel",
        device_injection: DeviceInjection = "representation",
        seed: int = 0,
        config: dict[str, Any] | None = None,
    ):
        if layout not in INPUT_LAYOUTS:
            raise ConfigError(f"Unknown input layout: {layout}")
        if device_injection not in DEVICE_INJECTIONS:
            raise ConfigError(f"Unknown device injection: {device_injection}")
        if device_injection == "input" and layout != "one_channel":
            raise ConfigError("Input-level device injection needs the one-channel layout")
        if not heads:
            raise ConfigError("A graph needs at least one head")
        if not trunk or trunk[-1].kind != "flatten":
            raise ConfigError("The trunk must end with a flatten layer")

        self.layout = layout
        self.device_injection = device_injection
        self.seed = seed
        self.config = dict(config or {})

        rng = np.random.default_rng(seed)
        self.trunk = Sequential(trunk)
        (self.flat_dim,) = self.trunk.build(trunk_input_shape(layout, device_injection), rng)
        self.rep_dim = self.flat_dim + (
            DEVICE_VECTOR_WIDTH if device_injection == "representation" else 0
        )
        self.heads: dict[str, Sequential] = {}
        for name, specs in heads.items():
            head = Sequential(specs)
            head.build((self.rep_dim,), rng)
            self.heads[name] = head
        self._forward_heads: tuple[str, ...] = ()
        self._batch = 0

    # -- forward / backward ---------------------------------------------------

    def forward(
        self,
        features: np.ndarray,
        devices: np.ndarray,
        training: bool = False,
        heads: Iterable[str] | None = None,
    ) -> dict[str, np.ndarray]:
        """Raw head outputs (logits, or the sigmoid of the regression head)."""
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        devices = np.asarray(devices, dtype=np.float64)
        if features.shape[1:] != (FEATURE_LEN,):
            raise ShapeError(f"Expected features [N, {FEATURE_LEN}], got {features.shape}")
        n = features.shape[0]
        if devices.ndim == 1:
            devices = np.broadcast_to(devices, (n, devices.shape[0]))
        if devices.shape != (n, DEVICE_VECTOR_WIDTH):
            raise ShapeError(f"Expected devices [{n}, {DEVICE_VECTOR_WIDTH}], got {devices.shape}")

        names = tuple(self.heads) if heads is None else tuple(heads)
        for name in names:
            if name not in self.heads:
                raise ConfigError(f"Graph has no head {name!r}")

        x = prepare_input(features, devices, self.layout, self.device_injection)
        rep = self.trunk.forward(x, training)
        if self.device_injection == "representation":
            rep = np.concatenate([rep, devices], axis=1)
        self._forward_heads = names
        self._batch = n
        return {name: self.heads[name].forward(rep, training) for name in names}

    def backward(
        self, head_grads: dict[str, np.ndarray], inactive: Iterable[str] = ()
    ) -> dict[str, np.ndarray]:
        """
        Reverse pass from per-head output gradients.

        Heads that get no gradient end up with zero gradients; unless listed in
        ``inactive`` that is reported as a disconnected-parameter warning.
        """
        unknown = set(head_grads) - set(self._forward_heads)
        if unknown:
            raise ShapeError(f"No forward pass recorded for heads: {sorted(unknown)}")
        self.zero_grad()
        skipped = sorted(set(self.heads) - set(head_grads) - set(inactive))
        if skipped:
            log.warning("Parameters of heads %s received no gradient", ", ".join(skipped))

        drep = np.zeros((self._batch, self.rep_dim))
        for name, grad in head_grads.items():
            drep += self.heads[name].backward(grad)
        self.trunk.backward(drep[:, : self.flat_dim])
        return self.gradients()

    # -- parameter store -----------------------------------------------------

    def parameters(
        self, heads: Iterable[str] | None = None, trunk: bool = True
    ) -> dict[str, np.ndarray]:
        """Named parameter arrays (live storage, not copies)."""
        out: dict[str, np.ndarray] = {}
        if trunk:
            out.update({f"trunk.{k}": v for k, v in self.trunk.parameters().items()})
        for name in self.heads if heads is None else heads:
            out.update({f"heads.{name}.{k}": v for k, v in self.heads[name].parameters().items()})
        return out

    def gradients(self) -> dict[str, np.ndarray]:
        out = {f"trunk.{k}": v for k, v in self.trunk.gradients().items()}
        for name, head in self.heads.items():
            out.update({f"heads.{name}.{k}": v for k, v in head.gradients().items()})
        return out

    def buffers(self) -> dict[str, np.ndarray]:
        out = {f"trunk.{k}": v for k, v in self.trunk.named_buffers().items()}
        for name, head in self.heads.items():
            out.update({f"heads.{name}.{k}": v for k, v in head.named_buffers().items()})
        return out

    def zero_grad(self) -> None:
        self.trunk.zero_grad()
        for head in self.heads.values():
            head.zero_grad()

    def count_params(self) -> int:
        """Trainable scalars; batch-norm running statistics are not counted."""
        return self.trunk.count_params() + sum(h.count_params() for h in self.heads.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {
            **{f"param/{k}": v.copy() for k, v in self.parameters().items()},
            **{f"buffer/{k}": v.copy() for k, v in self.buffers().items()},
        }

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        """Copy arrays into the existing storage; names and shapes must match exactly."""
        targets = {f"param/{k}": v for k, v in self.parameters().items()}
        targets.update({f"buffer/{k}": v for k, v in self.buffers().items()})
        missing = sorted(set(targets) - set(state))
        extra = sorted(set(state) - set(targets))
        if missing or extra:
            raise ShapeError(f"State mismatch: missing {missing[:5]}, unexpected {extra[:5]}")
        for key, target in targets.items():
            value = np.asarray(state[key])
            if value.shape != target.shape:
                raise ShapeError(f"{key}: shape {value.shape} != {target.shape}")
            target[...] = value

    def copy(self) -> ModelGraph:
        return copy.deepcopy(self)

    def layer_specs(self) -> dict[str, Any]:
        return {
            "trunk": [s.to_dict() for s in self.trunk.specs],
            "heads": {name: [s.to_dict() for s in h.specs] for name, h in self.heads.items()},
        }
