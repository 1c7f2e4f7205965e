"""
Layer objects over the functional kernels.

Each layer owns its parameters in a ``params`` dict and writes matching
entries into ``grads`` on :meth:`Layer.backward`. Layers cache what the last
training forward saw, so one forward must precede each backward.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from offscreen_tap.core.config import check_keys
from offscreen_tap.core.errors import ConfigError, ShapeError
from offscreen_tap.nn import functional as F

LAYER_KINDS = (
    "conv1d",
    "dense",
    "relu",
    "batchnorm",
    "flatten",
    "concat",
    "softmax",
    "sigmoid",
)

# Parameters and running statistics are held in single precision, as checkpoints store them.
PARAM_DTYPE = np.float32


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a graph description. Unused hyperparameters stay None."""

    kind: str
    filters: int | None = None
    kernel: int | None = None
    stride: int = 1
    padding: str = "valid"
    units: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in LAYER_KINDS:
            raise ConfigError(f"Unknown layer kind: {self.kind}")
        if self.kind == "conv1d" and not (
            self.filters and self.filters > 0 and self.kernel and self.kernel > 0
        ):
            raise ConfigError("conv1d needs positive filters and kernel")
        if self.kind == "dense" and not (self.units and self.units > 0):
            raise ConfigError("dense needs positive units")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if self.padding not in ("valid", "same"):
            raise ConfigError(f"Unknown padding: {self.padding}")

    def to_dict(self) -> dict[str, Any]:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> LayerSpec:
        check_keys(cls, data)
        return cls(**data)


def glorot_uniform(
    rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int
) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(PARAM_DTYPE)


class Layer:
    """Base layer: no parameters, identity shape."""

    spec: LayerSpec

    def __init__(self, spec: LayerSpec):
        self.spec = spec
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self.output_shape: tuple[int, ...] = ()

    def build(self, input_shape: tuple[int, ...], rng: np.random.Generator) -> tuple[int, ...]:
        """Allocate parameters for a per-sample ``input_shape``; returns the output shape."""
        self.output_shape = input_shape
        return input_shape

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def zero_grad(self) -> None:
        self.grads = {k: np.zeros(v.shape) for k, v in self.params.items()}

    def count_params(self) -> int:
        return sum(int(p.size) for p in self.params.values())

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.spec.to_dict()})"


class Conv1D(Layer):
    def build(self, input_shape, rng):
        if len(input_shape) != 2:
            raise ShapeError(f"conv1d expects [length, channels], got {input_shape}")
        length, c_in = input_shape
        k, c_out = self.spec.kernel, self.spec.filters
        assert k is not None and c_out is not None
        pad = F.resolve_padding(self.spec.padding, k)
        l_out = F.conv1d_output_length(length, k, self.spec.stride, pad)
        self.params = {
            "kernel": glorot_uniform(rng, (k, c_in, c_out), k * c_in, k * c_out),
            "bias": np.zeros(c_out, dtype=PARAM_DTYPE),
        }
        self.zero_grad()
        self.output_shape = (l_out, c_out)
        return self.output_shape

    def forward(self, x, training=False):
        self._x = x
        return F.conv1d_forward(
            x, self.params["kernel"], self.params["bias"], self.spec.stride, self.spec.padding
        )

    def backward(self, dout):
        dx, dk, db = F.conv1d_backward(
            dout, self._x, self.params["kernel"], self.spec.stride, self.spec.padding
        )
        self.grads["kernel"] += dk
        self.grads["bias"] += db
        return dx


class Dense(Layer):
    def build(self, input_shape, rng):
        if len(input_shape) != 1:
            raise ShapeError(f"dense expects a flat input, got {input_shape}")
        (n_in,) = input_shape
        units = self.spec.units
        assert units is not None
        self.params = {
            "weight": glorot_uniform(rng, (n_in, units), n_in, units),
            "bias": np.zeros(units, dtype=PARAM_DTYPE),
        }
        self.zero_grad()
        self.output_shape = (units,)
        return self.output_shape

    def forward(self, x, training=False):
        self._x = x
        return F.dense_forward(x, self.params["weight"], self.params["bias"])

    def backward(self, dout):
        dx, dw, db = F.dense_backward(dout, self._x, self.params["weight"])
        self.grads["weight"] += dw
        self.grads["bias"] += db
        return dx


class ReLU(Layer):
    def forward(self, x, training=False):
        self._x = x
        return F.relu(x)

    def backward(self, dout):
        return F.relu_backward(dout, self._x)


class Sigmoid(Layer):
    def forward(self, x, training=False):
        self._y = F.sigmoid(x)
        return self._y

    def backward(self, dout):
        return F.sigmoid_backward(dout, self._y)


class Softmax(Layer):
    def forward(self, x, training=False):
        self._p = F.softmax(x)
        return self._p

    def backward(self, dout):
        return F.softmax_backward(dout, self._p)


class BatchNorm(Layer):
    """Per-channel (last axis) batch norm with running statistics in ``buffers``."""

    def build(self, input_shape, rng):
        channels = input_shape[-1]
        self.params = {
            "gamma": np.ones(channels, dtype=PARAM_DTYPE),
            "beta": np.zeros(channels, dtype=PARAM_DTYPE),
        }
        self.buffers = {
            "running_mean": np.zeros(channels, dtype=PARAM_DTYPE),
            "running_var": np.ones(channels, dtype=PARAM_DTYPE),
        }
        self.zero_grad()
        self.output_shape = input_shape
        return input_shape

    def forward(self, x, training=False):
        out, self._cache = F.batchnorm_forward(
            x,
            self.params["gamma"],
            self.params["beta"],
            "train" if training else "infer",
            self.buffers["running_mean"],
            self.buffers["running_var"],
        )
        return out

    def backward(self, dout):
        dx, dgamma, dbeta = F.batchnorm_backward(dout, self._cache)
        self.grads["gamma"] += dgamma
        self.grads["beta"] += dbeta
        return dx


class Flatten(Layer):
    def build(self, input_shape, rng):
        self.output_shape = (int(np.prod(input_shape)),)
        return self.output_shape

    def forward(self, x, training=False):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._shape)


_LAYER_TYPES: dict[str, type[Layer]] = {
    "conv1d": Conv1D,
    "dense": Dense,
    "relu": ReLU,
    "batchnorm": BatchNorm,
    "flatten": Flatten,
    "softmax": Softmax,
    "sigmoid": Sigmoid,
}


def make_layer(spec: LayerSpec) -> Layer:
    try:
        return _LAYER_TYPES[spec.kind](spec)
    except KeyError:
        raise ConfigError(f"Layer kind {spec.kind!r} is handled by the graph") from None


class Sequential:
    """An ordered stack of layers with dotted parameter names (``"3.kernel"``)."""

    def __init__(self, specs: list[LayerSpec]):
        self.specs = list(specs)
        self.layers = [make_layer(s) for s in self.specs]
        self.input_shape: tuple[int, ...] = ()
        self.output_shape: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.layers)

    def build(self, input_shape: tuple[int, ...], rng: np.random.Generator) -> tuple[int, ...]:
        self.input_shape = shape = tuple(input_shape)
        for layer in self.layers:
            shape = layer.build(shape, rng)
        self.output_shape = shape
        return shape

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if x.shape[1:] != self.input_shape:
            raise ShapeError(f"Expected per-sample input {self.input_shape}, got {x.shape[1:]}")
        for layer in self.layers:
            x = layer.forward(x, training)
        return x

    def backward(self, dout: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def _named(self, attr: str) -> dict[str, np.ndarray]:
        return {
            f"{i}.{name}": value
            for i, layer in enumerate(self.layers)
            for name, value in getattr(layer, attr).items()
        }

    def parameters(self) -> dict[str, np.ndarray]:
        return self._named("params")

    def gradients(self) -> dict[str, np.ndarray]:
        return self._named("grads")

    def named_buffers(self) -> dict[str, np.ndarray]:
        return self._named("buffers")

    def zero_grad(self) -> None:
        for layer in self.layers:
            layer.zero_grad()

    def count_params(self) -> int:
        return sum(layer.count_params() for layer in self.layers)
