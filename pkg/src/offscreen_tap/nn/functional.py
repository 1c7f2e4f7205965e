"""
Functional forward/backward kernels.

Tensors are float64 numpy arrays, batch first. Sequence tensors are
channels-last: [batch, length, channels]. Every ``*_backward`` takes the
upstream gradient plus what the forward saw and returns gradients with
respect to each input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from offscreen_tap.core.errors import InputError, ShapeError

Tensor = np.ndarray
Padding = int | Literal["valid", "same"]

BN_EPS = 1e-5
BN_MOMENTUM = 0.99


# ---------------------------------------------------------------------------
# conv1d
# ---------------------------------------------------------------------------


def resolve_padding(padding: Padding, kernel_size: int) -> int:
    if padding == "valid":
        return 0
    if padding == "same":
        return (kernel_size - 1) // 2
    if isinstance(padding, int) and padding >= 0:
        return padding
    raise ShapeError(f"Invalid padding: {padding!r}")


def conv1d_output_length(length: int, kernel_size: int, stride: int, pad: int) -> int:
    span = length + 2 * pad - kernel_size
    if span < 0:
        raise ShapeError(
            f"Input length {length} (padding {pad}) shorter than kernel {kernel_size}"
        )
    return span // stride + 1


def _conv_patches(x: Tensor, kernel_size: int, stride: int, pad: int) -> tuple[Tensor, Tensor]:
    xp = np.pad(x, ((0, 0), (pad, pad), (0, 0))) if pad else x
    l_out = conv1d_output_length(x.shape[1], kernel_size, stride, pad)
    # [N, L', C, k] -> strided rows
    patches = sliding_window_view(xp, kernel_size, axis=1)[:, ::stride][:, :l_out]
    return xp, patches


def conv1d_forward(
    x: Tensor,
    kernel: Tensor,
    bias: Tensor | None = None,
    stride: int = 1,
    padding: Padding = "valid",
) -> Tensor:
    """
    Cross-correlation of ``x`` [N, L, C_in] (or unbatched [L, C_in]) with
    ``kernel`` [k, C_in, C_out]. Output length floor((L + 2p - k) / stride) + 1.
    """
    unbatched = x.ndim == 2
    if unbatched:
        x = x[None]
    if x.ndim != 3 or kernel.ndim != 3 or x.shape[2] != kernel.shape[1]:
        raise ShapeError(f"conv1d shape mismatch: input {x.shape}, kernel {kernel.shape}")
    if stride < 1:
        raise ShapeError("stride must be >= 1")
    pad = resolve_padding(padding, kernel.shape[0])
    _, patches = _conv_patches(x, kernel.shape[0], stride, pad)
    out = np.tensordot(patches, kernel, axes=([3, 2], [0, 1]))
    if bias is not None:
        out = out + bias
    return out[0] if unbatched else out


def conv1d_backward(
    dout: Tensor, x: Tensor, kernel: Tensor, stride: int = 1, padding: Padding = "valid"
) -> tuple[Tensor, Tensor, Tensor]:
    """Returns (dx, dkernel, dbias) for batched inputs."""
    k = kernel.shape[0]
    pad = resolve_padding(padding, k)
    xp, patches = _conv_patches(x, k, stride, pad)
    l_out = dout.shape[1]

    dkernel = np.tensordot(patches, dout, axes=([0, 1], [0, 1])).transpose(1, 0, 2)
    dbias = dout.sum(axis=(0, 1))
    dpatches = np.tensordot(dout, kernel, axes=([2], [2]))  # [N, L', k, C_in]
    dxp = np.zeros_like(xp)
    stop = stride * (l_out - 1) + 1
    for j in range(k):
        dxp[:, j : j + stop : stride, :] += dpatches[:, :, j, :]
    dx = dxp[:, pad : pad + x.shape[1], :] if pad else dxp
    return dx, dkernel, dbias


# ---------------------------------------------------------------------------
# dense / activations
# ---------------------------------------------------------------------------


def dense_forward(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    if x.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ShapeError(f"dense shape mismatch: input {x.shape}, weight {weight.shape}")
    return x @ weight + bias


def dense_backward(dout: Tensor, x: Tensor, weight: Tensor) -> tuple[Tensor, Tensor, Tensor]:
    return dout @ weight.T, x.T @ dout, dout.sum(axis=0)


def relu(x: Tensor) -> Tensor:
    return np.maximum(x, 0.0)


def relu_backward(dout: Tensor, x: Tensor) -> Tensor:
    return dout * (x > 0)


def sigmoid(x: Tensor) -> Tensor:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid_backward(dout: Tensor, y: Tensor) -> Tensor:
    return dout * y * (1.0 - y)


def softmax(logits: Tensor) -> Tensor:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(dout: Tensor, p: Tensor) -> Tensor:
    return p * (dout - (dout * p).sum(axis=-1, keepdims=True))


# ---------------------------------------------------------------------------
# batch norm
# ---------------------------------------------------------------------------


@dataclass
class BatchNormCache:
    xhat: Tensor
    inv_std: Tensor
    gamma: Tensor
    axes: tuple[int, ...]
    mode: str


def batchnorm_forward(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    mode: Literal["train", "infer"] = "train",
    running_mean: Tensor | None = None,
    running_var: Tensor | None = None,
    momentum: float = BN_MOMENTUM,
    eps: float = BN_EPS,
) -> tuple[Tensor, BatchNormCache]:
    """
    Normalise over every axis but the last. In train mode batch statistics
    are used and ``running_mean`` / ``running_var`` are updated in place.
    """
    axes = tuple(range(x.ndim - 1))
    if mode == "train":
        if x.shape[0] < 2:
            raise ShapeError("batchnorm needs a batch of at least 2 in train mode")
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        if running_mean is not None and running_var is not None:
            running_mean *= momentum
            running_mean += (1.0 - momentum) * mean
            running_var *= momentum
            running_var += (1.0 - momentum) * var
    elif mode == "infer":
        if running_mean is None or running_var is None:
            raise ShapeError("infer mode needs running statistics")
        mean, var = running_mean, running_var
    else:
        raise InputError(f"Unknown batchnorm mode: {mode}")
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv_std
    return gamma * xhat + beta, BatchNormCache(xhat, inv_std, gamma, axes, mode)


def batchnorm_backward(dout: Tensor, cache: BatchNormCache) -> tuple[Tensor, Tensor, Tensor]:
    axes = cache.axes
    dgamma = (dout * cache.xhat).sum(axis=axes)
    dbeta = dout.sum(axis=axes)
    dxhat = dout * cache.gamma
    if cache.mode == "infer":
        return dxhat * cache.inv_std, dgamma, dbeta
    n = dout.size // dout.shape[-1]
    dx = (cache.inv_std / n) * (
        n * dxhat
        - dxhat.sum(axis=axes)
        - cache.xhat * (dxhat * cache.xhat).sum(axis=axes)
    )
    return dx, dgamma, dbeta


# ---------------------------------------------------------------------------
# losses (batch means)
# ---------------------------------------------------------------------------


def softmax_cross_entropy(logits: Tensor, classes: Tensor) -> tuple[float, Tensor]:
    """Mean cross-entropy of ``logits`` [N, K] against integer ``classes`` [N]."""
    logits = np.atleast_2d(logits)
    classes = np.atleast_1d(np.asarray(classes))
    n, k = logits.shape
    if classes.shape != (n,):
        raise ShapeError(f"classes shape {classes.shape} does not match logits {logits.shape}")
    if np.any(classes < 0) or np.any(classes >= k):
        raise InputError(f"class index out of range [0, {k})")
    classes = classes.astype(np.int64)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    log_p = shifted[np.arange(n), classes] - log_z
    loss = float(-log_p.mean())
    grad = softmax(logits)
    grad[np.arange(n), classes] -= 1.0
    return loss, grad / n


def mse(pred: Tensor, target: Tensor) -> tuple[float, Tensor]:
    """Squared error summed over outputs, averaged over the batch."""
    pred = np.atleast_2d(pred)
    target = np.atleast_2d(target)
    if pred.shape != target.shape:
        raise ShapeError(f"mse shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    n = pred.shape[0]
    return float((diff**2).sum() / n), 2.0 * diff / n
