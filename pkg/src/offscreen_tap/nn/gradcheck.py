"""
Central finite-difference gradient checking.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from offscreen_tap.nn.graph import ModelGraph

log = logging.getLogger(__name__)

HeadLoss = Callable[[dict[str, np.ndarray]], tuple[float, dict[str, np.ndarray]]]


@dataclass
class GradCheckResult:
    max_rel_error: float
    checked: int
    worst: tuple[str, tuple[int, ...]] | None = None
    errors: list[float] = field(default_factory=list, repr=False)


def relative_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def numeric_gradient(
    loss: Callable[[], float], array: np.ndarray, index: tuple[int, ...], h: float = 1e-4
) -> float:
    original = array[index]
    array[index] = original + h
    high = float(array[index])
    plus = loss()
    array[index] = original - h
    low = float(array[index])
    minus = loss()
    array[index] = original
    # the stored step differs from 2h when the array is single precision
    return (plus - minus) / (high - low)


def check_gradients(
    loss: Callable[[], float],
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    n_samples: int = 100,
    h: float = 1e-4,
    seed: int = 0,
) -> GradCheckResult:
    """
    Compare ``grads`` against central differences of ``loss`` at ``n_samples``
    scalar positions drawn uniformly over all parameters.
    """
    rng = np.random.default_rng(seed)
    names = sorted(params)
    sizes = np.array([params[n].size for n in names])
    flat = rng.choice(int(sizes.sum()), size=min(n_samples, int(sizes.sum())), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    result = GradCheckResult(max_rel_error=0.0, checked=0)
    for pos in np.sort(flat):
        i = int(np.searchsorted(offsets, pos, side="right") - 1)
        name = names[i]
        index = np.unravel_index(int(pos - offsets[i]), params[name].shape)
        numeric = numeric_gradient(loss, params[name], index, h)
        err = relative_error(float(grads[name][index]), numeric)
        result.errors.append(err)
        result.checked += 1
        if err > result.max_rel_error:
            result.max_rel_error = err
            result.worst = (name, tuple(int(j) for j in index))
    log.debug(
        "Gradient check: %d positions, max rel error %.3g", result.checked, result.max_rel_error
    )
    return result


def check_graph_gradients(
    graph: ModelGraph,
    features: np.ndarray,
    devices: np.ndarray,
    head_loss: HeadLoss,
    n_samples: int = 100,
    h: float = 1e-4,
    seed: int = 0,
) -> GradCheckResult:
    """Gradient check of a whole graph in training mode under ``head_loss``."""

    def loss() -> float:
        return head_loss(graph.forward(features, devices, training=True))[0]

    outputs = graph.forward(features, devices, training=True)
    _, head_grads = head_loss(outputs)
    inactive = set(graph.heads) - set(head_grads)
    grads = {k: v.copy() for k, v in graph.backward(head_grads, inactive).items()}
    return check_gradients(loss, graph.parameters(), grads, n_samples, h, seed)
