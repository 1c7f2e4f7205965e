"""
Adam with per-step learning-rate decay.

``decay`` follows the common framework meaning: the step size at step t is
``lr / (1 + decay * t)``. Moments are keyed by parameter name, so one state
can serve any subset of a graph's parameters.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from offscreen_tap.core.errors import ConfigError, ShapeError, TrainingFault

log = logging.getLogger(__name__)

DEFAULT_LR = 1e-4
DEFAULT_DECAY = 1e-6


@dataclass
class OptimizerState:
    learning_rate: float = DEFAULT_LR
    decay: float = DEFAULT_DECAY
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    v: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.learning_rate < 0 or self.decay < 0 or self.step < 0:
            raise ConfigError("learning_rate, decay and step must be >= 0")

    @property
    def effective_lr(self) -> float:
        return self.learning_rate / (1.0 + self.decay * self.step)

    def scalars(self) -> dict[str, Any]:
        return {
            "learning_rate": self.learning_rate,
            "decay": self.decay,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
            "step": self.step,
        }


def adam_step(
    state: OptimizerState,
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
) -> tuple[dict[str, np.ndarray], OptimizerState]:
    """
    One Adam update of ``params`` in place, for every name in ``params``.

    Raises TrainingFault before touching anything if a gradient is not finite.
    """
    for name, p in params.items():
        g = grads.get(name)
        if g is None or g.shape != p.shape:
            raise ShapeError(f"Gradient for {name} missing or mis-shaped")
        if not np.all(np.isfinite(g)):
            raise TrainingFault(f"Non-finite gradient for {name} at step {state.step}")

    lr = state.effective_lr
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
    return params, state
