"""
offscreen_tap.nn - Minimal numpy layer engine with reverse-mode gradients and Adam.
"""

from offscreen_tap.nn.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from offscreen_tap.nn.functional import (
    batchnorm_forward,
    conv1d_forward,
    mse,
    softmax,
    softmax_cross_entropy,
)
from offscreen_tap.nn.gradcheck import GradCheckResult, check_gradients, check_graph_gradients
from offscreen_tap.nn.graph import ModelGraph
from offscreen_tap.nn.layers import LayerSpec, Sequential
from offscreen_tap.nn.optim import OptimizerState, adam_step

__all__ = [
    "Checkpoint",
    "GradCheckResult",
    "LayerSpec",
    "ModelGraph",
    "OptimizerState",
    "Sequential",
    "adam_step",
    "batchnorm_forward",
    "check_gradients",
    "check_graph_gradients",
    "conv1d_forward",
    "load_checkpoint",
    "mse",
    "save_checkpoint",
    "softmax",
    "softmax_cross_entropy",
]
