"""
offscreen_tap.model - TapNet graph builder and its ablation variants.
"""

from offscreen_tap.model.tapnet import (
    VARIANTS,
    TapNetConfig,
    TapNetOutput,
    build,
    build_preset,
    count_params,
    forward,
    load_model,
)

__all__ = [
    "VARIANTS",
    "TapNetConfig",
    "TapNetOutput",
    "build",
    "build_preset",
    "count_params",
    "forward",
    "load_model",
]
