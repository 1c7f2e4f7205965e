"""
Tests for the TapNet graph builder and its presets.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from offscreen_tap.core.errors import ConfigError, ShapeError
from offscreen_tap.core.models import ALL_HEADS, HEAD_WIDTHS
from offscreen_tap.model.tapnet import (
    TapNetConfig,
    TapNetOutput,
    build,
    build_preset,
    count_params,
    forward,
    load_model,
)
from offscreen_tap.nn.checkpoint import save_checkpoint


class TestCapacityPresets:
    """Trainable parameter counts per preset"""

    @pytest.mark.parametrize(
        "preset,target",
        [
            ("model_small", 11_000),
            ("six_channel_small", 9_000),
            ("model_large", 163_000),
            ("six_channel_large", 144_000),
        ],
    )
    def test_capacity_within_20_percent(self, preset, target):
        n = count_params(build_preset(preset))
        assert 0.8 * target <= n <= 1.2 * target

    def test_siso_smaller_than_mimo(self):
        config = TapNetConfig.load("model_small")
        mimo = count_params(build(config))
        siso = [count_params(build(config.as_siso(task))) for task in ALL_HEADS]
        assert all(s < mimo for s in siso)
        assert mimo < sum(siso)

    def test_tiny_cnn_builds(self):
        graph = build(TapNetConfig.load("tiny_cnn").as_siso("direction"))
        assert list(graph.heads) == ["direction"]
        assert graph.layout == "z_segment"


class TestTapNetConfig:
    """Config validation"""

    def test_heads(self):
        assert TapNetConfig().heads == ALL_HEADS
        assert TapNetConfig(variant="siso", task="finger").heads == ("finger",)

    def test_siso_needs_task(self):
        with pytest.raises(ConfigError):
            TapNetConfig(variant="siso")

    def test_unknown_variant(self):
        with pytest.raises(ConfigError):
            TapNetConfig(variant="lstm")

    def test_mimo_rejects_task(self):
        with pytest.raises(ConfigError):
            TapNetConfig(task="event")

    def test_four_conv_layers(self):
        with pytest.raises(ConfigError):
            TapNetConfig(filters=[8, 8], strides=[2, 2])

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            TapNetConfig.from_dict({"variant": "mimo", "dropout": 0.5})

    def test_six_channel_cannot_truncate(self):
        with pytest.raises(ConfigError):
            TapNetConfig.load("six_channel_small").as_siso("direction")

    def test_infeasible_widths(self):
        config = TapNetConfig(kernel=40, strides=[2, 2, 2, 2])
        with pytest.raises(ConfigError):
            build(config)


class TestForward:
    """Head outputs"""

    def test_output_widths(self, small_graph, device_a):
        from offscreen_tap.signal.features import normalize_device

        out = forward(small_graph, np.zeros(300), normalize_device(device_a))
        for head in ALL_HEADS:
            assert out.head(head).shape == (1, HEAD_WIDTHS[head])

    def test_zero_regression_head_centres(self, small_graph):
        for p in small_graph.parameters(heads=["loc_reg"], trunk=False).values():
            p[...] = 0.0
        out = forward(small_graph, np.zeros(300), np.zeros(7))
        np.testing.assert_allclose(out.location_xy, [[0.5, 0.5]])

    def test_infer_is_deterministic(self, small_graph, rng):
        x, d = rng.standard_normal(300), rng.uniform(-1, 1, 7)
        a, b = forward(small_graph, x, d), forward(small_graph, x, d)
        np.testing.assert_array_equal(a.direction_logits, b.direction_logits)

    def test_location_clamped(self):
        out = TapNetOutput.from_heads({"loc_reg": np.array([[1.2, -0.1]])})
        np.testing.assert_array_equal(out.location_xy, [[1.0, 0.0]])

    def test_predictions(self):
        out = TapNetOutput.from_heads(
            {"event": np.array([[0.1, 2.0]]), "direction": np.array([[0, 0, 5, 0, 0, 0.0]])}
        )
        preds = out.predictions()
        assert preds["event"].tolist() == [1]
        assert preds["direction"].tolist() == [2]
        assert "finger" not in preds

    def test_bad_device_width(self, small_graph):
        with pytest.raises(ShapeError):
            forward(small_graph, np.zeros(300), np.zeros(5))

    def test_bad_mode(self, small_graph):
        with pytest.raises(ConfigError):
            forward(small_graph, np.zeros(300), np.zeros(7), mode="eval")

    @pytest.mark.parametrize("preset", ["six_channel_small", "tiny_cnn"])
    def test_other_layouts(self, preset, rng):
        graph = build_preset(preset)
        out = forward(graph, rng.standard_normal((2, 300)), np.zeros(7))
        assert out.event_logits.shape == (2, 2)

    def test_input_injection(self, rng):
        graph = build(replace(TapNetConfig.load("model_small"), device_injection="input"))
        x = rng.standard_normal(300)
        a = forward(graph, x, np.zeros(7))
        b = forward(graph, x, np.ones(7))
        assert not np.allclose(a.event_logits, b.event_logits)
        c = forward(graph, x, -np.ones(7))
        assert not np.allclose(a.event_logits, c.event_logits)
        pair = rng.standard_normal((2, 300))
        raw_b = forward(graph, pair, np.ones((2, 7)), mode="train")
        raw_c = forward(graph, pair, -np.ones((2, 7)), mode="train")
        assert not np.allclose(raw_b.location_xy, raw_c.location_xy)


class TestLoadModel:
    """Rebuilding a graph from a checkpoint"""

    def test_reload_gives_same_outputs(self, small_graph, tmp_path, rng):
        path = save_checkpoint(tmp_path / "m.npz", small_graph)
        graph, ckpt = load_model(path)
        assert ckpt.model_config["variant"] == "mimo"
        x, d = rng.standard_normal(300), rng.uniform(-1, 1, 7)
        np.testing.assert_allclose(
            forward(graph, x, d).direction_logits,
            forward(small_graph, x, d).direction_logits,
            rtol=1e-5,
            atol=1e-6,
        )


class TestThroughput:
    """Single-sample inference cost"""

    @pytest.mark.parametrize("preset", ["model_small", "model_large"])
    def test_single_sample_under_10ms(self, preset, rng):
        graph = build(TapNetConfig.load(preset))
        x, d = rng.standard_normal(300), rng.uniform(-1, 1, 7)
        forward(graph, x, d)
        timings = []
        for _ in range(20):
            start = time.perf_counter()
            forward(graph, x, d)
            timings.append(time.perf_counter() - start)
        assert float(np.median(timings)) <= 0.010
