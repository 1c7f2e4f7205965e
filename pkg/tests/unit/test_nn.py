"""
Tests for the layer engine: layers, graph, gradient checks, Adam and checkpoints.
"""

import json
import zipfile

import numpy as np
import pytest

from offscreen_tap.core.errors import (
    ConfigError,
    InputError,
    SchemaMismatchError,
    ShapeError,
    TrainingFault,
)
from offscreen_tap.data.dataset import SampleArrays
from offscreen_tap.model.tapnet import TapNetConfig, build
from offscreen_tap.nn import functional as F
from offscreen_tap.nn.checkpoint import load_checkpoint, save_checkpoint
from offscreen_tap.nn.gradcheck import check_gradients, check_graph_gradients, relative_error
from offscreen_tap.nn.graph import ModelGraph
from offscreen_tap.nn.layers import LayerSpec, Sequential
from offscreen_tap.nn.optim import OptimizerState, adam_step
from offscreen_tap.train.trainer import head_losses


def _smooth_graph(seed=0):
    """TapNet-shaped graph with sigmoid in place of relu (no kinks)."""
    trunk = []
    for filters in (4, 6):
        trunk += [
            LayerSpec("conv1d", filters=filters, kernel=7, stride=2),
            LayerSpec("sigmoid"),
            LayerSpec("batchnorm"),
        ]
    trunk.append(LayerSpec("flatten"))
    heads = {
        "event": [LayerSpec("dense", units=4), LayerSpec("sigmoid"), LayerSpec("dense", units=2)],
        "loc_reg": [
            LayerSpec("dense", units=3),
            LayerSpec("sigmoid"),
            LayerSpec("dense", units=2),
            LayerSpec("sigmoid"),
        ],
    }
    return ModelGraph(trunk, heads, seed=seed)


class TestLayers:
    """Layer specs and parameter counts"""

    def test_dense_count(self):
        stack = Sequential([LayerSpec("dense", units=5)])
        stack.build((10,), np.random.default_rng(0))
        assert stack.count_params() == 55

    def test_conv_count(self):
        stack = Sequential([LayerSpec("conv1d", filters=8, kernel=3)])
        stack.build((50, 1), np.random.default_rng(0))
        assert stack.count_params() == 32

    def test_batchnorm_buffers_not_counted(self):
        stack = Sequential([LayerSpec("batchnorm")])
        stack.build((10, 4), np.random.default_rng(0))
        assert stack.count_params() == 8
        assert set(stack.named_buffers()) == {"0.running_mean", "0.running_var"}

    def test_invalid_specs(self):
        with pytest.raises(ConfigError):
            LayerSpec("lstm")
        with pytest.raises(ConfigError):
            LayerSpec("conv1d", filters=0, kernel=3)
        with pytest.raises(ConfigError):
            LayerSpec("dense")

    def test_concat_is_graph_level(self):
        with pytest.raises(ConfigError, match="handled by the graph"):
            Sequential([LayerSpec("concat")])

    def test_shape_mismatch_on_build(self):
        with pytest.raises(ShapeError):
            Sequential([LayerSpec("dense", units=3)]).build((10, 2), np.random.default_rng(0))

    def test_spec_round_trip(self):
        spec = LayerSpec("conv1d", filters=4, kernel=5, stride=2)
        assert LayerSpec.from_dict(spec.to_dict()) == spec


class TestGradients:
    """Reverse pass against central differences"""

    @pytest.mark.parametrize("stride,padding", [(1, "valid"), (2, "valid"), (2, "same")])
    def test_conv1d(self, rng, stride, padding):
        params = {
            "x": rng.standard_normal((3, 20, 2)),
            "kernel": rng.standard_normal((5, 2, 3)),
            "bias": rng.standard_normal(3),
        }
        out = F.conv1d_forward(params["x"], params["kernel"], params["bias"], stride, padding)
        weights = rng.standard_normal(out.shape)

        def loss():
            y = F.conv1d_forward(params["x"], params["kernel"], params["bias"], stride, padding)
            return float((y * weights).sum())

        dx, dk, db = F.conv1d_backward(weights, params["x"], params["kernel"], stride, padding)
        result = check_gradients(loss, params, {"x": dx, "kernel": dk, "bias": db}, n_samples=60)
        assert result.max_rel_error < 1e-6

    def test_batchnorm(self, rng):
        params = {
            "x": rng.standard_normal((6, 5, 3)),
            "gamma": rng.standard_normal(3),
            "beta": rng.standard_normal(3),
        }
        weights = rng.standard_normal((6, 5, 3))

        def loss():
            y, _ = F.batchnorm_forward(params["x"], params["gamma"], params["beta"])
            return float((y * weights).sum())

        _, cache = F.batchnorm_forward(params["x"], params["gamma"], params["beta"])
        dx, dgamma, dbeta = F.batchnorm_backward(weights, cache)
        grads = {"x": dx, "gamma": dgamma, "beta": dbeta}
        assert check_gradients(loss, params, grads, n_samples=60, h=1e-5).max_rel_error < 1e-5

    @pytest.mark.parametrize("kind", ["sigmoid", "softmax"])
    def test_activations(self, rng, kind):
        x = rng.standard_normal((4, 6))
        weights = rng.standard_normal((4, 6))
        fwd = F.sigmoid if kind == "sigmoid" else F.softmax
        y = fwd(x)
        if kind == "sigmoid":
            dx = F.sigmoid_backward(weights, y)
        else:
            dx = F.softmax_backward(weights, y)
        params = {"x": x}
        result = check_gradients(lambda: float((fwd(params["x"]) * weights).sum()), params,
                                 {"x": dx}, n_samples=24, h=1e-5)
        assert result.max_rel_error < 1e-6

    def test_cross_entropy_gradient(self, rng):
        params = {"logits": rng.standard_normal((5, 6))}
        classes = rng.integers(0, 6, 5)
        _, grad = F.softmax_cross_entropy(params["logits"], classes)
        result = check_gradients(
            lambda: F.softmax_cross_entropy(params["logits"], classes)[0], params,
            {"logits": grad}, n_samples=30, h=1e-5,
        )
        assert result.max_rel_error < 1e-6

    def test_composed_smooth_graph(self, rng):
        graph = _smooth_graph()
        features = rng.standard_normal((6, 300))
        devices = rng.uniform(-1, 1, (6, 7))
        classes = rng.integers(0, 2, 6)
        xy = rng.uniform(0, 1, (6, 2))

        def head_loss(outputs):
            ce, g_event = F.softmax_cross_entropy(outputs["event"], classes)
            se, g_xy = F.mse(outputs["loc_reg"], xy)
            return ce + se, {"event": g_event, "loc_reg": g_xy}

        result = check_graph_gradients(graph, features, devices, head_loss, n_samples=100, h=1e-4)
        assert result.checked == 100
        assert result.max_rel_error < 1e-3

    def test_tapnet_graph(self, samples):
        graph = build(TapNetConfig.load("model_small"))
        taps = SampleArrays.from_samples([s for s in samples if s.is_tap][:8])

        def head_loss(outputs):
            total, _, grads = head_losses(outputs, taps)
            return total, grads

        result = check_graph_gradients(
            graph, taps.features, taps.devices, head_loss, n_samples=100, h=1e-4
        )
        assert result.checked == 100
        assert max(result.errors) < 1e-3

    def test_relative_error_floor(self):
        assert relative_error(0.0, 1e-9) == pytest.approx(1e-3)


class TestModelGraph:
    """Shared trunk, heads and the parameter store"""

    def test_trunk_storage_shared(self, small_graph, rng):
        event_view = small_graph.parameters(heads=["event"])
        direction_view = small_graph.parameters(heads=["direction"])
        assert event_view["trunk.0.kernel"] is direction_view["trunk.0.kernel"]

        x, d = rng.standard_normal((3, 300)), rng.uniform(-1, 1, 7)
        before = small_graph.forward(x, d)
        event_view["trunk.0.kernel"][...] = 0.0
        after = small_graph.forward(x, d)
        for name in small_graph.heads:
            assert not np.allclose(before[name], after[name])

    def test_head_independence(self, small_graph, rng):
        x, d = rng.standard_normal((3, 300)), rng.uniform(-1, 1, 7)
        before = small_graph.forward(x, d)
        for p in small_graph.parameters(heads=["direction"], trunk=False).values():
            p[...] = 0.0
        after = small_graph.forward(x, d)
        assert np.allclose(after["direction"], 0.0)
        for name in ("event", "finger", "loc_class", "loc_reg"):
            np.testing.assert_array_equal(after[name], before[name])

    def test_backward_only_touches_given_heads(self, small_graph, rng):
        x = rng.standard_normal((4, 300))
        out = small_graph.forward(x, np.zeros(7), training=True, heads=["event"])
        inactive = ["direction", "finger", "loc_class", "loc_reg"]
        grads = small_graph.backward({"event": np.ones_like(out["event"])}, inactive)
        assert all(not g.any() for k, g in grads.items() if k.startswith("heads.direction"))
        assert any(g.any() for k, g in grads.items() if k.startswith("trunk."))

    def test_input_shape_checked(self, small_graph):
        with pytest.raises(ShapeError):
            small_graph.forward(np.zeros((2, 299)), np.zeros(7))
        with pytest.raises(ShapeError):
            small_graph.forward(np.zeros((2, 300)), np.zeros(6))

    def test_unknown_head(self, small_graph):
        with pytest.raises(ConfigError):
            small_graph.forward(np.zeros((2, 300)), np.zeros(7), heads=["mood"])

    def test_state_dict_round_trip(self, small_graph):
        other = build(TapNetConfig(seed=99))
        other.load_state_dict(small_graph.state_dict())
        for key, value in small_graph.state_dict().items():
            np.testing.assert_array_equal(other.state_dict()[key], value)

    def test_state_dict_mismatch(self, small_graph):
        state = small_graph.state_dict()
        state.pop(next(iter(state)))
        with pytest.raises(ShapeError):
            small_graph.load_state_dict(state)

    def test_input_injection_needs_one_channel(self):
        with pytest.raises(ConfigError):
            ModelGraph([LayerSpec("flatten")], {"event": [LayerSpec("dense", units=2)]},
                       layout="six_channel", device_injection="input")


class TestAdam:
    """Adam with learning-rate decay"""

    def test_zero_gradient(self):
        p = {"w": np.array([1.0, -2.0])}
        state = OptimizerState()
        adam_step(state, p, {"w": np.zeros(2)})
        np.testing.assert_array_equal(p["w"], [1.0, -2.0])
        assert state.step == 1

    def test_first_step_moves_by_lr(self):
        p = {"w": np.zeros(3)}
        adam_step(OptimizerState(learning_rate=1e-4, decay=0.0), p, {"w": np.ones(3)})
        np.testing.assert_allclose(p["w"], -1e-4, rtol=1e-3)

    def test_steps_non_increasing(self):
        p = {"w": np.zeros(1)}
        state = OptimizerState(learning_rate=1e-3)
        deltas = []
        for _ in range(5):
            before = p["w"].copy()
            adam_step(state, p, {"w": np.ones(1)})
            deltas.append(abs(float(p["w"][0] - before[0])))
        assert all(a >= b - 1e-15 for a, b in zip(deltas, deltas[1:], strict=False))

    def test_effective_lr_decays(self):
        state = OptimizerState(learning_rate=1.0, decay=0.5, step=2)
        assert state.effective_lr == pytest.approx(0.5)

    def test_non_finite_gradient(self):
        p = {"w": np.zeros(2)}
        with pytest.raises(TrainingFault):
            adam_step(OptimizerState(), p, {"w": np.array([np.nan, 0.0])})
        assert not p["w"].any()

    def test_deterministic(self, rng):
        grads = [{"w": rng.standard_normal(4)} for _ in range(10)]
        results = []
        for _ in range(2):
            p, state = {"w": np.zeros(4)}, OptimizerState()
            for g in grads:
                adam_step(state, p, g)
            results.append(p["w"])
        np.testing.assert_array_equal(*results)


class TestCheckpoint:
    """Deterministic checkpoint files"""

    def test_round_trip(self, small_graph, tmp_path):
        opt = OptimizerState()
        params = small_graph.parameters(heads=["event"])
        adam_step(opt, params, {k: np.ones_like(v) for k, v in params.items()})
        path = save_checkpoint(tmp_path / "m.npz", small_graph, {"event": opt}, extra={"a": 1})
        ckpt = load_checkpoint(path)
        assert ckpt.header["extra"] == {"a": 1}
        assert ckpt.optimizers["event"].step == 1
        assert set(ckpt.optimizers["event"].m) == set(params)
        for key, value in small_graph.state_dict().items():
            np.testing.assert_allclose(ckpt.state[key], value.astype(np.float32))

    def test_reload_is_bit_identical(self, small_graph, tmp_path):
        params = small_graph.parameters(heads=["event"])
        adam_step(OptimizerState(), params, {k: np.ones_like(v) for k, v in params.items()})
        path = save_checkpoint(tmp_path / "m.npz", small_graph)
        reloaded = small_graph.copy()
        reloaded.load_state_dict(load_checkpoint(path).state)
        for key, value in small_graph.state_dict().items():
            assert value.dtype == np.float32
            np.testing.assert_array_equal(reloaded.state_dict()[key], value)

    def test_byte_identical_saves(self, small_graph, tmp_path):
        a = save_checkpoint(tmp_path / "a.npz", small_graph)
        b = save_checkpoint(tmp_path / "b.npz", small_graph)
        assert a.read_bytes() == b.read_bytes()

    def test_schema_mismatch(self, small_graph, tmp_path):
        path = save_checkpoint(tmp_path / "m.npz", small_graph)
        with zipfile.ZipFile(path) as zf:
            entries = {name: zf.read(name) for name in zf.namelist()}
        header = json.loads(entries["header.json"])
        header["schema_version"] = 99
        entries["header.json"] = json.dumps(header).encode()
        with zipfile.ZipFile(path, "w") as zf:
            for name, data in entries.items():
                zf.writestr(name, data)
        with pytest.raises(SchemaMismatchError):
            load_checkpoint(path)

    def test_corrupt_file(self, tmp_path):
        path = tmp_path / "bad.npz"
        path.write_bytes(b"not a zip")
        with pytest.raises(InputError):
            load_checkpoint(path)
