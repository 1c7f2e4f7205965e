"""
Tests for config loading, error payloads and run manifests.
"""

import json

import pytest

from offscreen_tap.core.config import check_keys, config_hash, load_yaml, resolve_preset
from offscreen_tap.core.errors import (
    ConfigError,
    DatasetError,
    InputError,
    SchemaMismatchError,
    TapError,
    TrainingFault,
)
from offscreen_tap.core.manifest import RunManifest, manifest_path
from offscreen_tap.data.synth import SynthConfig


class TestConfig:
    """Presets and config files"""

    def test_preset_resolves(self):
        assert resolve_preset("model_small").name == "model_small.yaml"

    def test_missing_preset(self):
        with pytest.raises(ConfigError):
            load_yaml("no_such_preset")

    def test_file_path(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("seed: 4\n")
        assert load_yaml(path) == {"seed": 4}

    def test_empty_file_is_empty_mapping(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("")
        assert load_yaml(path) == {}

    def test_not_a_mapping(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError):
            load_yaml(path)

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("seed: [1,\n")
        with pytest.raises(ConfigError):
            load_yaml(path)

    def test_hash_ignores_key_order(self):
        assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
        assert config_hash(SynthConfig()) == config_hash(SynthConfig())
        assert config_hash(SynthConfig(seed=1)) != config_hash(SynthConfig())

    def test_check_keys(self):
        with pytest.raises(ConfigError, match="colour"):
            check_keys(SynthConfig, {"seed": 1, "colour": "red"})


class TestErrors:
    """Exit codes and payloads"""

    @pytest.mark.parametrize(
        "error,code",
        [
            (TapError("x"), 1),
            (InputError("x"), 2),
            (ConfigError("x"), 2),
            (DatasetError("x", 3), 2),
            (TrainingFault("x"), 3),
            (SchemaMismatchError("x"), 4),
        ],
    )
    def test_exit_codes(self, error, code):
        assert error.exit_code == code
        assert error.to_dict()["exit_code"] == code

    def test_dataset_error_names_line(self):
        err = DatasetError("bad row", 7)
        assert err.line == 7
        assert "7" in str(err)

    def test_input_errors_are_value_errors(self):
        assert isinstance(ConfigError("x"), ValueError)


class TestRunManifest:
    """Run manifests"""

    def test_path(self, tmp_path):
        assert manifest_path(tmp_path / "model.npz").name == "model.npz.manifest.json"

    def test_hashes_files(self, tmp_path):
        out = tmp_path / "out.txt"
        out.write_text("hello")
        manifest = RunManifest("synth", seed=3)
        manifest.add_output(out)
        manifest.add_input(tmp_path / "missing.txt")
        digest = manifest.outputs[str(out)]
        assert digest is not None and len(digest) == 64
        assert manifest.inputs[str(tmp_path / "missing.txt")] is None

    def test_write_read(self, tmp_path):
        manifest = RunManifest("train", version="0.1.0", seed=1, arguments={"epochs": 2})
        manifest.add_config("model", "model_small", "abc")
        path = manifest.write(tmp_path / "run.manifest.json")
        assert RunManifest.read(path) == manifest
        assert json.loads(path.read_text())["configs"]["model"]["source"] == "model_small"

    def test_deterministic_bytes(self, tmp_path):
        a = RunManifest("gate", seed=0, arguments={"b": 1, "a": 2}).write(tmp_path / "a.json")
        b = RunManifest("gate", seed=0, arguments={"a": 2, "b": 1}).write(tmp_path / "b.json")
        assert a.read_bytes() == b.read_bytes()
