"""
Tests for the JSON-lines dataset store.
"""

import json

import numpy as np
import pytest

from offscreen_tap.core.errors import DatasetError, InputError, SchemaMismatchError
from offscreen_tap.data.dataset import SampleArrays, load_dataset, read_header, save_dataset
from offscreen_tap.data.labels import Sample
from offscreen_tap.data.synth import SynthConfig, synthesize


class TestDatasetFile:
    """Save and load"""

    def test_round_trip(self, samples, tmp_path):
        path = save_dataset(tmp_path / "d.jsonl", samples[:10], synth_config_hash="abc")
        loaded = load_dataset(path)
        assert len(loaded) == 10
        for a, b in zip(samples[:10], loaded, strict=True):
            np.testing.assert_allclose(a.feature.values, b.feature.values, rtol=1e-6, atol=1e-6)
            assert a.label == b.label
            assert a.device == b.device
        assert read_header(path)["synth_config_hash"] == "abc"

    def test_ten_thousand_lossless_at_single_precision(self, tmp_path):
        original = synthesize(SynthConfig(seed=9), 10_000)
        loaded = load_dataset(save_dataset(tmp_path / "big.jsonl", original))
        assert len(loaded) == 10_000
        for a, b in zip(original, loaded, strict=True):
            np.testing.assert_array_equal(
                a.feature.values.astype(np.float32), b.feature.values.astype(np.float32)
            )
            assert a.label == b.label

    def test_saves_are_byte_identical(self, samples, tmp_path):
        a = save_dataset(tmp_path / "a.jsonl", samples[:5])
        b = save_dataset(tmp_path / "b.jsonl", samples[:5])
        assert a.read_bytes() == b.read_bytes()

    def test_no_tmp_left_behind(self, samples, tmp_path):
        save_dataset(tmp_path / "d.jsonl", samples[:3])
        assert [p.name for p in tmp_path.iterdir()] == ["d.jsonl"]

    def test_empty_file_is_empty_dataset(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert load_dataset(path) == []

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            load_dataset(tmp_path / "nope.jsonl")

    def test_truncated(self, samples, tmp_path):
        path = save_dataset(tmp_path / "d.jsonl", samples[:4])
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(DatasetError, match="truncated"):
            load_dataset(path)

    def test_corrupt_line_named(self, samples, tmp_path):
        path = save_dataset(tmp_path / "d.jsonl", samples[:4])
        lines = path.read_text().splitlines()
        lines[2] = lines[2][:40]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetError) as exc:
            load_dataset(path)
        assert exc.value.line == 3

    def test_bad_feature_length(self, samples, tmp_path):
        path = save_dataset(tmp_path / "d.jsonl", samples[:1])
        lines = path.read_text().splitlines()
        row = json.loads(lines[1])
        row["feature"] = row["feature"][:10]
        lines[1] = json.dumps(row)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(InputError):
            load_dataset(path)

    def test_schema_mismatch(self, samples, tmp_path):
        path = save_dataset(tmp_path / "d.jsonl", samples[:1])
        lines = path.read_text().splitlines()
        header = json.loads(lines[0])
        header["schema_version"] = 9
        lines[0] = json.dumps(header)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(SchemaMismatchError):
            load_dataset(path)

    def test_not_a_dataset(self, tmp_path):
        path = tmp_path / "other.jsonl"
        path.write_text('{"format": "something-else"}\n')
        with pytest.raises(DatasetError):
            load_dataset(path)


class TestSampleArrays:
    """Column view"""

    def test_targets(self, samples, sample_arrays):
        assert len(sample_arrays) == len(samples)
        taps = sample_arrays.is_tap
        assert (sample_arrays.direction[taps] >= 0).all()
        assert (sample_arrays.direction[~taps] == -1).all()
        assert np.isnan(sample_arrays.loc_xy[~taps]).all()
        assert sample_arrays.targets("event").tolist() == taps.astype(int).tolist()
        assert sample_arrays.targets("loc_reg").shape == (len(samples), 2)

    def test_device_rows_normalized(self, sample_arrays):
        assert sample_arrays.devices.shape[1] == 7
        assert np.abs(sample_arrays.devices).max() <= 1.0

    def test_subset_and_concat(self, sample_arrays):
        a = sample_arrays.subset(np.arange(10))
        b = sample_arrays.subset(np.arange(10, 20))
        both = SampleArrays.concat([a, b])
        np.testing.assert_array_equal(both.features, sample_arrays.features[:20])

    def test_unlabeled_sample_rejected(self, samples):
        bare = Sample(feature=samples[0].feature, device=samples[0].device, label=None)
        with pytest.raises(InputError):
            SampleArrays.from_samples([bare])
