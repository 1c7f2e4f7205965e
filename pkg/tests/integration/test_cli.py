"""
End-to-end tests for the offscreen-tap CLI
"""

import json

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from offscreen_tap.cli.main import cli
from offscreen_tap.core.manifest import RunManifest
from offscreen_tap.core.models import period_us
from offscreen_tap.data.dataset import load_dataset, read_header

QUICK_PLAN = {
    "property_epochs": 1,
    "event_epochs": 1,
    "max_cycles": 1,
    "batch_size": 16,
}
STREAM_SYNTH = {
    "seed": 5,
    "nontap_fraction": 0.0,
    "amplitude": [4.0, 8.0],
    "tap_force_levels": [1.0, 1.0, 1.0, 1.0, 1.0],
}


def _run(*args):
    result = CliRunner().invoke(cli, ["--log-level", "WARNING", *map(str, args)])
    return result


def _write_yaml(path, data):
    path.write_text(yaml.safe_dump(data))
    return path


def _quiet_stream(path, n=1000):
    lines = ["t_us,ax,ay,az,gx,gy,gz"]
    for i in range(n):
        lines.append(f"{round(i * period_us(416.0))},0,0,9.81,0,0,0")
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Dataset, plan and trained checkpoint shared by the CLI tests"""
    root = tmp_path_factory.mktemp("cli")
    plan = _write_yaml(root / "plan.yaml", QUICK_PLAN)
    data = root / "train.jsonl"
    assert _run("--seed", 0, "synth", "--n", 80, "--out", data).exit_code == 0
    model = root / "model.npz"
    result = _run("train", data, "--plan", plan, "--out", model)
    assert result.exit_code == 0, result.output
    return {"root": root, "plan": plan, "data": data, "model": model}


class TestSynthTrainEval:
    """Dataset -> checkpoint -> report"""

    def test_dataset_written(self, workspace):
        samples = load_dataset(workspace["data"])
        assert len(samples) == 80
        assert read_header(workspace["data"])["synth_config_hash"]

    def test_report(self, workspace):
        report_path = workspace["root"] / "report.json"
        result = _run("eval", workspace["model"], workspace["data"], "--out", report_path)
        assert result.exit_code == 0, result.output
        report = json.loads(report_path.read_text())
        assert report["paradigm"] == "one_to_n"
        assert set(report["f1"]) == {"event", "direction", "finger", "loc_class"}
        assert report["location_mae"] is not None
        assert report["counts"]["samples"] == 80

    def test_manifests(self, workspace):
        manifest = RunManifest.read(workspace["model"].with_name("model.npz.manifest.json"))
        assert manifest.subcommand == "train"
        assert str(workspace["data"]) in manifest.inputs
        assert manifest.outputs[str(workspace["model"])] is not None
        assert manifest.configs["plan"]["source"] == str(workspace["plan"])
        synth = RunManifest.read(workspace["data"].with_name("train.jsonl.manifest.json"))
        assert synth.seed == 0

    def test_reruns_are_byte_identical(self, workspace, tmp_path):
        for name in ("a", "b"):
            assert _run("--seed", 0, "synth", "--n", 80, "--out", tmp_path / f"{name}.jsonl")\
                .exit_code == 0
            result = _run(
                "train", tmp_path / f"{name}.jsonl", "--plan", workspace["plan"],
                "--out", tmp_path / f"{name}.npz",
            )
            assert result.exit_code == 0, result.output
        assert (tmp_path / "a.jsonl").read_bytes() == workspace["data"].read_bytes()
        assert (tmp_path / "a.npz").read_bytes() == (tmp_path / "b.npz").read_bytes()
        ma = json.loads((tmp_path / "a.npz.manifest.json").read_text())
        mb = json.loads((tmp_path / "b.npz.manifest.json").read_text())
        assert ma["outputs"][str(tmp_path / "a.npz")] == mb["outputs"][str(tmp_path / "b.npz")]


class TestStreamCommands:
    """synth --stream-events, gate, extract and infer"""

    @pytest.fixture
    def stream(self, tmp_path):
        config = _write_yaml(tmp_path / "synth.yaml", STREAM_SYNTH)
        path = tmp_path / "stream.csv"
        result = _run("synth", "--config", config, "--stream-events", 6, "--out", path)
        assert result.exit_code == 0, result.output
        return path

    @pytest.fixture
    def gate_config(self, tmp_path):
        return _write_yaml(tmp_path / "gate.yaml", {"history_s": 0.2})

    def test_stream_and_events(self, stream):
        events = stream.with_name("stream.csv.events.jsonl").read_text().splitlines()
        assert len(events) == 6
        assert all(json.loads(e)["label"]["is_tap"] for e in events)

    def test_gate(self, stream, gate_config, tmp_path):
        out = tmp_path / "gate.txt"
        result = _run("gate", stream, "--gate-config", gate_config, "--hop", 4, "--out", out)
        assert result.exit_code == 0, result.output
        lines = out.read_text().splitlines()
        verdicts = {line.split(",")[1] for line in lines}
        assert verdicts <= {"pass", "reject"}
        assert "pass" in verdicts
        assert (tmp_path / "gate.txt.manifest.json").exists()

    def test_gate_to_stdout_writes_manifest_beside_input(self, stream, gate_config):
        result = _run("gate", stream, "--gate-config", gate_config, "--hop", 50)
        assert result.exit_code == 0
        assert stream.with_name("stream.csv.gate.manifest.json").exists()

    def test_extract(self, stream, gate_config, tmp_path):
        out = tmp_path / "extracted.jsonl"
        result = _run(
            "extract", stream, "--device-id", "A", "--gate-config", gate_config, "--out", out
        )
        assert result.exit_code == 0, result.output
        samples = load_dataset(out)
        assert len(samples) >= 6
        assert all(s.label is None for s in samples)
        assert all(np.isfinite(s.feature.values).all() for s in samples)

    def test_infer_all_candidates(self, workspace, stream, gate_config, tmp_path):
        out = tmp_path / "events.jsonl"
        result = _run(
            "infer", workspace["model"], stream, "--device-id", "A",
            "--gate-config", gate_config, "--all-candidates", "--no-timing", "--out", out,
        )
        assert result.exit_code == 0, result.output
        records = [json.loads(line) for line in out.read_text().splitlines()]
        assert len(records) >= 6
        for record in records:
            assert 0.0 <= record["event_p"] <= 1.0
            assert record["compute_ms"] is None
            assert 0 <= record["loc_region"] < 35
            assert record["wait_ms"] > 100

    def test_infer_on_quiet_stream_emits_nothing(self, workspace, tmp_path):
        stream = _quiet_stream(tmp_path / "quiet.csv")
        out = tmp_path / "events.jsonl"
        result = _run("infer", workspace["model"], stream, "--device-id", "A", "--out", out)
        assert result.exit_code == 0, result.output
        assert out.read_text() == ""


class TestErrors:
    """Exit codes and JSON error payloads"""

    def test_unknown_device(self, tmp_path):
        stream = _quiet_stream(tmp_path / "quiet.csv", n=10)
        result = _run("extract", stream, "--device-id", "Z", "--out", tmp_path / "x.jsonl")
        assert result.exit_code == 2
        assert '"exit_code": 2' in result.output

    def test_bad_stream_header(self, workspace, tmp_path):
        stream = tmp_path / "bad.csv"
        stream.write_text("time,x\n1,2\n")
        result = _run("gate", stream)
        assert result.exit_code == 2
        assert "StreamError" in result.output

    def test_corrupt_dataset(self, workspace, tmp_path):
        data = tmp_path / "bad.jsonl"
        lines = workspace["data"].read_text().splitlines()
        data.write_text("\n".join([lines[0], "{not json", *lines[2:]]) + "\n")
        result = _run("train", data, "--plan", workspace["plan"], "--out", tmp_path / "m.npz")
        assert result.exit_code == 2
        assert "line 2" in result.output

    def test_schema_mismatch(self, workspace, tmp_path):
        data = tmp_path / "future.jsonl"
        lines = workspace["data"].read_text().splitlines()
        header = json.loads(lines[0])
        header["schema_version"] = 2
        data.write_text("\n".join([json.dumps(header), *lines[1:]]) + "\n")
        result = _run("eval", workspace["model"], data)
        assert result.exit_code == 4
        assert "SchemaMismatchError" in result.output

    def test_unknown_preset(self, workspace, tmp_path):
        result = _run(
            "train", workspace["data"], "--model", "model_huge", "--out", tmp_path / "m.npz"
        )
        assert result.exit_code == 2


class TestSweepCommand:
    """sweep writes results, pivot and manifest"""

    def test_sweep(self, tmp_path):
        config = _write_yaml(
            tmp_path / "sweep.yaml",
            {"experiment": "training-size", "grid": [1], "seeds": [0, 1], "test_size": 5,
             "plan": QUICK_PLAN},
        )
        out = tmp_path / "results.csv"
        result = _run("--seed", 3, "sweep", config, "--out", out)
        assert result.exit_code == 0, result.output
        rows = out.read_text().splitlines()
        assert rows[0] == "experiment,point,seed,task,metric,value"
        assert rows[1:] == ["training-size,1,3,infeasible,f1,nan"]
        assert (tmp_path / "results_pivot.csv").exists()
        manifest = RunManifest.read(tmp_path / "results.csv.manifest.json")
        assert manifest.arguments["seeds"] == [3]
        assert str(tmp_path / "results_pivot.csv") in manifest.outputs
