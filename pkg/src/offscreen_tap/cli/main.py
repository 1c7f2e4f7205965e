"""
offscreen-tap CLI
=================
Click-based command-line interface for the tap pipeline.

Usage:
    offscreen-tap synth --n 2000 --out data/train.jsonl
    offscreen-tap synth --stream-events 20 --out data/stream.csv
    offscreen-tap gate data/stream.csv
    offscreen-tap extract data/stream.csv --device-id A --out data/extracted.jsonl
    offscreen-tap train data/train.jsonl --model model_small --out runs/model.npz
    offscreen-tap eval runs/model.npz data/test.jsonl --paradigm leave_one_out
    offscreen-tap sweep sweep_training_size --out runs/training_size.csv
    offscreen-tap infer runs/model.npz data/stream.csv --device-id A

Data goes to stdout (or ``--out``), logs to stderr. Every run writes one
manifest beside its output (``<output>.manifest.json``), or beside its main
input when the output is stdout. Failures print a JSON error object on
stderr and exit 2 (bad input), 3 (training fault) or 4 (schema mismatch).
"""

from __future__ import annotations

import functools
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from offscreen_tap import __version__
from offscreen_tap.core import RunManifest, TapError, config_hash, manifest_path
from offscreen_tap.core.models import DEFAULT_SAMPLE_RATE_HZ, Direction, FingerPart

log = logging.getLogger(__name__)


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except TapError as e:
            click.echo(json.dumps(e.to_dict()), err=True)
            sys.exit(e.exit_code)
        except OSError as e:
            error = {"error": type(e).__name__, "message": str(e), "exit_code": 2}
            click.echo(json.dumps(error), err=True)
            sys.exit(2)

    return wrapper


def _manifest(ctx: click.Context, subcommand: str, **arguments) -> RunManifest:
    return RunManifest(
        subcommand=subcommand,
        version=__version__,
        seed=ctx.obj.get("seed"),
        arguments={k: str(v) if isinstance(v, Path) else v for k, v in arguments.items()},
    )


def _finish(manifest: RunManifest, output: str | Path | None, anchor: str | Path) -> None:
    """Record ``output`` and write the manifest beside it (or beside ``anchor``)."""
    if output is not None:
        manifest.add_output(output)
        target = manifest_path(output)
    else:
        anchor = Path(anchor)
        target = manifest_path(anchor.with_name(f"{anchor.name}.{manifest.subcommand}"))
    manifest.write(target)


def _emit_lines(lines: list[str], out: str | None) -> None:
    if out is None:
        for line in lines:
            click.echo(line)
        return
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as f:
        f.writelines(line + "\n" for line in lines)


def _gate_config(path: str | None):
    from offscreen_tap.core.config import load_yaml
    from offscreen_tap.signal.gating import GateConfig

    return GateConfig.from_dict(load_yaml(path)) if path else GateConfig()


@click.group()
@click.version_option(version=__version__, prog_name="offscreen-tap")
@click.option(
    "--log-level",
    default="INFO",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    help="Log level for stderr output",
)
@click.option("--seed", default=None, type=int, help="Seed threaded through all randomness")
@click.pass_context
def cli(ctx, log_level, seed):
    """offscreen-tap - Off-screen tap detection from IMU streams"""
    logging.basicConfig(
        level=log_level.upper(),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed


# ---------------------------------------------------------------------------
# Data
# ---------------------------------------------------------------------------


@cli.command()
@click.option("--config", "config_name", default="synth_default", help="SynthConfig preset or file")
@click.option("--n", "n_samples", default=1000, type=int, help="Number of samples")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output file")
@click.option("--devices", default=None, type=click.Path(exists=True), help="Device registry file")
@click.option(
    "--stream-events",
    default=None,
    type=int,
    help="Write a raw stream CSV with this many events instead of a dataset",
)
@click.pass_context
@_handle_errors
def synth(ctx, config_name, n_samples, out, devices, stream_events):
    """Generate a labeled synthetic dataset (or a raw replay stream)."""
    from offscreen_tap.data.dataset import save_dataset
    from offscreen_tap.data.synth import SynthConfig, synthesize, synthesize_stream
    from offscreen_tap.signal.features import DeviceRegistry
    from offscreen_tap.signal.pipeline import write_stream_csv

    config = SynthConfig.load(config_name)
    if ctx.obj["seed"] is not None:
        config = replace(config, seed=ctx.obj["seed"])
    registry = DeviceRegistry.load(devices)
    manifest = _manifest(
        ctx, "synth", config=config_name, n=n_samples, stream_events=stream_events
    )
    manifest.add_config("synth", config_name, config_hash(config))
    if devices:
        manifest.add_input(devices)
    Path(out).parent.mkdir(parents=True, exist_ok=True)

    if stream_events is not None:
        stream = synthesize_stream(config, stream_events, registry)
        write_stream_csv(out, stream.frames)
        events_path = Path(out).with_name(Path(out).name + ".events.jsonl")
        lines = [
            json.dumps({"frame_index": e.frame_index, "label": e.label.to_dict()}, sort_keys=True)
            for e in stream.events
        ]
        _emit_lines(lines, str(events_path))
        manifest.add_output(events_path)
        click.echo(f"Wrote stream with {stream_events} events to {out}", err=True)
    else:
        samples = synthesize(config, n_samples, registry)
        save_dataset(out, samples, synth_config_hash=config_hash(config))
        click.echo(f"Wrote {len(samples)} samples to {out}", err=True)
    _finish(manifest, out, out)


@cli.command()
@click.argument("stream_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--gate-config", default=None, help="GateConfig file")
@click.option("--rate", default=DEFAULT_SAMPLE_RATE_HZ, type=float, help="Sample rate (Hz)")
@click.option("--hop", default=1, type=int, help="Gate every N-th frame")
@click.option("--out", default=None, type=click.Path(dir_okay=False), help="Output file")
@click.pass_context
@_handle_errors
def gate(ctx, stream_csv, gate_config, rate, hop, out):
    """Gate a stream: one ``t_us,pass|reject,anchor_index`` line per window."""
    from offscreen_tap.core.errors import InputError
    from offscreen_tap.signal.pipeline import read_stream_csv
    from offscreen_tap.signal.stream import gate_stream

    if hop < 1:
        raise InputError("--hop must be >= 1")
    config = _gate_config(gate_config)
    frames = read_stream_csv(stream_csv)
    lines = [
        f"{t_us},{decision.verdict},{'' if anchor is None else anchor}"
        for t_us, decision, anchor in gate_stream(frames, config, rate, hop)
    ]
    _emit_lines(lines, out)

    manifest = _manifest(ctx, "gate", rate=rate, hop=hop)
    manifest.add_config("gate", gate_config or "default", config_hash(config))
    manifest.add_input(stream_csv)
    _finish(manifest, out, stream_csv)


@cli.command()
@click.argument("stream_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--device-id", required=True, help="Device the stream was recorded on")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output dataset")
@click.option("--gate-config", default=None, help="GateConfig file")
@click.option("--devices", default=None, type=click.Path(exists=True), help="Device registry file")
@click.option("--rate", default=DEFAULT_SAMPLE_RATE_HZ, type=float, help="Sample rate (Hz)")
@click.pass_context
@_handle_errors
def extract(ctx, stream_csv, device_id, out, gate_config, devices, rate):
    """Gate a stream and write the aligned feature vectors as unlabeled samples."""
    from offscreen_tap.data.dataset import save_dataset
    from offscreen_tap.data.labels import Sample
    from offscreen_tap.signal.features import DeviceRegistry
    from offscreen_tap.signal.pipeline import read_stream_csv
    from offscreen_tap.signal.stream import TapDetector

    config = _gate_config(gate_config)
    device = DeviceRegistry.load(devices)[device_id]
    candidates = TapDetector(config, rate).run(read_stream_csv(stream_csv))
    samples = [Sample(feature=c.feature, device=device) for c in candidates]
    save_dataset(out, samples)
    click.echo(f"Extracted {len(samples)} candidates to {out}", err=True)

    manifest = _manifest(ctx, "extract", device_id=device_id, rate=rate)
    manifest.add_config("gate", gate_config or "default", config_hash(config))
    manifest.add_input(stream_csv)
    if devices:
        manifest.add_input(devices)
    _finish(manifest, out, stream_csv)


# ---------------------------------------------------------------------------
# Training / evaluation
# ---------------------------------------------------------------------------


@cli.command()
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_name", default="model_small", help="TapNetConfig preset or file")
@click.option("--plan", "plan_name", default="plan_default", help="TrainPlan preset or file")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Checkpoint path")
@click.pass_context
@_handle_errors
def train(ctx, dataset, model_name, plan_name, out):
    """Train a graph on a dataset and write a checkpoint."""
    from offscreen_tap.data.dataset import SampleArrays, load_dataset
    from offscreen_tap.model.tapnet import TapNetConfig, build
    from offscreen_tap.nn.checkpoint import save_checkpoint
    from offscreen_tap.train.trainer import TrainPlan, train_mixed

    model_config = TapNetConfig.load(model_name)
    plan = TrainPlan.load(plan_name)
    seed = ctx.obj["seed"]
    if seed is not None:
        model_config = replace(model_config, seed=seed)
        plan = replace(plan, seed=seed)

    data = SampleArrays.from_samples(load_dataset(dataset))
    graph = build(model_config)
    result = train_mixed(graph, data, plan)
    save_checkpoint(
        out,
        graph,
        result.optimizers,
        seed=model_config.seed,
        extra={"plan": plan.to_dict(), "history": result.history.to_dict()},
    )
    click.echo(
        f"Trained {len(result.history.cycles)} cycles, best validation loss "
        f"{result.history.best_val_loss:.5f}; checkpoint at {out}",
        err=True,
    )

    manifest = _manifest(ctx, "train")
    manifest.seed = model_config.seed
    manifest.add_config("model", model_name, config_hash(model_config))
    manifest.add_config("plan", plan_name, config_hash(plan))
    manifest.add_input(dataset)
    _finish(manifest, out, dataset)


@cli.command("eval")
@click.argument("checkpoint", type=click.Path(exists=True, dir_okay=False))
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--paradigm",
    default="one_to_n",
    type=click.Choice(["one_to_n", "leave_one_out"]),
    help="Evaluation paradigm",
)
@click.option("--plan", "plan_name", default="plan_default", help="Plan for leave_one_out")
@click.option("--out", default=None, type=click.Path(dir_okay=False), help="Report JSON path")
@click.pass_context
@_handle_errors
def eval_cmd(ctx, checkpoint, dataset, paradigm, plan_name, out):
    """Evaluate a checkpoint and emit a MetricsReport as JSON."""
    from offscreen_tap.data.dataset import load_dataset
    from offscreen_tap.model.tapnet import load_model
    from offscreen_tap.train.evaluate import evaluate
    from offscreen_tap.train.trainer import TrainPlan

    graph, _ = load_model(checkpoint)
    plan = TrainPlan.load(plan_name)
    if ctx.obj["seed"] is not None:
        plan = replace(plan, seed=ctx.obj["seed"])
    report = evaluate(graph, load_dataset(dataset), paradigm, plan)
    _emit_lines([json.dumps(report.to_dict(), indent=2, sort_keys=True)], out)

    manifest = _manifest(ctx, "eval", paradigm=paradigm)
    if paradigm == "leave_one_out":
        manifest.add_config("plan", plan_name, config_hash(plan))
    manifest.add_input(checkpoint)
    manifest.add_input(dataset)
    _finish(manifest, out, checkpoint)


@cli.command()
@click.argument("experiment_config")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Results CSV path")
@click.option("--workers", default=None, type=int, help="Worker processes (overrides config)")
@click.pass_context
@_handle_errors
def sweep(ctx, experiment_config, out, workers):
    """Run a learning-experiment sweep and write results CSV plus a pivot table."""
    from offscreen_tap.train.sweep import SweepConfig, write_results
    from offscreen_tap.train.sweep import sweep as run_sweep

    config = SweepConfig.load(experiment_config)
    if workers is not None:
        config = replace(config, workers=workers)
    if ctx.obj["seed"] is not None:
        config = replace(config, seeds=[ctx.obj["seed"]])
    rows = run_sweep(config)
    results, table = write_results(out, rows)
    click.echo(f"Wrote {len(rows)} rows to {results} (pivot: {table})", err=True)

    manifest = _manifest(ctx, "sweep", experiment=config.experiment, seeds=config.seeds)
    manifest.add_config("sweep", experiment_config, config_hash(replace(config, workers=1)))
    manifest.add_output(table)
    _finish(manifest, results, out)


# ---------------------------------------------------------------------------
# Inference
# ---------------------------------------------------------------------------


def _softmax_row(logits: np.ndarray) -> np.ndarray:
    z = np.exp(logits - logits.max())
    return z / z.sum()


@cli.command()
@click.argument("checkpoint", type=click.Path(exists=True, dir_okay=False))
@click.argument("stream_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--device-id", required=True, help="Device the stream was recorded on")
@click.option("--gate-config", default=None, help="GateConfig file")
@click.option("--devices", default=None, type=click.Path(exists=True), help="Device registry file")
@click.option("--rate", default=DEFAULT_SAMPLE_RATE_HZ, type=float, help="Sample rate (Hz)")
@click.option("--all-candidates", is_flag=True, help="Also emit candidates the event head rejects")
@click.option("--timing/--no-timing", default=True, help="Report compute_ms per event")
@click.option("--out", default=None, type=click.Path(dir_okay=False), help="Output JSON-lines")
@click.pass_context
@_handle_errors
def infer(
    ctx, checkpoint, stream_csv, device_id, gate_config, devices, rate, all_candidates, timing, out
):
    """End-to-end gate -> extract -> forward, one JSON line per detected tap."""
    from offscreen_tap.model.tapnet import forward, load_model
    from offscreen_tap.signal.features import DeviceRegistry
    from offscreen_tap.signal.pipeline import read_stream_csv
    from offscreen_tap.signal.stream import TapDetector

    graph, _ = load_model(checkpoint)
    config = _gate_config(gate_config)
    device = DeviceRegistry.load(devices).normalized(device_id)
    directions = list(Direction)
    fingers = list(FingerPart)

    lines: list[str] = []
    for candidate in TapDetector(config, rate).run(read_stream_csv(stream_csv)):
        start = time.perf_counter()
        output = forward(graph, candidate.feature, device)
        compute_ms = (time.perf_counter() - start) * 1000.0

        event_p = None
        if output.event_logits is not None:
            event_p = float(_softmax_row(output.event_logits[0])[1])
        is_tap = event_p is None or event_p >= 0.5
        if not is_tap and not all_candidates:
            continue
        record = {
            "t_us": candidate.anchor_timestamp,
            "anchor_frame": candidate.anchor_frame,
            "is_tap": is_tap,
            "event_p": event_p,
            "direction": None,
            "finger": None,
            "loc_region": None,
            "loc_xy": None,
            "wait_ms": candidate.wait_ms,
            "compute_ms": compute_ms if timing else None,
        }
        if output.direction_logits is not None:
            record["direction"] = directions[int(output.direction_logits[0].argmax())].value
        if output.finger_logits is not None:
            record["finger"] = fingers[int(output.finger_logits[0].argmax())].value
        if output.location_logits is not None:
            record["loc_region"] = int(output.location_logits[0].argmax())
        if output.location_xy is not None:
            record["loc_xy"] = [float(v) for v in output.location_xy[0]]
        lines.append(json.dumps(record, sort_keys=True))
    _emit_lines(lines, out)
    log.info("Emitted %d tap events", len(lines))

    manifest = _manifest(ctx, "infer", device_id=device_id, rate=rate)
    manifest.add_config("gate", gate_config or "default", config_hash(config))
    manifest.add_input(checkpoint)
    manifest.add_input(stream_csv)
    if devices:
        manifest.add_input(devices)
    _finish(manifest, out, stream_csv)


if __name__ == "__main__":
    cli()
