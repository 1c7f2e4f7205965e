"""
Learning-experiment sweeps on synthetic data.

Experiments:

* ``training-size``: MIMO against SISO (and optionally the TinyCNN baseline)
  at each training-sample count in the grid.
* ``cross-device``: with a per-device budget from the grid, joint A+B
  training, pre-train on one device then fine-tune on the other, and
  single-device training.
* ``channel-ablation``: one-channel against six-channel trunks at each
  capacity preset in the grid (``small`` / ``large``).

Every (point, seed) job is independent and runs in its own process when
``workers > 1``; results keep grid order regardless of worker count.
Rows are ``experiment,point,seed,task,metric,value`` where task is
``<series>:<head>``.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from offscreen_tap.core.config import check_keys, load_yaml
from offscreen_tap.core.errors import ConfigError, InputError, TapError
from offscreen_tap.data.dataset import SampleArrays
from offscreen_tap.data.synth import SynthConfig, synthesize
from offscreen_tap.model.tapnet import TapNetConfig, build
from offscreen_tap.nn.graph import ModelGraph
from offscreen_tap.train.evaluate import build_report, predict
from offscreen_tap.train.metrics import MetricsReport
from offscreen_tap.train.trainer import TrainPlan, fine_tune, train_mixed

log = logging.getLogger(__name__)

EXPERIMENTS = ("training-size", "cross-device", "channel-ablation")
RESULT_FIELDS = ("experiment", "point", "seed", "task", "metric", "value")
PIVOT_FIELDS = ("experiment", "point", "task", "metric", "mean", "std", "n_seeds")
TEST_SEED_OFFSET = 1_000_003
CAPACITY_PRESETS = {
    "small": ("model_small", "six_channel_small"),
    "large": ("model_large", "six_channel_large"),
}


@dataclass
class SweepConfig:
    experiment: str = "training-size"
    grid: list[Any] = field(default_factory=lambda: [1000])
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    model: str = "model_small"
    synth: dict[str, Any] = field(default_factory=dict)
    plan: dict[str, Any] = field(default_factory=dict)
    siso_tasks: list[str] = field(default_factory=lambda: ["direction"])
    include_tiny_cnn: bool = False
    devices: list[str] = field(default_factory=lambda: ["A", "B"])
    train_size: int = 2000
    test_size: int = 500
    workers: int = 1

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"Unknown experiment {self.experiment!r}; expected {EXPERIMENTS}")
        if not self.grid:
            raise ConfigError("grid must not be empty")
        if not self.seeds:
            raise ConfigError("seeds must not be empty")
        if self.test_size < 1 or self.train_size < 1:
            raise ConfigError("train_size and test_size must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.experiment == "cross-device" and len(self.devices) != 2:
            raise ConfigError("cross-device needs exactly two devices")
        # Overrides must parse before any job starts.
        SynthConfig.from_dict(self.synth)
        TrainPlan.from_dict(self.plan)

    def synth_config(self, seed: int, **overrides: Any) -> SynthConfig:
        return SynthConfig.from_dict({**self.synth, "seed": seed, **overrides})

    def train_plan(self, seed: int) -> TrainPlan:
        return TrainPlan.from_dict({**self.plan, "seed": seed})

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SweepConfig:
        check_keys(cls, data)
        return cls(**data)

    @classmethod
    def load(cls, name_or_path: str | Path) -> SweepConfig:
        return cls.from_dict(load_yaml(name_or_path))


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    point: str
    seed: int
    task: str
    metric: str
    value: float

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------


def _report_rows(
    experiment: str, point: Any, seed: int, series: str, report: MetricsReport
) -> list[ResultRow]:
    rows = [
        ResultRow(experiment, str(point), seed, f"{series}:{head}", "f1", value)
        for head, value in report.f1.items()
    ]
    if report.location_mae is not None:
        rows.append(
            ResultRow(experiment, str(point), seed, f"{series}:loc_reg", "location_mae",
                      report.location_mae)
        )
    return rows


def _score(graph: ModelGraph, test: SampleArrays) -> MetricsReport:
    return build_report(predict(graph, test), test)


def _fit(config: TapNetConfig, data: SampleArrays, plan: TrainPlan) -> ModelGraph:
    graph = build(config)
    train_mixed(graph, data, plan)
    return graph


def _arrays(config: SynthConfig, n: int) -> SampleArrays:
    return SampleArrays.from_samples(synthesize(config, n))


def _training_size(config: SweepConfig, point: Any, seed: int) -> list[ResultRow]:
    n = int(point)
    plan = config.train_plan(seed)
    train_data = _arrays(config.synth_config(seed), n)
    test = _arrays(config.synth_config(seed + TEST_SEED_OFFSET), config.test_size)
    model = replace(TapNetConfig.load(config.model), seed=seed)

    rows = _report_rows(config.experiment, point, seed, "mimo",
                        _score(_fit(model, train_data, plan), test))
    for task in config.siso_tasks:
        graph = _fit(model.as_siso(task), train_data, plan)
        rows += _report_rows(config.experiment, point, seed, "siso", _score(graph, test))
    if config.include_tiny_cnn:
        tiny = replace(TapNetConfig.load("tiny_cnn"), seed=seed)
        for task in config.siso_tasks:
            graph = _fit(tiny.as_siso(task), train_data, plan)
            rows += _report_rows(config.experiment, point, seed, "tiny_cnn", _score(graph, test))
    return rows


def _cross_device(config: SweepConfig, point: Any, seed: int) -> list[ResultRow]:
    n = int(point)
    plan = config.train_plan(seed)
    model = replace(TapNetConfig.load(config.model), seed=seed)
    train_sets: dict[str, SampleArrays] = {}
    test_sets: dict[str, SampleArrays] = {}
    for k, device in enumerate(config.devices):
        # Distinct seeds per device so the two sets share no draws.
        train_sets[device] = _arrays(config.synth_config(seed * 2 + k, devices=[device]), n)
        test_sets[device] = _arrays(
            config.synth_config(seed * 2 + k + TEST_SEED_OFFSET, devices=[device]),
            config.test_size,
        )
    a, b = config.devices
    exp = config.experiment
    rows: list[ResultRow] = []

    joint = _fit(model, SampleArrays.concat([train_sets[a], train_sets[b]]), plan)
    for device in (a, b):
        rows += _report_rows(exp, point, seed, f"{a}+{b}/{device}",
                             _score(joint, test_sets[device]))
    for src, dst in ((a, b), (b, a)):
        graph = _fit(model, train_sets[src], plan)
        fine_tune(graph, train_sets[dst], plan)
        rows += _report_rows(exp, point, seed, f"{src}->{dst}", _score(graph, test_sets[dst]))
    for device in (a, b):
        graph = _fit(model, train_sets[device], plan)
        rows += _report_rows(exp, point, seed, device, _score(graph, test_sets[device]))
    return rows


def _channel_ablation(config: SweepConfig, point: Any, seed: int) -> list[ResultRow]:
    if point not in CAPACITY_PRESETS:
        raise ConfigError(f"Unknown capacity preset {point!r}; expected {sorted(CAPACITY_PRESETS)}")
    plan = config.train_plan(seed)
    train_data = _arrays(config.synth_config(seed), config.train_size)
    test = _arrays(config.synth_config(seed + TEST_SEED_OFFSET), config.test_size)
    rows: list[ResultRow] = []
    for series, preset in zip(("one_channel", "six_channel"), CAPACITY_PRESETS[point], strict=True):
        model = replace(TapNetConfig.load(preset), seed=seed)
        graph = _fit(model, train_data, plan)
        rows += _report_rows(config.experiment, point, seed, series, _score(graph, test))
        rows.append(ResultRow(config.experiment, str(point), seed, f"{series}:model", "params",
                              float(graph.count_params())))
    return rows


_RUNNERS = {
    "training-size": _training_size,
    "cross-device": _cross_device,
    "channel-ablation": _channel_ablation,
}


def run_point(config: SweepConfig, point: Any, seed: int) -> list[ResultRow]:
    """
    Rows for one grid point and seed. An infeasible point yields a single
    NaN row instead of failing the sweep.
    """
    try:
        return _RUNNERS[config.experiment](config, point, seed)
    except TapError as e:
        log.warning("Sweep point %s (seed %d) infeasible: %s", point, seed, e)
        return [ResultRow(config.experiment, str(point), seed, "infeasible", "f1", math.nan)]


def _run_job(job: tuple[SweepConfig, Any, int]) -> list[ResultRow]:
    return run_point(*job)


def sweep(config: SweepConfig) -> list[ResultRow]:
    """Run every (point, seed) of ``config`` and return rows in grid order."""
    jobs = [(config, point, seed) for point in config.grid for seed in config.seeds]
    log.info("Sweep %s: %d jobs on %d worker(s)", config.experiment, len(jobs), config.workers)
    if config.workers == 1:
        results = [_run_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as executor:
            results = list(executor.map(_run_job, jobs))
    return [row for rows in results for row in rows]


def plateau_budget(
    rows: Sequence[ResultRow],
    series: Sequence[str],
    head: str = "direction",
    tolerance: float = 0.02,
) -> float:
    """
    Smallest grid point whose F1 for ``head``, averaged over seeds and the
    given ``series``, comes within ``tolerance`` of that curve's best value.
    NaN when no point has a finite score.
    """
    tasks = {f"{s}:{head}" for s in series}
    curve: dict[float, list[float]] = {}
    for row in rows:
        if row.task in tasks and row.metric == "f1" and not math.isnan(row.value):
            curve.setdefault(float(row.point), []).append(row.value)
    if not curve:
        return math.nan
    means = {point: float(np.mean(values)) for point, values in sorted(curve.items())}
    best = max(means.values())
    return next(point for point, value in means.items() if value >= best - tolerance)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _format(value: float) -> str:
    return "nan" if math.isnan(value) else repr(float(value))


def _atomic_write_csv(path: Path, fieldnames: Sequence[str], rows: list[dict[str, Any]]) -> None:
    tmp = path.with_name(f"{path.name}.{os.getpid()}.tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def pivot(rows: Sequence[ResultRow]) -> list[dict[str, Any]]:
    """Mean and standard deviation over seeds per (experiment, point, task, metric)."""
    groups: dict[tuple[str, str, str, str], list[float]] = {}
    for row in rows:
        groups.setdefault((row.experiment, row.point, row.task, row.metric), []).append(row.value)
    table = []
    for (experiment, point, task, metric), values in groups.items():
        finite = np.array([v for v in values if not math.isnan(v)])
        mean = float(finite.mean()) if finite.size else math.nan
        std = float(finite.std()) if finite.size else math.nan
        table.append({
            "experiment": experiment, "point": point, "task": task, "metric": metric,
            "mean": _format(mean), "std": _format(std), "n_seeds": int(finite.size),
        })
    return table


def pivot_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}_pivot{path.suffix or '.csv'}")


def write_results(path: str | Path, rows: Sequence[ResultRow]) -> tuple[Path, Path]:
    """Write the long-form results CSV and its pivot table beside it."""
    path = Path(path)
    if path.is_dir():
        raise InputError(f"Results path is a directory: {path}")
    path.parent.mkdir(parents=True, exist_ok=True)
    records = [{**row.to_dict(), "value": _format(row.value)} for row in rows]
    _atomic_write_csv(path, RESULT_FIELDS, records)
    table_path = pivot_path(path)
    _atomic_write_csv(table_path, PIVOT_FIELDS, pivot(rows))
    log.info("Wrote %d result rows to %s", len(rows), path)
    return path, table_path
