"""
Checkpoint container.

A checkpoint is a zip of ``.npy`` entries (readable with ``np.load``) plus a
``header.json`` entry::

    header.json                         schema version, model config, layer specs,
                                        seed, optimizer scalars, caller extras
    param/trunk.0.kernel.npy            float32
    buffer/trunk.2.running_mean.npy     float32
    opt/<phase>/m/<param name>.npy      float32
    opt/<phase>/v/<param name>.npy      float32

Entries are written in sorted order with a fixed timestamp, so saving the
same state twice gives byte-identical files.
"""

from __future__ import annotations

import io
import json
import logging
import os
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from offscreen_tap.core.errors import InputError, SchemaMismatchError
from offscreen_tap.nn.graph import ModelGraph
from offscreen_tap.nn.optim import OptimizerState

log = logging.getLogger(__name__)

CHECKPOINT_SCHEMA_VERSION = 1
HEADER_ENTRY = "header.json"
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


@dataclass
class Checkpoint:
    header: dict[str, Any]
    state: dict[str, np.ndarray]
    optimizers: dict[str, OptimizerState] = field(default_factory=dict)

    @property
    def model_config(self) -> dict[str, Any]:
        return self.header.get("model_config", {})


def _npy_bytes(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.lib.format.write_array(buf, np.ascontiguousarray(array), allow_pickle=False)
    return buf.getvalue()


def _write_entry(zf: zipfile.ZipFile, name: str, data: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_ZIP_EPOCH)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def save_checkpoint(
    path: str | Path,
    graph: ModelGraph,
    optimizers: dict[str, OptimizerState] | None = None,
    seed: int | None = None,
    extra: dict[str, Any] | None = None,
) -> Path:
    """Write ``graph`` (and optimizer moments) atomically to ``path``."""
    path = Path(path)
    optimizers = optimizers or {}
    arrays: dict[str, np.ndarray] = {
        k: v.astype(np.float32) for k, v in graph.state_dict().items()
    }
    for phase, state in optimizers.items():
        for name in state.m:
            arrays[f"opt/{phase}/m/{name}"] = state.m[name].astype(np.float32)
            arrays[f"opt/{phase}/v/{name}"] = state.v[name].astype(np.float32)

    header = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "model_config": graph.config,
        "layer_specs": graph.layer_specs(),
        "seed": graph.seed if seed is None else seed,
        "optimizers": {phase: s.scalars() for phase, s in sorted(optimizers.items())},
        "extra": extra or {},
    }

    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with zipfile.ZipFile(tmp, "w") as zf:
        _write_entry(zf, HEADER_ENTRY, json.dumps(header, sort_keys=True, indent=2).encode())
        for name in sorted(arrays):
            _write_entry(zf, f"{name}.npy", _npy_bytes(arrays[name]))
    os.replace(tmp, path)
    log.info("Saved checkpoint %s (%d arrays)", path, len(arrays))
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Read a checkpoint; arrays come back as float64."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"Checkpoint not found: {path}")
    try:
        with zipfile.ZipFile(path) as zf:
            header = json.loads(zf.read(HEADER_ENTRY))
            arrays = {
                name[: -len(".npy")]: np.lib.format.read_array(
                    io.BytesIO(zf.read(name)), allow_pickle=False
                ).astype(np.float64)
                for name in zf.namelist()
                if name.endswith(".npy")
            }
    except (zipfile.BadZipFile, KeyError, ValueError) as e:
        raise InputError(f"Corrupt checkpoint {path}: {e}") from e

    version = header.get("schema_version")
    if version != CHECKPOINT_SCHEMA_VERSION:
        raise SchemaMismatchError(
            f"Checkpoint {path} has schema version {version}, "
            f"expected {CHECKPOINT_SCHEMA_VERSION}"
        )

    state = {k: v for k, v in arrays.items() if not k.startswith("opt/")}
    optimizers: dict[str, OptimizerState] = {}
    for phase, scalars in header.get("optimizers", {}).items():
        opt = OptimizerState(**scalars)
        prefix = f"opt/{phase}/"
        for key, value in arrays.items():
            if key.startswith(prefix + "m/"):
                opt.m[key[len(prefix) + 2 :]] = value
            elif key.startswith(prefix + "v/"):
                opt.v[key[len(prefix) + 2 :]] = value
        optimizers[phase] = opt
    return Checkpoint(header=header, state=state, optimizers=optimizers)
