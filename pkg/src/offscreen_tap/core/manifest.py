"""
Run manifests.

Each CLI run writes one manifest beside its primary output. It records the
subcommand, its arguments, the config files and their content hashes, the
seed, and hashes of every input and output file. No timestamps are written,
so reruns with the same inputs produce the same manifest.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from offscreen_tap.core.config import file_hash

log = logging.getLogger(__name__)

MANIFEST_SUFFIX = ".manifest.json"


def manifest_path(output: str | Path) -> Path:
    """``runs/model.npz`` -> ``runs/model.npz.manifest.json``"""
    output = Path(output)
    return output.with_name(output.name + MANIFEST_SUFFIX)


def _hash_or_none(path: str | Path) -> str | None:
    p = Path(path)
    return file_hash(p) if p.is_file() else None


@dataclass
class RunManifest:
    subcommand: str
    version: str = ""
    seed: int | None = None
    arguments: dict[str, Any] = field(default_factory=dict)
    configs: dict[str, dict[str, str | None]] = field(default_factory=dict)
    inputs: dict[str, str | None] = field(default_factory=dict)
    outputs: dict[str, str | None] = field(default_factory=dict)

    def add_config(self, role: str, name_or_path: str | Path, content_hash: str) -> None:
        """Record a config by name (preset or path) and the hash of its parsed content."""
        self.configs[role] = {"source": str(name_or_path), "hash": content_hash}

    def add_input(self, path: str | Path) -> None:
        self.inputs[str(path)] = _hash_or_none(path)

    def add_output(self, path: str | Path) -> None:
        self.outputs[str(path)] = _hash_or_none(path)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunManifest:
        return cls(**data)

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(f"{path.name}.{os.getpid()}.tmp")
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
        log.debug("Wrote manifest %s", path)
        return path

    @classmethod
    def read(cls, path: str | Path) -> RunManifest:
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))
