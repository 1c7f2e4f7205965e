"""
Configuration helpers for offscreen-tap.

Config files are YAML (JSON parses as YAML too). A bare name such as
``model_small`` resolves to a preset bundled in ``offscreen_tap/presets``;
anything containing a path separator or a suffix is read from disk.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import fields
from importlib.resources import files
from pathlib import Path
from typing import Any

import yaml

from offscreen_tap.core.errors import ConfigError

log = logging.getLogger(__name__)


def presets_dir() -> Path:
    """Directory holding the bundled presets."""
    return Path(str(files("offscreen_tap") / "presets"))


def resolve_preset(name_or_path: str | Path) -> Path:
    """Map a preset name or a file path to an existing file."""
    text = str(name_or_path)
    if "/" in text or "\\" in text or Path(text).suffix:
        path = Path(text)
    else:
        path = presets_dir() / f"{text}.yaml"
    if not path.exists():
        raise ConfigError(f"Config not found: {name_or_path}")
    return path


def load_yaml(name_or_path: str | Path) -> dict[str, Any]:
    path = resolve_preset(name_or_path)
    try:
        with open(path, encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid config file {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must contain a mapping")
    log.debug("Loaded config %s", path)
    return data


def config_hash(obj: Any) -> str:
    """SHA-256 over canonical JSON; stable across runs and key order."""
    if hasattr(obj, "to_dict"):
        obj = obj.to_dict()
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def file_hash(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def check_keys(cls: type, data: dict[str, Any]) -> None:
    """Reject keys that are not fields of the dataclass ``cls``."""
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown {cls.__name__} keys: {', '.join(unknown)}")
