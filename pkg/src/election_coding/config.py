"""Flat ``key = value`` configuration files, CSV emission and run manifests."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import itertools
import json
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__


class ConfigError(ValueError):
    pass


def parse_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def load(path: str | Path) -> dict[str, str]:
    """Read a key=value file, or the resolved ``config`` of a JSON run manifest."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        manifest = json.loads(text)
        if "config" not in manifest:
            raise ConfigError(f"{path} is JSON but has no 'config' section")
        return {k: _render(v) for k, v in manifest["config"].items()}
    return parse_text(text)


def _render(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ",".join(_render(v) for v in value)
    return str(value)


def _coerce(raw: str, annotation: str) -> Any:
    text = raw.strip()
    if text.lower() in ("none", "") and "None" in annotation:
        return None
    if "bool" in annotation:
        lowered = text.lower()
        if lowered in ("true", "yes", "1", "on"):
            return True
        if lowered in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}")
    try:
        if annotation.startswith("int"):
            return int(text)
        if annotation.startswith("float"):
            return float(text)
    except ValueError:
        raise ConfigError(f"expected {annotation.split()[0]}, got {raw!r}") from None
    return text


def coerce_fields(cls, values: dict[str, str], aliases: dict[str, Any] | None = None, skip=()) -> dict[str, Any]:
    """Typed keyword arguments for dataclass ``cls``; unknown or skipped keys are errors."""
    known = {f.name: f for f in dataclasses.fields(cls) if f.name not in skip}
    unknown = set(values) - set(known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    kwargs = {}
    for key, raw in values.items():
        annotation = str(known[key].type)
        if aliases and key in aliases and raw.strip().lower() in aliases[key]:
            kwargs[key] = aliases[key][raw.strip().lower()]
            continue
        try:
            kwargs[key] = _coerce(raw, annotation)
        except ConfigError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    return kwargs


def build(cls, values: dict[str, str], aliases: dict[str, Any] | None = None):
    """Instantiate dataclass ``cls`` from string ``values``, rejecting unknown keys."""
    return cls(**coerce_fields(cls, values, aliases))


def expand_grid(values: dict[str, str]) -> list[dict[str, str]]:
    """Cartesian product over comma-separated values, in key order."""
    keys = list(values)
    options = [[v.strip() for v in values[k].split(",")] for k in keys]
    return [dict(zip(keys, combo)) for combo in itertools.product(*options)]


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str | Path | None, header: list[str], rows: list[list[Any]]) -> str:
    """Write comma-separated rows with a header; returns the text written."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def manifest_path(out: str | Path) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


class Manifest:
    """Collects what is needed to reproduce a run; written next to its output."""

    def __init__(self, command: str, argv: list[str], config: dict, seed):
        self.started = time.time()
        self.data = {
            "command": command,
            "argv": list(argv),
            "config": config,
            "seed": seed,
            "version": __version__,
            "code": None,
            "byzantine": None,
        }

    def write(self, out: str | Path) -> Path:
        data = dict(self.data)
        data["outputs"] = {str(out): sha256_file(out)}
        data["wall_clock"] = {
            "started": datetime.fromtimestamp(self.started, timezone.utc).isoformat(),
            "elapsed_s": round(time.time() - self.started, 3),
        }
        path = manifest_path(out)
        path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")
        return path


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")
