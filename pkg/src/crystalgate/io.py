"""Config ingestion and artifact writers (JSON and versioned CSV)."""

from __future__ import annotations

import csv
import json
import math
import pathlib

import numpy as np

from .errors import ConfigError

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

CSV_SCHEMA_VERSION = 1
TWO_PI = 2.0 * math.pi


def load_config(path) -> dict:
    """Read a flat (or one-level sectioned) JSON or TOML file."""
    path = pathlib.Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    try:
        if path.suffix.lower() == ".toml":
            data = tomllib.loads(text)
        else:
            data = json.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return data


def parse_override(text: str):
    """``key=value`` with the value decoded as JSON when possible."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    key = key.strip().replace("-", "_")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def merge(*layers: dict) -> dict:
    """Later layers win. ``None`` values never override."""
    out = {}
    for layer in layers:
        for k, v in layer.items():
            if v is not None:
                out[k] = v
    return out


def angular(params: dict, key: str, default=None):
    """Angular frequency from ``<key>_hz`` (ordinary, times 2 pi) or ``<key>`` (rad/s)."""
    if f"{key}_hz" in params:
        return TWO_PI * float(params[f"{key}_hz"])
    if key in params:
        return float(params[key])
    return default


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return _clean(obj.item())
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, default=_default)


def write_json(path, obj) -> pathlib.Path:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj) + "\n")
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, kind: str, columns, rows) -> pathlib.Path:
    """CSV with a leading ``# crystalgate-csv v<N> <kind>`` comment line."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# crystalgate-csv v{CSV_SCHEMA_VERSION} {kind}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path):
    """Return ``(kind, columns, rows)``; numeric cells are parsed as float."""
    with pathlib.Path(path).open() as fh:
        header = fh.readline().strip().split()
        if len(header) < 3 or header[1] != "crystalgate-csv":
            raise ConfigError(f"{path} lacks the crystalgate CSV header")
        kind = header[3] if len(header) > 3 else ""
        reader = csv.reader(fh)
        columns = next(reader)
        rows = []
        for row in reader:
            parsed = []
            for cell in row:
                try:
                    parsed.append(float(cell))
                except ValueError:
                    parsed.append(cell)
            rows.append(parsed)
    return kind, columns, rows
