"""Coefficient files, JSON reports and CSV traces, all written atomically."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fields import ScalarField
from .grid import build_grid

SCHEMA_VERSION = 1


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    return obj


def dumps(obj) -> str:
    # json writes floats with repr, which round-trips binary doubles exactly
    return json.dumps(_jsonable(obj), indent=2, sort_keys=False) + "\n"


def write_report(path, command: str, body: dict) -> Path:
    doc = {"schema_version": SCHEMA_VERSION, "command": command}
    doc.update(body)
    return atomic_write(path, dumps(doc))


def field_to_dict(w: ScalarField) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "scalar_field",
        "L": w.grid.L,
        "azimuth_count": w.grid.azimuth_count,
        "coeffs": [float(c) for c in w.coeffs],
    }


def save_field(path, w: ScalarField) -> Path:
    return atomic_write(path, dumps(field_to_dict(w)))


def field_from_dict(doc: dict) -> ScalarField:
    if doc.get("kind") != "scalar_field":
        raise ConfigError("not a scalar field file")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {doc.get('schema_version')!r}")
    grid = build_grid(int(doc["L"]), int(doc["azimuth_count"]))
    coeffs = np.array(doc["coeffs"], dtype=float)
    if coeffs.shape != (grid.dim,):
        raise ConfigError(f"expected {grid.dim} coefficients for L = {grid.L}, got {coeffs.size}")
    return ScalarField(grid, coeffs)


def load_field(path) -> ScalarField:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read field file {path}: {exc}") from None
    return field_from_dict(doc)


def trace_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    flat = []
    for r in rows:
        d = {k: v for k, v in r.items() if k != "xi"}
        d.update({f"xi{j + 1}": x for j, x in enumerate(r.get("xi", []))})
        flat.append(d)
    writer = csv.DictWriter(buf, fieldnames=list(flat[0]), lineterminator="\n")
    writer.writeheader()
    for d in flat:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in d.items()})
    return buf.getvalue()


def write_trace(path, rows: list[dict]) -> Path:
    return atomic_write(path, trace_csv(rows))
