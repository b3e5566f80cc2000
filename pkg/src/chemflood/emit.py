"""Reproducible CSV/JSON emission.

Every CSV starts with one ``#`` line holding the run manifest as sorted JSON.
Floats are written with 17 significant digits so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

from chemflood import tolerances

VERSION = "0.1.0"


def manifest(subcommand: str, model_source, model_config: dict, outputs=(), **extra) -> dict:
    return {
        "subcommand": subcommand,
        "model": str(model_source) if model_source is not None else None,
        "model_config": model_config,
        "tolerances": asdict(tolerances.get()),
        "outputs": [str(p) for p in outputs],
        "deterministic": True,
        "version": VERSION,
        **extra,
    }


def _cell(x):
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return format(x, ".17g")
    return str(x)


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):
        return _jsonable(obj.item())
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2)


def write_csv(path, header_manifest: dict, columns, rows) -> None:
    buf = io.StringIO()
    buf.write("# " + json.dumps(_jsonable(header_manifest), sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(x) for x in row])
    Path(path).write_text(buf.getvalue())


def read_csv(path):
    """Return ``(manifest, columns, rows)`` with rows parsed as floats."""
    lines = Path(path).read_text().splitlines()
    meta = json.loads(lines[0][1:].strip())
    reader = csv.reader(lines[1:])
    columns = next(reader)
    rows = [[float(x) for x in r] for r in reader]
    return meta, columns, rows


def emit_json(obj, path=None) -> None:
    text = dumps(obj)
    if path:
        Path(path).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")
