"""Deterministic file emission: 17-significant-digit CSV and sorted-key JSON.

Every artifact carries a format-version stamp and the resolved run
configuration -- JSON files as top-level keys, CSV files as '#' comment
header lines -- so a run can be reproduced from any one of its outputs.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = "1"


def canonical(obj):
    """Recursively convert numpy/dataclass values into plain JSON-able types."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return canonical(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [canonical(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def json_dumps(obj) -> str:
    return json.dumps(canonical(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj, config: dict | None = None) -> None:
    doc = dict(canonical(obj))
    doc["format_version"] = FORMAT_VERSION
    if config is not None:
        doc["config"] = canonical(config)
    Path(path).write_text(json_dumps(doc))


def fmt_value(x) -> str:
    """One CSV cell: integers verbatim, floats at 17 significant digits."""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, columns, rows, config: dict | None = None) -> None:
    """Write rows of cells under a header, with provenance comment lines."""
    lines = [f"# format_version: {FORMAT_VERSION}"]
    if config is not None:
        lines.append("# config: " + json.dumps(canonical(config), sort_keys=True))
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(fmt_value(c) for c in row))
    Path(path).write_text("\n".join(lines) + "\n")
