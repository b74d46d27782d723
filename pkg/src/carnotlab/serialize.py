"""Deterministic JSON and CSV emission for reports.

Floats are printed with %.17g everywhere and keys keep their insertion
order, so identical resolved configs reproduce byte-identical files.
Non-finite values are rejected rather than written.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .errors import CarnotLabError

__all__ = ["format_float", "dumps_json", "write_json", "csv_text", "write_csv"]


def format_float(x):
    x = float(x)
    if not math.isfinite(x):
        raise CarnotLabError(f"non-finite value in report: {x!r}")
    return "%.17g" % x


def _render(obj, indent, out):
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = list(obj.items())
        for pos, (key, val) in enumerate(items):
            if not isinstance(key, str):
                raise CarnotLabError(f"JSON keys must be strings, got {key!r}")
            out.append(f"{pad}  {json.dumps(key)}: ")
            _render(val, indent + 1, out)
            out.append(",\n" if pos + 1 < len(items) else "\n")
        out.append(pad + "}")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif obj is None:
        out.append("null")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(obj))
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else list(obj)
        if not seq:
            out.append("[]")
            return
        out.append("[\n")
        for pos, val in enumerate(seq):
            out.append(pad + "  ")
            _render(val, indent + 1, out)
            out.append(",\n" if pos + 1 < len(seq) else "\n")
        out.append(pad + "]")
    else:
        raise CarnotLabError(f"cannot serialize {type(obj).__name__}: {obj!r}")


def dumps_json(obj):
    """Render a report dict to deterministic JSON text."""
    out = []
    _render(obj, 0, out)
    out.append("\n")
    return "".join(out)


def write_json(path, obj):
    text = dumps_json(obj)
    with open(path, "w") as fh:
        fh.write(text)
    return text


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    text = str(value)
    if any(ch in text for ch in ",\"\n"):
        text = '"' + text.replace('"', '""') + '"'
    return text


def csv_text(header, rows, preamble=None):
    """CSV with an optional '# key=value' preamble of the resolved config."""
    lines = []
    for key, value in (preamble or {}).items():
        lines.append(f"# {key}={_cell(value)}")
    lines.append(",".join(header))
    for row in rows:
        if len(row) != len(header):
            raise CarnotLabError(
                f"CSV row has {len(row)} cells, header has {len(header)}")
        lines.append(",".join(_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(path, header, rows, preamble=None):
    text = csv_text(header, rows, preamble=preamble)
    with open(path, "w") as fh:
        fh.write(text)
    return text
