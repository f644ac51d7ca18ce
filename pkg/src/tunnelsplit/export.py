"""Deterministic CSV/JSON emission.

Data files are byte-identical for identical inputs: floats carry 17
significant digits, row order is fixed, and run metadata (timestamps,
host details) lives in a separate sidecar file, never in the data.
"""

from __future__ import annotations

import io
import json
import time

SCHEMA_PREFIX = "tunnelsplit"


def fmt(value):
    """One CSV cell: 17-significant-digit floats, empty for missing."""
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, (int, bool)):
        return str(int(value))
    return str(value)


def csv_text(schema, version, columns, rows):
    """Render rows (dicts) as CSV with a schema-version header comment."""
    out = io.StringIO()
    out.write(f"# schema: {SCHEMA_PREFIX}/{schema} v{version}\n")
    out.write(",".join(columns) + "\n")
    for row in rows:
        out.write(",".join(fmt(row.get(c)) for c in columns) + "\n")
    return out.getvalue()


def _round17(obj):
    if isinstance(obj, float):
        return float(format(obj, ".17g"))
    if isinstance(obj, dict):
        return {k: _round17(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round17(v) for v in obj]
    return obj


def json_text(schema, version, columns, rows):
    doc = {"schema": f"{SCHEMA_PREFIX}/{schema}", "version": version,
           "columns": list(columns),
           "rows": [_round17({c: r.get(c) for c in columns}) for r in rows]}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def render(schema, version, columns, rows, form="csv"):
    if form == "json":
        return json_text(schema, version, columns, rows)
    return csv_text(schema, version, columns, rows)


def write_output(text, out_path, config=None):
    """Write a data file plus a metadata sidecar (the sidecar may carry
    timestamps; the data file must not)."""
    if out_path is None:
        return text
    with open(out_path, "w") as fh:
        fh.write(text)
    if config is not None:
        meta = {"config": {k: v for k, v in sorted(config.items()) if v is not None},
                "written_at": time.strftime("%Y-%m-%dT%H:%M:%S")}
        with open(str(out_path) + ".meta.json", "w") as fh:
            json.dump(meta, fh, indent=1, sort_keys=True)
            fh.write("\n")
    return None
