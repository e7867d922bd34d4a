"""Read-only access to escapelab run files (JSON record + CSV table).

This package never recomputes anything: every plotted number comes from
the stored files, and records with an unknown schema version are refused.
"""

from __future__ import annotations

import csv
import json
import os

SUPPORTED_SCHEMA = 1


class FigureInputError(Exception):
    """Input files missing, malformed, or from an unsupported schema."""


def load_run(path):
    """Load a run given its JSON path (the CSV sits next to it)."""
    if not os.path.exists(path):
        raise FigureInputError(f"run file {path!r} does not exist")
    with open(path) as fh:
        record = json.load(fh)
    if record.get("schema") != SUPPORTED_SCHEMA:
        raise FigureInputError(
            f"record schema {record.get('schema')!r} is not supported "
            f"(expected {SUPPORTED_SCHEMA})"
        )
    csv_path = os.path.splitext(path)[0] + ".csv"
    rows = []
    if os.path.exists(csv_path):
        with open(csv_path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    record["csv_rows"] = rows
    return record


def column(record, name, cast=float):
    """Extract a CSV column; a missing column is a schema error by name."""
    rows = record["csv_rows"]
    if not rows:
        raise FigureInputError("run has no CSV rows")
    if name not in rows[0]:
        raise FigureInputError(f"CSV is missing required column {name!r}")
    return [cast(row[name]) for row in rows]
