"""Persisted run records: one JSON record per run plus one CSV per result
table.  Rows are reproduced bit-exactly by reruns with the same seed;
timestamps live only in the JSON envelope."""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field, asdict

from ..errors import SchemaError

SCHEMA_VERSION = 1


@dataclass
class RunRecord:
    run_id: str
    command: str
    config_hash: str
    seed: int
    started: str
    finished: str
    rows: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    config_text: str = ""
    schema: int = SCHEMA_VERSION


def make_run_id(command, config_hash, seed):
    return f"{command}-{config_hash[:10]}-s{seed}"


def utc_stamp():
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def persist_record(record: RunRecord, outdir, formats="both"):
    """Write <run_id>.json and/or <run_id>.csv; returns the paths written."""
    os.makedirs(outdir, exist_ok=True)
    paths = []
    if formats in ("json", "both"):
        path = os.path.join(outdir, f"{record.run_id}.json")
        with open(path, "w") as fh:
            json.dump(asdict(record), fh, indent=1, sort_keys=True, default=_json_default)
            fh.write("\n")
        paths.append(path)
    if formats in ("csv", "both") and record.rows:
        path = os.path.join(outdir, f"{record.run_id}.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(record.rows[0].keys()))
            writer.writeheader()
            for row in record.rows:
                writer.writerow({k: _fmt(v) for k, v in row.items()})
        paths.append(path)
    return paths


def _json_default(value):
    if hasattr(value, "item"):  # numpy scalars
        return value.item()
    raise TypeError(f"not JSON serializable: {type(value)}")


def _fmt(value):
    if isinstance(value, float):  # includes numpy float scalars
        return repr(float(value))
    if hasattr(value, "item"):
        return value.item()
    return value


def load_record(path):
    """Load a RunRecord JSON; schema mismatches raise a versioned error."""
    with open(path) as fh:
        data = json.load(fh)
    if data.get("schema") != SCHEMA_VERSION:
        raise SchemaError(
            f"record schema {data.get('schema')!r} != supported {SCHEMA_VERSION}"
        )
    return RunRecord(**data)
