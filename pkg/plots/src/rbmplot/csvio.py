"""Reader for the simulator's long-format result CSVs.

Contract: an optional leading `# scenario=... hash=...` comment, then a
header row with the columns series,seed,x_name,x,observable,unit,value.
Anything else is a schema error naming the offending columns.
"""

from __future__ import annotations

import csv
from pathlib import Path

EXPECTED_COLUMNS = ("series", "seed", "x_name", "x", "observable", "unit", "value")


class SchemaError(ValueError):
    """The input CSV does not match the simulator's column contract."""


def read_result_csv(path) -> list[dict]:
    path = Path(path)
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("#"):
            fh.seek(0)
        reader = csv.DictReader(fh)
        fields = tuple(reader.fieldnames or ())
        missing = [c for c in EXPECTED_COLUMNS if c not in fields]
        if missing:
            raise SchemaError(
                f"{path}: missing required columns {missing}; found {list(fields)}"
            )
        rows = []
        for row in reader:
            row["x"] = float(row["x"])
            row["value"] = float(row["value"])
            rows.append(row)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def select(rows: list[dict], **match) -> list[dict]:
    return [r for r in rows if all(r[k] == v for k, v in match.items())]
