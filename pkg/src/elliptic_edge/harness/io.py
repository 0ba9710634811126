"""Result files: CSV tables, resolved config, summary JSON."""

from __future__ import annotations

import csv
import json
import math
import os
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional

import jsonschema

from ..errors import EllipticEdgeError
from .experiments import ResultBundle, Table

SUMMARY_NAME = "summary.json"
CONFIG_NAME = "config.json"
RUN_INFO_NAME = "run_info.txt"


class OutputError(EllipticEdgeError, OSError):
    """Writing or reading result files failed; carries the offending path."""

    def __init__(self, message, path):
        super().__init__(f"{path}: {message}")
        self.message = message
        self.path = str(path)

    def __reduce__(self):
        return (type(self), (self.message, self.path))


def load_schema() -> dict:
    text = resources.files("elliptic_edge.harness").joinpath("summary.schema.json").read_text()
    return json.loads(text)


def _strict(obj):
    # JSON has no NaN; undefined statistics are written as null
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _strict(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_strict(v) for v in obj]
    return obj


def validate_summary(summary: dict) -> None:
    jsonschema.validate(_strict(summary), load_schema())


def summary_json(summary: dict) -> str:
    return json.dumps(_strict(summary), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, table: Table) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([_cell(v) for v in row])


def read_csv(path) -> Table:
    """Read a table written by ``write_csv``. The ``count`` column is integer,
    every other column float."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OutputError(exc.strerror or str(exc), path) from exc
    if not rows:
        raise OutputError("empty CSV file", path)
    cols = tuple(rows[0])
    conv = [int if c == "count" else float for c in cols]
    out = []
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != len(cols):
            raise OutputError(f"line {line} has {len(row)} fields, expected {len(cols)}", path)
        out.append(tuple(f(v) for f, v in zip(conv, row)))
    return Table(cols, out)


def planned_files(bundle: ResultBundle) -> List[str]:
    return [CONFIG_NAME, *sorted(bundle.tables), SUMMARY_NAME, RUN_INFO_NAME]


def emit(bundle: ResultBundle, output_dir, force: bool = False,
         workers: Optional[int] = None) -> Dict[str, Path]:
    """Write every result file of ``bundle`` into ``output_dir``.

    Refuses to replace existing files unless ``force``. Wall time and worker
    count go to run_info.txt so the other files depend only on the config.
    """
    out = Path(output_dir)
    validate_summary(bundle.summary)
    names = planned_files(bundle)
    if not force:
        clash = [n for n in names if (out / n).exists()]
        if clash:
            raise OutputError(f"refusing to overwrite {', '.join(clash)} without --force", out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(exc.strerror or str(exc), out) from exc
    written = {}
    current = out
    try:
        current = out / CONFIG_NAME
        current.write_text(bundle.config.to_json())
        written[CONFIG_NAME] = current
        for name in sorted(bundle.tables):
            current = out / name
            write_csv(current, bundle.tables[name])
            written[name] = current
        current = out / SUMMARY_NAME
        current.write_text(summary_json(bundle.summary))
        written[SUMMARY_NAME] = current
        current = out / RUN_INFO_NAME
        current.write_text(f"wall_time_seconds={bundle.wall_time!r}\n"
                           f"workers={workers if workers is not None else bundle.config.worker_count}\n"
                           f"output_dir={os.path.abspath(out)}\n")
        written[RUN_INFO_NAME] = current
    except OSError as exc:
        raise OutputError(exc.strerror or str(exc), current) from exc
    return written
