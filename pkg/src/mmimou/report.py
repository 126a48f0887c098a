"""CSV tables and the JSON run manifest.

Every table is a header row plus data rows. Column names carry their unit
as a suffix (``_dbm``, ``_mbps``, ``_mw``) or are dimensionless counts and
fractions. Floats are written with ``%.10g`` so that re-runs with the same
config and seed produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import to_dict

FLOAT_FORMAT = "%.10g"


@dataclass
class Table:
    name: str  # file stem
    columns: list
    rows: list = field(default_factory=list)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"{self.name}: expected {len(self.columns)} values, got {len(values)}")
        self.rows.append(values)


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return FLOAT_FORMAT % v
    return str(value)


def table_to_csv(table: Table) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def _inside(path: str, root: str) -> bool:
    root = os.path.realpath(root)
    return os.path.commonpath([os.path.realpath(path), root]) == root


def write_table(table: Table, out_dir: str) -> str:
    """Write ``<out_dir>/<name>.csv`` and return its path."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{table.name}.csv")
    if not _inside(path, out_dir):
        raise ValueError(f"refusing to write {path!r} outside {out_dir!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(table_to_csv(table))
    return path


def read_table(path: str):
    """Header and rows (as strings) of a CSV written by :func:`write_table`."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


class RunManifest:
    """JSON record of a run: config echo, seed, version, timestamps, outputs.

    The file is written when the run starts and rewritten when it finishes.
    """

    def __init__(self, out_dir: str, experiment: str, cfg, seed: int, argv=None):
        self.path = os.path.join(out_dir, f"{experiment}_manifest.json")
        self.data = {
            "experiment": experiment,
            "version": __version__,
            "seed": int(seed),
            "argv": list(argv or []),
            "config": to_dict(cfg),
            "started_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "finished_at": None,
            "wall_time_s": None,
            "status": "running",
            "outputs": [],
        }
        self._t0 = time.perf_counter()
        os.makedirs(out_dir, exist_ok=True)
        self._flush()

    def _flush(self):
        with open(self.path, "w", encoding="utf-8") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")

    def finalize(self, outputs, status="ok", error=None):
        self.data["outputs"] = [os.path.basename(p) for p in outputs]
        self.data["finished_at"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        self.data["wall_time_s"] = round(time.perf_counter() - self._t0, 3)
        self.data["status"] = status
        if error is not None:
            self.data["error"] = str(error)
        self._flush()
