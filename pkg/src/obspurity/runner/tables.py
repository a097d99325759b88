"""CSV result tables and the plain-text manifest."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

from .config import SCHEMA_VERSION

PROVENANCE = ("master_seed", "state_index", "n_instances")
AGGREGATE_STATE = -1


def format_cell(value):
    """17 significant digits for floats so the CSV round-trips losslessly."""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float) or hasattr(value, "dtype"):
        v = float(value)
        if not math.isfinite(v):
            raise ValueError(f"non-finite value {v!r} in result table")
        if v == 0.0:
            return "0"
        return format(v, ".17g")
    return str(value)


@dataclass
class ResultTable:
    """Rows share ``columns``; ``schema_version`` and the provenance triple
    are always present and come first.
    """

    name: str
    columns: list
    rows: list = field(default_factory=list)

    def __post_init__(self):
        lead = ["schema_version", "scenario_id", *PROVENANCE]
        self.columns = lead + [c for c in self.columns if c not in lead]

    def add(self, **values):
        values.setdefault("schema_version", SCHEMA_VERSION)
        missing = [c for c in self.columns if c not in values]
        if missing:
            raise KeyError(f"table {self.name!r}: missing columns {missing}")
        extra = set(values) - set(self.columns)
        if extra:
            raise KeyError(f"table {self.name!r}: unknown columns {sorted(extra)}")
        self.rows.append([format_cell(values[c]) for c in self.columns])

    def extend(self, other, **extra):
        """Append rows of ``other``, adding constant columns (used by sweeps)."""
        for key in extra:
            if key not in self.columns:
                self.columns.append(key)
                self.rows = [r + [""] for r in self.rows]
        index = {c: i for i, c in enumerate(other.columns)}
        for row in other.rows:
            values = {c: row[index[c]] if c in index else "" for c in self.columns}
            values.update({k: format_cell(v) for k, v in extra.items()})
            self.rows.append([values[c] for c in self.columns])

    def __len__(self):
        return len(self.rows)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(self.columns)
        writer.writerows(self.rows)
        return buf.getvalue()

    def write(self, directory):
        path = Path(directory) / f"{self.name}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())
        return path


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


@dataclass
class Manifest:
    """Axes and notes for each table, written as ``key: value`` lines."""

    scenario_id: str
    entries: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    def describe(self, table, x, y, description=""):
        self.entries.append((table, x, y, description))

    def note(self, text):
        if text not in self.notes:
            self.notes.append(text)

    def render(self):
        lines = [f"scenario: {self.scenario_id}", f"schema_version: {SCHEMA_VERSION}"]
        for table, x, y, desc in self.entries:
            lines.append(f"table: {table}.csv | x: {x} | y: {y} | {desc}".rstrip(" |"))
        for text in self.notes:
            lines.append(f"note: {text}")
        for key, seconds in self.timing.items():
            lines.append(f"timing: {key} {seconds:.3f} s")
        return "\n".join(lines) + "\n"

    def write(self, directory):
        path = Path(directory) / "manifest.txt"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.render(), encoding="utf-8")
        return path
