"""Column-typed observation tables and CSV ingestion."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

COLUMN_KINDS = ("integer-count", "ordinal-category", "continuous", "categorical-group")


class IngestError(ValueError):
    pass


@dataclass
class Dataset:
    columns: dict
    kinds: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.columns[name]

    def __contains__(self, name):
        return name in self.columns

    @property
    def n(self) -> int:
        return len(next(iter(self.columns.values())))

    def subset(self, idx) -> "Dataset":
        return Dataset({k: np.asarray(v)[idx] for k, v in self.columns.items()}, dict(self.kinds))


def from_dict(columns: dict) -> Dataset:
    return Dataset({k: np.asarray(v) for k, v in columns.items()})


def ingest_csv(path, schema: dict) -> Dataset:
    """Read a CSV into typed columns.

    `schema` maps column names to kinds; ordinal columns additionally need
    declared level orders in schema["ordinal_levels"][column] and are mapped
    to 1..c+1.  Missing values and type mismatches are rejected with the
    offending row and column named.
    """
    kinds = {k: v for k, v in schema.items() if k != "ordinal_levels"}
    level_orders = schema.get("ordinal_levels", {})
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        raw_rows = list(reader)
    for col in kinds:
        if col not in header:
            raise IngestError(f"column {col!r} declared in schema but missing from {path}")
    raw = {col: [] for col in header}
    for r, row in enumerate(raw_rows, start=2):
        if len(row) != len(header):
            raise IngestError(f"{path}:{r}: expected {len(header)} fields, got {len(row)}")
        for col, val in zip(header, row):
            raw[col].append(val)

    columns = {}
    for col, values in raw.items():
        kind = kinds.get(col, "continuous")
        if kind not in COLUMN_KINDS:
            raise IngestError(f"unknown column kind {kind!r} for column {col!r}")
        out = []
        for r, val in enumerate(values, start=2):
            if val == "":
                raise IngestError(f"{path}:{r}: missing value in column {col!r}")
            if kind == "integer-count":
                try:
                    iv = int(val)
                except ValueError:
                    raise IngestError(f"{path}:{r}: non-integer count {val!r} in {col!r}") from None
                if iv < 0:
                    raise IngestError(f"{path}:{r}: negative count {val!r} in {col!r}")
                out.append(iv)
            elif kind == "ordinal-category":
                levels = level_orders.get(col)
                if levels is None:
                    raise IngestError(f"ordinal column {col!r} needs declared levels")
                if val not in levels:
                    raise IngestError(f"{path}:{r}: undeclared ordinal level {val!r} in {col!r}")
                out.append(levels.index(val) + 1)
            elif kind == "continuous":
                try:
                    out.append(float(val))
                except ValueError:
                    raise IngestError(f"{path}:{r}: non-numeric value {val!r} in {col!r}") from None
            else:  # categorical-group
                out.append(val)
        dtype = None if kind == "categorical-group" else (int if kind != "continuous" else float)
        columns[col] = np.asarray(out, dtype=dtype)
    return Dataset(columns, kinds)
