"""CSV ingestion with schema validation.

Input files are comma-separated with a required header row, UTF-8, ``.``
decimal separator.  Validation failures carry the 1-based file line and
the column name so the command line can point at the offending cell.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import SchemaError


@dataclass(frozen=True)
class InputSchema:
    """Column bindings for an observed-data file.

    Exactly one of ``response`` (linear model) or ``time``+``event`` (AFT)
    must be bound.  The core area comes from ``area`` or, when every core
    has the same size, from ``area_value``.
    """

    count: str
    response: str | None = None
    time: str | None = None
    event: str | None = None
    area: str | None = None
    area_value: float | None = None
    covariates: tuple = ()
    group: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        has_linear = self.response is not None
        has_surv = self.time is not None or self.event is not None
        if has_linear and has_surv:
            raise SchemaError("bind either a response column or time/event, not both")
        if not has_linear and (self.time is None or self.event is None):
            raise SchemaError("survival input needs both time and event columns")
        if self.area is None and self.area_value is None:
            raise SchemaError("bind an area column or give a constant area value")
        if self.area_value is not None and not self.area_value > 0:
            raise SchemaError(f"constant area must be positive, got {self.area_value}")

    @property
    def is_survival(self):
        return self.time is not None


def _parse_float(raw, line, column):
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise SchemaError(f"expected a number, got {raw!r}", line=line, column=column) from None


def read_table(path):
    """Read a CSV file into (header, rows of strings)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("input file is empty") from None
        rows = list(reader)
    if not rows:
        raise SchemaError("input file has a header but no data rows")
    return [h.strip() for h in header], rows


def read_dataset(path, schema: InputSchema):
    """Load and validate an observed-data file.

    Returns (dataset, group labels or None).  For survival input the
    dataset's ``y`` holds log survival times.
    """
    header, rows = read_table(path)
    index = {name: i for i, name in enumerate(header)}

    needed = [schema.count] + list(schema.covariates)
    needed += [schema.response] if schema.response else [schema.time, schema.event]
    if schema.area:
        needed.append(schema.area)
    if schema.group:
        needed.append(schema.group)
    for name in needed:
        if name not in index:
            raise SchemaError(f"column {name!r} not found in header", line=1, column=name)

    n = len(rows)
    y = np.empty(n)
    w = np.empty(n, dtype=np.int64)
    a = np.empty(n)
    event = np.ones(n, dtype=int)
    z = np.empty((n, len(schema.covariates)))
    groups = [None] * n

    for i, row in enumerate(rows):
        line = i + 2  # header is line 1
        if len(row) != len(header):
            raise SchemaError(
                f"expected {len(header)} fields, got {len(row)}", line=line
            )

        raw_w = _parse_float(row[index[schema.count]], line, schema.count)
        if raw_w < 0 or raw_w != int(raw_w):
            raise SchemaError(
                f"count must be a non-negative integer, got {row[index[schema.count]]!r}",
                line=line,
                column=schema.count,
            )
        w[i] = int(raw_w)

        if schema.area:
            a[i] = _parse_float(row[index[schema.area]], line, schema.area)
            if not a[i] > 0:
                raise SchemaError(
                    f"area must be positive, got {a[i]}", line=line, column=schema.area
                )
        else:
            a[i] = schema.area_value

        if schema.response:
            y[i] = _parse_float(row[index[schema.response]], line, schema.response)
        else:
            t = _parse_float(row[index[schema.time]], line, schema.time)
            if not t > 0:
                raise SchemaError(
                    f"survival time must be positive, got {t}",
                    line=line,
                    column=schema.time,
                )
            y[i] = np.log(t)
            e = _parse_float(row[index[schema.event]], line, schema.event)
            if e not in (0.0, 1.0):
                raise SchemaError(
                    f"event flag must be 0 or 1, got {row[index[schema.event]]!r}",
                    line=line,
                    column=schema.event,
                )
            event[i] = int(e)

        for j, name in enumerate(schema.covariates):
            z[i, j] = _parse_float(row[index[name]], line, name)

        if schema.group:
            groups[i] = row[index[schema.group]].strip()

    dataset = Dataset(y=y, w=w, a=a, z=z, event=event)
    return dataset, (groups if schema.group else None)


def write_csv(path, header, rows):
    """Write rows of already-formatted strings as CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
