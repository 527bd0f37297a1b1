"""CSV ingestion for the lmgquench output schema.

The renderer consumes the simulator's files as published: UTF-8 CSV,
one '#' comment line, a header row, floats in scientific notation.
Inputs are never modified.
"""

from __future__ import annotations

import csv


class MissingColumnError(ValueError):
    def __init__(self, column, path):
        super().__init__(f"column {column!r} missing from {path}")
        self.column = column
        self.path = path


class EmptyDataError(ValueError):
    pass


def read_table(path: str) -> dict[str, list[str]]:
    """Raw string columns keyed by header name."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(ln for ln in fh if not ln.startswith("#"))
                if r]
    if not rows:
        raise EmptyDataError(f"{path} holds no header row")
    header = rows[0]
    columns = {name: [] for name in header}
    for row in rows[1:]:
        for name, cell in zip(header, row):
            columns[name].append(cell)
    return columns


def require(table: dict, path: str, *names) -> list[list[str]]:
    out = []
    for name in names:
        if name not in table:
            raise MissingColumnError(name, path)
        out.append(table[name])
    if out and not out[0]:
        raise EmptyDataError(f"{path} has no data rows")
    return out


def floats(values: list[str]) -> list[float]:
    return [float(v) for v in values]


def classify(path: str) -> str:
    """Identify a CSV by its header columns."""
    table = read_table(path)
    cols = set(table)
    if {"t", "lambda", "segment", "jx"} <= cols:
        return "trace"
    if {"sector", "index", "energy", "p_initial", "p_final"} <= cols:
        return "energy_dist"
    if {"jx", "p_initial", "p_final"} <= cols:
        return "jx_dist"
    if {"tau_q_ratio", "delta_s", "e_dis_ratio"} <= cols:
        return "sweep"
    if {"lambda", "sector", "index", "energy", "e_c"} <= cols:
        return "spectrum"
    if {"delta_s", "jx_band_lo", "jx_band_hi"} <= cols:
        return "summary"
    raise ValueError(f"cannot classify {path}: columns {sorted(cols)}")
