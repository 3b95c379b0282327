"""CSV emission helpers shared by the table-producing modules.

Floats are written with 17 significant digits so every value round-trips
bit-exactly; integers stay integers.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path


def fmt_cell(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def csv_text(header: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt_cell(row[col]) for col in header])
    return buf.getvalue()


def write_csv(path: str | Path, header: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(csv_text(header, rows))
