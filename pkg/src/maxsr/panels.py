"""Reading and writing wide-format returns panels.

The on-disk format is a UTF-8 CSV with a header row, an optional leading
date column (ISO-8601 or YYYYMM), one column per asset and decimal returns
in the cells.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .moments import ReturnsPanel

__all__ = ["PanelFile", "load_panel", "save_panel"]

_DATEISH = {"", "date", "month", "period", "time"}


@dataclass(frozen=True)
class PanelFile:
    """Where and how to read a returns panel."""

    path: str
    format: str = "csv_wide"
    date_column: str | None = None
    rfr_column: str | None = None

    def __post_init__(self):
        if self.format != "csv_wide":
            raise DataError(f"unsupported panel format {self.format!r}")


def load_panel(file: PanelFile | str,
               periods_per_year: float | None = None) -> ReturnsPanel:
    """Load a wide CSV of returns into a :class:`ReturnsPanel`.

    A leading column whose header is empty or date-like is treated as the
    date column when none is named explicitly. If ``rfr_column`` is given,
    that column is subtracted from every asset column (excess returns) and
    dropped.

    Raises:
        DataError: missing file, malformed cells (reported with row and
            column), non-finite values, duplicate asset names, or fewer
            than two data rows.
    """
    if isinstance(file, str):
        file = PanelFile(path=file)
    path = Path(file.path)
    if not path.is_file():
        raise DataError(f"panel file not found: {path}")
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = list(reader)

    header = [h.strip() for h in header]
    if not header:
        raise DataError(f"{path}: empty header row")

    drop = set()
    date_column = file.date_column
    if date_column is not None:
        if date_column not in header:
            raise DataError(f"{path}: date column {date_column!r} not in header")
        drop.add(header.index(date_column))
    elif header[0].lower() in _DATEISH:
        drop.add(0)

    rfr_index = None
    if file.rfr_column is not None:
        if file.rfr_column not in header:
            raise DataError(f"{path}: rfr column {file.rfr_column!r} not in header")
        rfr_index = header.index(file.rfr_column)
        drop.add(rfr_index)

    asset_cols = [j for j in range(len(header)) if j not in drop]
    if not asset_cols:
        raise DataError(f"{path}: no asset columns left after dropping metadata")
    labels = tuple(header[j] for j in asset_cols)
    if len(set(labels)) != len(labels):
        raise DataError(f"{path}: duplicate asset names in header")

    if len(rows) < 2:
        raise DataError(f"{path}: need at least 2 data rows, found {len(rows)}")

    def parse(row_idx: int, col_idx: int, text: str) -> float:
        text = text.strip()
        where = f"row {row_idx + 2}, column {header[col_idx]!r}"
        if text == "":
            raise DataError(f"{path}: blank cell at {where}")
        try:
            value = float(text)
        except ValueError:
            raise DataError(f"{path}: could not parse {text!r} at {where}") from None
        if not math.isfinite(value):
            raise DataError(f"{path}: non-finite value at {where}")
        return value

    values = np.empty((len(rows), len(asset_cols)))
    rfr_series = np.zeros(len(rows))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(
                f"{path}: row {i + 2} has {len(row)} cells, expected {len(header)}"
            )
        for out_j, j in enumerate(asset_cols):
            values[i, out_j] = parse(i, j, row[j])
        if rfr_index is not None:
            rfr_series[i] = parse(i, rfr_index, row[rfr_index])

    if rfr_index is not None:
        values = values - rfr_series[:, None]

    return ReturnsPanel(values=values, labels=labels,
                        periods_per_year=periods_per_year)


def save_panel(panel: ReturnsPanel, path: str,
               dates: list[str] | None = None) -> None:
    """Write a panel back to wide CSV with full double precision.

    Floats are rendered with 17 significant digits so a load/save round
    trip is lossless.
    """
    if dates is not None and len(dates) != panel.n:
        raise DataError(f"{len(dates)} dates for {panel.n} rows")
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        header = (["date"] if dates is not None else []) + list(panel.labels)
        writer.writerow(header)
        for i in range(panel.n):
            row = [dates[i]] if dates is not None else []
            row.extend(f"{v:.17g}" for v in panel.values[i])
            writer.writerow(row)
