"""Dataset ingestion and the two benchmark fixtures.

CSV files must have a header row, comma separators, ``.`` decimal points,
and no missing or non-finite entries.  The two fixtures used by the data
tests (athlete body measurements and Italian olive oil fatty acids) are
not redistributed with the package; ``scripts/fetch_data.py`` downloads
and prepares them, and the dependent tests skip with a visible marker
until the files exist.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DATA_DIR = Path(__file__).resolve().parent / "data"

AIS_FILE = "ais.csv"
AIS_COLUMNS = ("BMI", "SSF", "Bfat")
OLIVE_FILE = "olive.csv"
OLIVE_COLUMNS = ("Linolenic", "Arachidic")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Named numeric matrix with column labels and provenance."""

    name: str
    columns: tuple
    values: np.ndarray
    source: str

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def load_csv(path, columns=None, name: str | None = None) -> Dataset:
    """Read a CSV into a :class:`Dataset`.

    Parameters
    ----------
    path : str or Path
        CSV file with a header row.
    columns : sequence of str, optional
        Subset and order of columns to keep; defaults to all.

    Raises
    ------
    ValueError
        On missing columns, non-numeric cells, or non-finite values.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if columns is None:
            columns = header
        missing = [c for c in columns if c not in header]
        if missing:
            raise ValueError(f"{path}: columns not found: {missing}")
        idx = [header.index(c) for c in columns]
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append([float(row[i]) for i in idx])
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}:{line_no}: non-numeric row") from exc
    if not rows:
        raise ValueError(f"{path}: no data rows")
    values = np.asarray(rows, dtype=float)
    if not np.isfinite(values).all():
        raise ValueError(f"{path}: non-finite values present")
    return Dataset(name=name or path.stem, columns=tuple(columns),
                   values=values, source=str(path))


def fixture_path(filename: str) -> Path:
    return DATA_DIR / filename


def fixture_available(filename: str) -> bool:
    return fixture_path(filename).exists()


def _load_fixture(filename: str, columns: tuple, expect_shape: tuple) -> Dataset:
    path = fixture_path(filename)
    if not path.exists():
        raise FileNotFoundError(
            f"fixture {filename} not present; run scripts/fetch_data.py "
            f"to download and prepare it (writes to {DATA_DIR})")
    ds = load_csv(path, columns=columns)
    if ds.values.shape != expect_shape:
        raise ValueError(
            f"{path}: unexpected shape {ds.values.shape}, expected "
            f"{expect_shape}; re-run scripts/fetch_data.py")
    return ds


def load_ais() -> Dataset:
    """First 100 athletes (the female block), columns BMI, SSF, Bfat."""
    return _load_fixture(AIS_FILE, AIS_COLUMNS, (100, 3))


def load_olive() -> Dataset:
    """323 southern-Italy olive oils, linolenic and arachidic acids."""
    return _load_fixture(OLIVE_FILE, OLIVE_COLUMNS, (323, 2))
