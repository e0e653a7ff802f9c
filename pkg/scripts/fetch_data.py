#!/usr/bin/env python3
"""Fetch and prepare the two benchmark data fixtures.

Downloads public CSV copies of the source datasets, selects the rows and
columns used by the data-fit tests, and writes them under ``src/mmn/data/``
together with SHA-256 checksums:

- ``ais.csv``: first 100 rows (the female athletes) of the Australian
  Institute of Sport data, columns BMI, SSF, Bfat (body-fat percentage).
- ``olive.csv``: the 323 southern-Italy rows of the Italian olive oil
  data, columns Linolenic and Arachidic (fatty acid composition x100).

Run from anywhere: ``python scripts/fetch_data.py``.  Requires network
access.  The prepared files are small derived extracts; see the source
packages (R: DAAG/sn for ais, pdfCluster/pgmm for the olive oils) for the
full data and documentation.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import sys
import urllib.request
from pathlib import Path

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "mmn" / "data"

AIS_URLS = [
    "https://vincentarelbundock.github.io/Rdatasets/csv/DAAG/ais.csv",
    "https://raw.githubusercontent.com/vincentarelbundock/Rdatasets/master/csv/DAAG/ais.csv",
]
OLIVE_URLS = [
    "https://vincentarelbundock.github.io/Rdatasets/csv/pdfCluster/oliveoil.csv",
    "https://raw.githubusercontent.com/vincentarelbundock/Rdatasets/master/csv/pdfCluster/oliveoil.csv",
]


def fetch_text(urls: list[str]) -> str:
    last = None
    for url in urls:
        try:
            with urllib.request.urlopen(url, timeout=60) as resp:
                return resp.read().decode("utf-8")
        except Exception as exc:  # noqa: BLE001 - report the last failure
            print(f"  failed {url}: {exc}", file=sys.stderr)
            last = exc
    raise SystemExit(f"could not download any of {urls}: {last}")


def read_rows(text: str) -> tuple[list[str], list[list[str]]]:
    reader = csv.reader(io.StringIO(text))
    header = [h.strip().strip('"') for h in next(reader)]
    return header, [row for row in reader if row]


def col(header: list[str], *names: str) -> int:
    for name in names:
        for i, h in enumerate(header):
            if h.lower() == name.lower():
                return i
    raise SystemExit(f"none of columns {names} found in {header}")


def write_fixture(path: Path, header: list[str], rows: list[list[float]]) -> str:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) for v in row])
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    print(f"wrote {path} ({len(rows)} rows), sha256={digest}")
    return digest


def prepare_ais() -> str:
    print("fetching athlete data ...")
    header, rows = read_rows(fetch_text(AIS_URLS))
    i_bmi = col(header, "bmi")
    i_ssf = col(header, "ssf")
    i_bfat = col(header, "pcBfat", "pcbfat", "Bfat")
    i_sex = col(header, "sex")
    if len(rows) != 202:
        raise SystemExit(f"expected 202 athlete rows, got {len(rows)}")
    first100 = rows[:100]
    sexes = {row[i_sex].strip().strip('"') for row in first100}
    if sexes not in ({"f"}, {"female"}, {"F"}):
        print(f"  warning: first 100 rows have sex values {sexes}")
    out = [[float(r[i_bmi]), float(r[i_ssf]), float(r[i_bfat])] for r in first100]
    return write_fixture(DATA_DIR / "ais.csv", ["BMI", "SSF", "Bfat"], out)


def prepare_olive() -> str:
    print("fetching olive oil data ...")
    header, rows = read_rows(fetch_text(OLIVE_URLS))
    i_lin = col(header, "linolenic")
    i_ara = col(header, "arachidic")
    try:
        i_area = col(header, "macro.area", "macro-area", "area", "region")
    except SystemExit:
        i_area = None
    if len(rows) != 572:
        raise SystemExit(f"expected 572 olive oil rows, got {len(rows)}")
    if i_area is not None:
        south = [r for r in rows
                 if r[i_area].strip().strip('"').lower().startswith("south")
                 or r[i_area].strip() == "1"]
    else:
        south = rows[:323]
    if len(south) != 323:
        raise SystemExit(f"expected 323 southern rows, got {len(south)}")
    out = [[float(r[i_lin]), float(r[i_ara])] for r in south]
    return write_fixture(DATA_DIR / "olive.csv", ["Linolenic", "Arachidic"], out)


def main() -> None:
    checks = {"ais.csv": prepare_ais(), "olive.csv": prepare_olive()}
    lock = DATA_DIR / "checksums.json"
    lock.write_text(json.dumps(checks, indent=2, sort_keys=True) + "\n")
    print(f"wrote {lock}")


if __name__ == "__main__":
    main()
