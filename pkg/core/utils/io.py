
import csv
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple


def read_csv_simple(path) -> List[Tuple[int, str]]:
    """Return ``(line_number, value)`` pairs of an ``hour,value`` CSV file.

    The header row is line 1; data records start at line 2. Values are returned
    as raw strings so callers can report parse failures with their line.
    """
    records = []
    with open(path, newline="", encoding="utf-8") as f:
        rdr = csv.DictReader(f)
        if rdr.fieldnames is None or "value" not in rdr.fieldnames:
            raise ValueError(f"{path}: expected a header row 'hour,value'")
        for row in rdr:
            records.append((rdr.line_num, (row.get("value") or "").strip()))
    return records


def count_records(path) -> int:
    with open(path, newline="", encoding="utf-8") as f:
        return max(sum(1 for line in f if line.strip()) - 1, 0)


def format_value(value) -> str:
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write UTF-8 CSV with LF endings and round-trip float formatting."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([format_value(v) for v in row])
    return path
