import csv
import json
import os
from typing import Iterable, List, Sequence

from src.config import CSV_COLUMNS, SUMMARY_FILENAME, TRIALS_FILENAME
from src.core.records import TrialRecord
from src.utils.analyze import SummaryReport


def format_value(value) -> str:
    """Shortest round-trip text for floats, lowercase booleans."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def record_row(record: TrialRecord, mask_wall: bool = False) -> List[str]:
    values = {
        "trial_id": record.trial_id,
        "method": record.method.value,
        "epsilon": float(record.epsilon_target),
        "p": float(record.p),
        "T": record.T,
        "m": record.m,
        "samples_used": record.samples_used,
        "final_gap": float(record.final_gap),
        "success": record.success,
        "wall_ms": 0 if mask_wall else record.wall_ms,
        "seed": record.seed,
    }
    return [format_value(values[c]) for c in CSV_COLUMNS]


class CsvLogger:
    """
    Writes trial rows to a UTF-8 CSV file with LF line endings.
    """
    def __init__(self, filename=TRIALS_FILENAME, header=CSV_COLUMNS):
        """
        Truncates ``filename`` and writes the header row.

        Args:
            filename (str): The CSV file to write to.
            header (list): The header row, written even when no rows follow.
        """
        self.filename = filename
        self.file = open(self.filename, 'w', newline='', encoding='utf-8')
        self.writer = csv.writer(self.file, lineterminator='\n')
        if header:
            self.write_row(header)

    def write_row(self, row_data):
        """Writes a single row of data to the CSV file."""
        self.writer.writerow(row_data)

    def close(self):
        """Closes the file handle."""
        self.file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_records(path: str, records: Iterable[TrialRecord], mask_wall: bool = False) -> str:
    with CsvLogger(path) as logger:
        for record in records:
            logger.write_row(record_row(record, mask_wall))
    return path


def write_summary(path: str, report: SummaryReport) -> str:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(report.to_dict(), indent=2, sort_keys=True))
        fh.write("\n")
    return path


def read_summary(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def emit(records: Sequence[TrialRecord], report: SummaryReport, out_dir: str, formats=("csv", "json")) -> List[str]:
    """Write ``trials.csv`` and/or ``summary.json`` under ``out_dir``."""
    unknown = set(formats) - {"csv", "json"}
    if unknown:
        raise ValueError(f"unknown output formats: {sorted(unknown)}")
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if "csv" in formats:
        written.append(write_records(os.path.join(out_dir, TRIALS_FILENAME), records))
    if "json" in formats:
        written.append(write_summary(os.path.join(out_dir, SUMMARY_FILENAME), report))
    return written
