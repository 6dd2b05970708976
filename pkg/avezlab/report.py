import csv
from datetime import datetime, timezone
from fractions import Fraction
import json
import logging
import os
from pathlib import Path

import numpy as np

import avezlab
from avezlab.errors import ReportIOError
from avezlab.sequence import EstimateReport

logger = logging.getLogger("avezlab.report")

CACHE_ENV = "AVEZLAB_CACHE_DIR"


class ReportFormat:
    JSON = "json"
    CSV = "csv"
    ALL = (JSON, CSV)


def default_output_dir() -> Path:
    return Path(os.environ.get(CACHE_ENV, "."))


def _as_reports(reports) -> dict[str, EstimateReport]:
    if isinstance(reports, EstimateReport):
        return {reports.quantity: reports}
    return dict(reports)


def report_payload(reports, extra: dict | None = None, timestamp=True) -> dict:
    """Everything run-dependent lives in the metadata block."""
    metadata = {"version": avezlab.__version__}
    if timestamp:
        metadata["created"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    payload = {"metadata": metadata,
               "reports": {name: report.to_dict() for name, report in _as_reports(reports).items()}}
    if extra:
        payload["extra"] = extra
    return payload


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    raise TypeError(f"{type(value).__name__} is not serializable")


def dumps(reports, extra: dict | None = None, timestamp=True) -> str:
    return json.dumps(report_payload(reports, extra, timestamp), sort_keys=True, indent=2, default=_json_default)


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as err:
        raise ReportIOError(f"Cannot write {path}: {err}", path=path)


def write_sequence_csv(path: Path, sequence) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["index", "value"])
            for index, value in sequence.terms:
                writer.writerow([index, repr(float(value))])
    except OSError as err:
        raise ReportIOError(f"Cannot write {path}: {err}", path=path)
    return path


def emit_report(reports, fmt: str = ReportFormat.JSON, path: "str | Path | None" = None, extra: dict | None = None,
                timestamp=True) -> list[Path]:
    """Writes <path>.json and/or one <path>.<report>.<sequence>.csv per sequence; returns the files."""
    if fmt not in ReportFormat.ALL + ("both",):
        raise ValueError(f"Unknown report format {fmt!r}.")
    reports = _as_reports(reports)
    base = Path(path) if path is not None else default_output_dir() / next(iter(reports), "report")
    if base.suffix in (".json", ".csv"):
        base = base.with_suffix("")
    written = []
    if fmt in (ReportFormat.JSON, "both"):
        target = base.with_name(base.name + ".json")
        _write(target, dumps(reports, extra, timestamp) + "\n")
        written.append(target)
    if fmt in (ReportFormat.CSV, "both"):
        for name, report in reports.items():
            for seq_name, sequence in report.sequences.items():
                written.append(write_sequence_csv(base.with_name(f"{base.name}.{name}.{seq_name}.csv"), sequence))
    for target in written:
        logger.info(f"wrote {target}")
    return written


def load_report(path: "str | Path") -> dict[str, EstimateReport]:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as err:
        raise ReportIOError(f"Cannot read {path}: {err}", path=path)
    except json.JSONDecodeError as err:
        raise ReportIOError(f"{path} is not a report: {err}", path=path)
    if "reports" not in payload:
        raise ReportIOError(f"{path} has no reports block.", path=path)
    return {name: EstimateReport.from_dict(data) for name, data in payload["reports"].items()}
