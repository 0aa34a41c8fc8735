import csv
import json
import logging
from dataclasses import astuple, fields
from pathlib import Path
from typing import List, Optional, Sequence, Union

from pydantic import ValidationError

from app.errors import OutputError
from app.services.emulate import MeasurementRecord, PathRecord, RunOutput
from app.services.report import CdfPoint, EmulationReport

log = logging.getLogger("raypos.exporter")

SUMMARY_FILE = "summary.json"
ERRORS_FILE = "errors.csv"
CDF_FILE = "cdf.csv"
MPC_FILE = "mpc.csv"
SNAPSHOT_CDF_FILE = "cdf_snapshots.csv"
PATHS_FILE = "paths.csv"
MEASUREMENTS_FILE = "measurements.csv"


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def _write_csv(path: Path, header: Sequence[str], rows) -> Path:
    try:
        with path.open("w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(header)
            w.writerows([_cell(v) for v in row] for row in rows)
    except OSError as e:
        raise OutputError(str(path), str(e)) from e
    return path


def _cdf_rows(points: Sequence[CdfPoint]):
    return [(p.error_m, p.cumulative_fraction) for p in points]


def _records(path: Path, records, record_type) -> Path:
    header = [f.name for f in fields(record_type)]
    return _write_csv(path, header, [astuple(r) for r in records])


def dump_summary(report: EmulationReport) -> str:
    return json.dumps(report.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"


def write_outputs(
    report: EmulationReport,
    out_dir: Union[str, Path],
    run_output: Optional[RunOutput] = None,
    dump_paths: bool = False,
    dump_measurements: bool = False,
) -> List[Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        summary = out / SUMMARY_FILE
        summary.write_text(dump_summary(report), encoding="utf-8")
    except OSError as e:
        raise OutputError(str(out), str(e)) from e

    written = [summary]
    written.append(_write_csv(
        out / ERRORS_FILE,
        ["poi_id", "x_true", "y_true", "x_est", "y_est", "mean_error_m", "unreachable_snapshots"],
        [
            (p.poi_id, p.x_true, p.y_true, p.x_est, p.y_est, p.mean_error_m, p.unreachable_snapshots)
            for p in report.per_poi
        ],
    ))
    written.append(_write_csv(out / CDF_FILE, ["error_m", "cumulative_fraction"], _cdf_rows(report.cdf)))
    written.append(_write_csv(out / MPC_FILE, ["category", "count"], report.mpc_histogram.items()))
    if report.snapshot_cdf is not None:
        written.append(_write_csv(
            out / SNAPSHOT_CDF_FILE, ["error_m", "cumulative_fraction"], _cdf_rows(report.snapshot_cdf)
        ))
    if dump_paths and run_output is not None:
        written.append(_records(out / PATHS_FILE, run_output.paths, PathRecord))
    if dump_measurements and run_output is not None:
        written.append(_records(out / MEASUREMENTS_FILE, run_output.measurements, MeasurementRecord))

    log.info("Wrote %d files to %s", len(written), out)
    return written


def read_summary(path: Union[str, Path]) -> EmulationReport:
    """Load `summary.json` from a run directory or the file itself."""
    path = Path(path)
    if path.is_dir():
        path = path / SUMMARY_FILE
    try:
        return EmulationReport.model_validate_json(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise OutputError(str(path), str(e)) from e
    except ValidationError as e:
        raise OutputError(str(path), f"not a run summary: {e.errors()[0]['msg']}") from e
