"""File ingestion, calibration/test splitting, and report serialization.

Record files are CSV (header ``id,y,y_hat,judge,pair``, empty ``y`` meaning
unlabeled) or JSONL with the same keys. Reports serialize to CSV with a
stable column order and floats at 17 significant digits, or to JSON with a
schema_version field; both round-trip losslessly.
"""

import csv
import json
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .datasets import BinaryDataset, ContinuousDataset
from .errors import (
    DataFormatError,
    DegenerateCalibrationClass,
    DomainError,
    EmptyCalibrationSet,
    EmptyTestSet,
    EstimationError,
    MalformedRow,
)
from .inference import estimate_all
from .simulate import (
    SCENARIO_RESPLIT,
    CalibrationRmseReport,
    MonteCarloReport,
    ReportRow,
    RmseRow,
    _aggregate_rows,
    _results_to_outcomes,
    replicate_rng,
)

BINARY = "binary"
CONTINUOUS = "continuous"

_RECORD_HEADER = ("id", "y", "y_hat", "judge", "pair")


@dataclass(frozen=True)
class LabeledRecord:
    """One evaluation row; ``y`` is None for judge-only (unlabeled) rows."""

    id: str
    y: float | None
    y_hat: float
    judge: str | None = None
    pair: str | None = None

    @property
    def labeled(self) -> bool:
        return self.y is not None


@dataclass(frozen=True)
class SplitSpec:
    """How to mask a fully labeled corpus into calibration + test."""

    calibration_fraction: float
    seed: int = 0
    stratify: bool = False

    def __post_init__(self):
        if not 0.0 < self.calibration_fraction < 1.0:
            raise ValueError("calibration_fraction must lie in (0, 1)")


def _parse_value(text: str, line: int, domain: str, column: str) -> float | None:
    text = text.strip()
    if text == "":
        return None
    if domain == BINARY:
        if text in ("0", "1"):
            return float(text)
        raise DomainError(line, f"{column}={text!r} is not a binary label")
    try:
        return float(text)
    except ValueError as err:
        raise DomainError(line, f"{column}={text!r} is not a number") from err


def _validate_number(value, line: int, domain: str, column: str) -> float | None:
    if value is None:
        return None
    try:
        number = float(value)
    except (TypeError, ValueError) as err:
        raise DomainError(line, f"{column}={value!r} is not a number") from err
    if domain == BINARY and number not in (0.0, 1.0):
        raise DomainError(line, f"{column}={value!r} is not a binary label")
    return number


def read_records(path, format: str = "csv", domain: str = BINARY) -> list[LabeledRecord]:
    """Parse a record file, attaching 1-based line numbers to every error."""
    if domain not in (BINARY, CONTINUOUS):
        raise ValueError(f"unknown domain {domain!r}")
    if format == "csv":
        return _read_csv(Path(path), domain)
    if format == "jsonl":
        return _read_jsonl(Path(path), domain)
    raise ValueError(f"unknown format {format!r}")


def _read_csv(path: Path, domain: str) -> list[LabeledRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRow(1, "file is empty; expected a header row") from None
        if tuple(h.strip() for h in header) != _RECORD_HEADER:
            raise MalformedRow(1, f"header must be {','.join(_RECORD_HEADER)}")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(_RECORD_HEADER):
                raise MalformedRow(line, f"expected {len(_RECORD_HEADER)} fields, got {len(row)}")
            rid, y_text, yhat_text, judge, pair = (cell.strip() for cell in row)
            y = _parse_value(y_text, line, domain, "y")
            y_hat = _parse_value(yhat_text, line, domain, "y_hat")
            if y_hat is None:
                raise MalformedRow(line, "y_hat is required")
            records.append(LabeledRecord(rid, y, y_hat, judge or None, pair or None))
    return records


def _read_jsonl(path: Path, domain: str) -> list[LabeledRecord]:
    records = []
    with open(path, encoding="utf-8") as handle:
        for line, raw in enumerate(handle, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as err:
                raise MalformedRow(line, f"invalid JSON: {err.msg}") from err
            if obj.get("y_hat") is None:
                raise MalformedRow(line, "y_hat is required")
            records.append(
                LabeledRecord(
                    id=str(obj.get("id", line)),
                    y=_validate_number(obj.get("y"), line, domain, "y"),
                    y_hat=_validate_number(obj["y_hat"], line, domain, "y_hat"),
                    judge=obj.get("judge"),
                    pair=obj.get("pair"),
                )
            )
    return records


def write_records(records, path, format: str = "csv") -> None:
    path = Path(path)
    if format == "csv":
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(_RECORD_HEADER)
            for rec in records:
                writer.writerow(
                    [
                        rec.id,
                        _format_label(rec.y),
                        _format_label(rec.y_hat),
                        rec.judge or "",
                        rec.pair or "",
                    ]
                )
    elif format == "jsonl":
        with open(path, "w", encoding="utf-8") as handle:
            for rec in records:
                handle.write(
                    json.dumps(
                        {"id": rec.id, "y": rec.y, "y_hat": rec.y_hat, "judge": rec.judge, "pair": rec.pair}
                    )
                    + "\n"
                )
    else:
        raise ValueError(f"unknown format {format!r}")


def _format_label(value: float | None) -> str:
    if value is None:
        return ""
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def records_to_dataset(records, domain: str = BINARY):
    """Labeled rows become the calibration set, unlabeled rows the test set."""
    cal = [r for r in records if r.labeled]
    test = [r for r in records if not r.labeled]
    if not cal:
        # With zero labeled rows both human-label classes are empty.
        raise DegenerateCalibrationClass(1, "input has no labeled rows")
    cal_y = [r.y for r in cal]
    cal_yhat = [r.y_hat for r in cal]
    test_yhat = [r.y_hat for r in test]
    if domain == BINARY:
        return BinaryDataset(cal_y, cal_yhat, test_yhat)
    return ContinuousDataset(cal_y, cal_yhat, test_yhat)


def _split_mask(y: np.ndarray, spec: SplitSpec, rng: np.random.Generator) -> np.ndarray:
    size = y.size
    if spec.stratify:
        # Proportionate allocation without replacement inside each class.
        mask = np.zeros(size, dtype=bool)
        for cls in np.unique(y):
            idx = np.flatnonzero(y == cls)
            take = max(1, round(spec.calibration_fraction * idx.size))
            mask[rng.choice(idx, size=min(take, idx.size), replace=False)] = True
        return mask
    return rng.random(size) < spec.calibration_fraction


def apply_split(records, spec: SplitSpec, domain: str = BINARY):
    """Mask a fully labeled corpus: independent Bernoulli calibration
    membership, deterministic in (record order, seed) and independent of the
    label values. Test-side y values are dropped from the dataset so
    estimators can never see them.
    """
    if any(not r.labeled for r in records):
        raise ValueError("apply_split needs fully labeled records")
    y = np.asarray([r.y for r in records], dtype=np.float64)
    yhat = np.asarray([r.y_hat for r in records], dtype=np.float64)
    rng = replicate_rng(spec.seed, 0)
    mask = _split_mask(y, spec, rng)
    if not mask.any():
        raise EmptyCalibrationSet("split left no calibration rows")
    if mask.all():
        raise EmptyTestSet("split left no test rows")
    if domain == BINARY:
        return BinaryDataset(y[mask].astype(np.int64), yhat[mask].astype(np.int64), yhat[~mask].astype(np.int64))
    return ContinuousDataset(y[mask], yhat[mask], yhat[~mask])


@dataclass(frozen=True)
class _ResplitConfig:
    """Adapter so resplit outcomes reuse the grid aggregation."""

    N: int
    labeled_fraction: float
    B: int
    level: float
    seed: int
    truth: float


def split_coverage_experiment(
    records,
    spec: SplitSpec,
    B: int,
    estimators: tuple[str, ...],
    level: float = 0.90,
) -> MonteCarloReport:
    """Re-split a fully labeled corpus B times and score each estimator's
    interval against the full-data human mean.

    Replicate b uses the stream (spec.seed, b). A split that empties either
    side is resampled once and then counted as a failed replicate.
    """
    if any(not r.labeled for r in records):
        raise ValueError("split_coverage_experiment needs fully labeled records")
    y = np.asarray([r.y for r in records], dtype=np.float64)
    yhat = np.asarray([r.y_hat for r in records], dtype=np.float64)
    truth = float(np.mean(y))
    y_int = y.astype(np.int64)
    yhat_int = yhat.astype(np.int64)

    outcomes = []
    for b in range(B):
        rng = replicate_rng(spec.seed, b)
        mask = _split_mask(y, spec, rng)
        if mask.all() or not mask.any():
            mask = _split_mask(y, spec, rng)
        if mask.all() or not mask.any():
            outcomes.append({name: ("fail", "DegenerateSplit") for name in estimators})
            continue
        data = BinaryDataset(y_int[mask], yhat_int[mask], yhat_int[~mask])
        try:
            outcomes.append(_results_to_outcomes(estimate_all(data, estimators, level)))
        except EstimationError as err:  # pragma: no cover - estimate_all captures these
            outcomes.append({name: ("fail", type(err).__name__) for name in estimators})

    config = _ResplitConfig(
        N=len(records), labeled_fraction=spec.calibration_fraction, B=B, level=level,
        seed=spec.seed, truth=truth,
    )
    rows = _aggregate_rows(config, SCENARIO_RESPLIT, estimators, outcomes)
    return MonteCarloReport(tuple(rows))


# --------------------------------------------------------------------------
# Report serialization
# --------------------------------------------------------------------------

SCHEMA_VERSION = 1

_REPORT_TYPES = {
    "monte_carlo": (MonteCarloReport, ReportRow),
    "calibration_rmse": (CalibrationRmseReport, RmseRow),
}

_INT_FIELDS = {"N", "B", "seed", "n_ok", "n_failed", "n_converged"}
_STR_FIELDS = {"scenario", "estimator"}


def _format_cell(name: str, value) -> str:
    if value is None:
        return ""
    if name in _STR_FIELDS:
        return str(value)
    if name in _INT_FIELDS:
        return str(int(value))
    return format(float(value), ".17g")


def _parse_cell(name: str, text: str):
    if text == "":
        return None
    if name in _STR_FIELDS:
        return text
    if name in _INT_FIELDS:
        return int(text)
    return float(text)


def report_columns(report) -> tuple[str, ...]:
    _, row_type = _REPORT_TYPES[report.kind]
    return tuple(f.name for f in fields(row_type))


def report_to_text(report, format: str = "csv") -> str:
    """Render a report as CSV or JSON text with stable column order."""
    columns = report_columns(report)
    if format == "csv":
        import io

        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        for row in report.rows:
            writer.writerow([_format_cell(c, getattr(row, c)) for c in columns])
        return buffer.getvalue()
    if format == "json":
        payload = {
            "schema_version": SCHEMA_VERSION,
            "kind": report.kind,
            "rows": [{c: getattr(row, c) for c in columns} for row in report.rows],
        }
        return json.dumps(payload, indent=2) + "\n"
    raise ValueError(f"unknown format {format!r}")


def write_report(report, path, format: str = "csv") -> None:
    """Serialize a report with stable column order.

    CSV writes floats at 17 significant digits so values survive a
    round-trip exactly; JSON carries a ``schema_version`` field.
    """
    path = Path(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            handle.write(report_to_text(report, format))
    except OSError as err:
        raise DataFormatError(f"cannot write report to {path}: {err}") from err


def read_report(path, format: str = "csv"):
    """Inverse of ``write_report``; the report kind is inferred from the
    header (CSV) or the ``kind`` field (JSON)."""
    path = Path(path)
    if format == "json":
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
        if payload.get("schema_version") != SCHEMA_VERSION:
            raise DataFormatError(f"unsupported schema_version {payload.get('schema_version')!r}")
        report_type, row_type = _REPORT_TYPES[payload["kind"]]
        rows = tuple(row_type(**row) for row in payload["rows"])
        return report_type(rows)
    if format != "csv":
        raise ValueError(f"unknown format {format!r}")
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = tuple(next(reader))
        except StopIteration:
            raise MalformedRow(1, "report file is empty") from None
        for kind, (report_type, row_type) in _REPORT_TYPES.items():
            if header == tuple(f.name for f in fields(row_type)):
                break
        else:
            raise MalformedRow(1, "header does not match any known report schema")
        rows = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedRow(line, f"expected {len(header)} fields, got {len(row)}")
            rows.append(row_type(**{name: _parse_cell(name, cell) for name, cell in zip(header, row)}))
    return report_type(tuple(rows))
