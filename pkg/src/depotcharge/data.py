"""CSV ingestion and serialization for series, timetables, and results.

All files are headered CSV with ISO-8601 naive-local timestamps.  The
horizon's one week contains no DST transition, so naive arithmetic is
safe.  Schemas:

 - emissions: ``timestamp,co2_kg_per_kwh`` at a uniform hourly or
   15-minute step; hourly values are replicated into the four quarter
   hours they cover.
 - baseload: ``timestamp,baseload_kwh`` at the horizon's own step,
   energy per interval.
 - timetable: ``day,line_id,start,end,bus_type,soc_after_kwh`` with
   clock times ``HH:MM`` relative to the row's day; hours may pass 24
   for lines ending after midnight.
 - profiles: one row per interval with the baseload, each scenario's
   charging power, and the emission factor.
 - report: one row per scenario with the three metrics and optional
   reduction percentages.
 - sweep: one row per flatness weight with the resulting peak,
   emissions, and flatness.

Floats are serialized with ``repr``, the shortest round-tripping form,
so rewriting identical results yields byte-identical files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import CoverageGapError, ParseError, SchemaError
from .flow import EmissionSeries
from .matching import BusType, LineRecord
from .metrics import ScenarioReport
from .model import BaseloadSeries, Horizon

#: Anchor Monday used when a timetable does not name one.  Any week
#: without a DST transition works; times stay naive-local throughout.
DEFAULT_WEEK_START = datetime(2023, 6, 5)

REPORT_COLUMNS = (
    "scenario",
    "flatness_kwh2",
    "co2_kg",
    "peak_kw",
    "flatness_reduction_pct",
    "co2_reduction_pct",
    "peak_reduction_pct",
)

SWEEP_COLUMNS = ("flatness_weight", "peak_kw", "co2_kg", "flatness_kwh2")

TIMETABLE_COLUMNS = ("day", "line_id", "start", "end", "bus_type", "soc_after_kwh")


@dataclass(frozen=True)
class LineTimetable:
    """A parsed weekly roster of lines."""

    lines: tuple[LineRecord, ...]
    week_start: datetime

    def __len__(self) -> int:
        return len(self.lines)

    def lines_per_day(self) -> tuple[int, ...]:
        """Line counts for days 0..6."""
        counts = [0] * 7
        for line in self.lines:
            if line.day < 7:
                counts[line.day] += 1
        return tuple(counts)


def _format(value: float) -> str:
    return repr(float(value))


def _read_rows(path: str | Path, required: Sequence[str]) -> list[dict[str, str]]:
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: file is empty")
        missing = [name for name in required if name not in reader.fieldnames]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def _parse_timestamp(text: str, row: int) -> datetime:
    try:
        return datetime.fromisoformat(text)
    except ValueError:
        raise ParseError(f"bad timestamp {text!r}", row=row, column="timestamp") from None


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"bad number {text!r}", row=row, column=column) from None


def _uniform_series(
    path: str | Path, value_column: str
) -> tuple[datetime, float, np.ndarray]:
    """Parse a timestamped series and verify its uniform step.

    Returns (first timestamp, step in seconds, values).  A jump of more
    than one step is a coverage gap naming the first missing timestamp;
    a non-increasing or fractional step is a schema violation.
    """
    rows = _read_rows(path, ("timestamp", value_column))
    if len(rows) < 2:
        raise SchemaError(f"{path}: need at least two rows to establish the step")
    stamps = []
    values = []
    for k, row in enumerate(rows):
        line_no = k + 2  # header is line 1
        stamps.append(_parse_timestamp(row["timestamp"], line_no))
        value = _parse_float(row[value_column], line_no, value_column)
        if not np.isfinite(value) or value < 0:
            raise ParseError(
                f"{value_column} must be finite and non-negative",
                row=line_no,
                column=value_column,
            )
        values.append(value)
    diffs = [
        (b - a).total_seconds() for a, b in zip(stamps, stamps[1:])
    ]
    step = min(diffs)
    if step <= 0:
        where = diffs.index(step) + 3
        raise SchemaError(f"{path}: timestamps not strictly increasing", row=where)
    for k, diff in enumerate(diffs):
        steps = diff / step
        if abs(steps - round(steps)) > 1e-9:
            raise SchemaError(f"{path}: non-uniform timestamp step", row=k + 3)
        if round(steps) > 1:
            missing = stamps[k] + timedelta(seconds=step)
            raise CoverageGapError(
                f"{path}: missing sample at {missing.isoformat()}", missing=(missing,)
            )
    return stamps[0], step, np.array(values, dtype=float)


def _clip_to_horizon(
    path: str | Path,
    first: datetime,
    step_seconds: float,
    values: np.ndarray,
    horizon: Horizon,
) -> np.ndarray:
    """Replicate to the horizon step and cut the horizon's slice."""
    interval_seconds = horizon.interval_hours * 3600.0
    ratio = step_seconds / interval_seconds
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise SchemaError(
            f"{path}: step of {step_seconds} s is not a whole number of intervals"
        )
    expanded = np.repeat(values, int(round(ratio)))
    offset = (horizon.start - first).total_seconds() / interval_seconds
    if offset < -1e-9:
        raise CoverageGapError(
            f"{path}: data starts {first.isoformat()}, after the horizon start",
            missing=(horizon.start,),
        )
    if abs(offset - round(offset)) > 1e-9:
        raise SchemaError(f"{path}: horizon start is not aligned with the file grid")
    start = int(round(offset))
    end = start + horizon.interval_count
    if end > len(expanded):
        missing = first + timedelta(seconds=len(expanded) * interval_seconds)
        raise CoverageGapError(
            f"{path}: data ends before the horizon, first missing "
            f"{missing.isoformat()}",
            missing=(missing,),
        )
    return expanded[start:end]


def load_emissions(path: str | Path, horizon: Horizon) -> EmissionSeries:
    """Emission factors resampled to the horizon grid.

    Hourly files use step-function resampling: each value is replicated
    into the intervals it covers.
    """
    first, step, values = _uniform_series(path, "co2_kg_per_kwh")
    return EmissionSeries(_clip_to_horizon(path, first, step, values, horizon))


def load_baseload(path: str | Path, horizon: Horizon) -> BaseloadSeries:
    """Baseload energy per interval; the file must match the horizon step."""
    first, step, values = _uniform_series(path, "baseload_kwh")
    if abs(step - horizon.interval_hours * 3600.0) > 1e-9:
        raise SchemaError(f"{path}: baseload step must equal the horizon interval")
    return BaseloadSeries(_clip_to_horizon(path, first, step, values, horizon))


def _parse_clock(text: str, row: int, column: str) -> timedelta:
    parts = text.split(":")
    if len(parts) != 2:
        raise ParseError(f"bad clock time {text!r}", row=row, column=column)
    try:
        hours, minutes = int(parts[0]), int(parts[1])
    except ValueError:
        raise ParseError(f"bad clock time {text!r}", row=row, column=column) from None
    if hours < 0 or not (0 <= minutes < 60):
        raise ParseError(f"bad clock time {text!r}", row=row, column=column)
    return timedelta(hours=hours, minutes=minutes)


def load_timetable(
    path: str | Path, week_start: datetime = DEFAULT_WEEK_START
) -> LineTimetable:
    """Weekly roster; clock times are anchored to ``week_start``'s Monday."""
    rows = _read_rows(path, TIMETABLE_COLUMNS)
    lines = []
    seen: set[tuple[int, str]] = set()
    for k, row in enumerate(rows):
        line_no = k + 2
        try:
            day = int(row["day"])
        except ValueError:
            raise ParseError(
                f"bad day {row['day']!r}", row=line_no, column="day"
            ) from None
        if not 0 <= day <= 6:
            raise SchemaError("day must be 0..6", row=line_no, column="day")
        token = row["bus_type"].strip().upper()
        if token not in BusType.__members__:
            raise SchemaError(
                f"unknown bus type {row['bus_type']!r}", row=line_no, column="bus_type"
            )
        key = (day, row["line_id"])
        if key in seen:
            raise SchemaError(
                f"duplicate line {row['line_id']!r} on day {day}", row=line_no
            )
        seen.add(key)
        anchor = week_start + timedelta(days=day)
        try:
            line = LineRecord(
                line_id=row["line_id"],
                day=day,
                start=anchor + _parse_clock(row["start"], line_no, "start"),
                end=anchor + _parse_clock(row["end"], line_no, "end"),
                bus_type=BusType[token],
                soc_after_kwh=_parse_float(
                    row["soc_after_kwh"], line_no, "soc_after_kwh"
                ),
            )
        except ValueError as exc:
            raise SchemaError(str(exc), row=line_no) from None
        lines.append(line)
    return LineTimetable(lines=tuple(lines), week_start=week_start)


def write_timetable(path: str | Path, timetable: LineTimetable) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(TIMETABLE_COLUMNS)
        for line in timetable.lines:
            anchor = timetable.week_start + timedelta(days=line.day)
            writer.writerow(
                [
                    line.day,
                    line.line_id,
                    _clock_of(line.start - anchor),
                    _clock_of(line.end - anchor),
                    line.bus_type.name,
                    _format(line.soc_after_kwh),
                ]
            )


def _clock_of(delta: timedelta) -> str:
    minutes = int(round(delta.total_seconds() / 60.0))
    return f"{minutes // 60:02d}:{minutes % 60:02d}"


def write_emissions(path: str | Path, emissions: EmissionSeries, horizon: Horizon) -> None:
    _write_series(path, "co2_kg_per_kwh", emissions.kg_per_kwh, horizon)


def write_baseload(path: str | Path, baseload: BaseloadSeries, horizon: Horizon) -> None:
    _write_series(path, "baseload_kwh", baseload.kwh, horizon)


def _write_series(
    path: str | Path, column: str, values: np.ndarray, horizon: Horizon
) -> None:
    if len(values) != horizon.interval_count:
        raise ValueError("series length does not match the horizon")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["timestamp", column])
        for i, value in enumerate(values):
            writer.writerow([horizon.timestamp(i).isoformat(), _format(value)])


def write_profiles(
    path: str | Path,
    horizon: Horizon,
    baseload_kw: np.ndarray,
    scenario_kw: Mapping[str, np.ndarray],
    emissions: EmissionSeries,
) -> None:
    """Plot-ready per-interval powers: baseload, each scenario, factors."""
    m = horizon.interval_count
    for label, profile in scenario_kw.items():
        if len(profile) != m:
            raise ValueError(f"scenario {label!r} profile length does not match")
    if len(baseload_kw) != m or len(emissions) != m:
        raise ValueError("baseload or emission length does not match the horizon")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["timestamp", "baseload_kw"]
            + [f"{label}_kw" for label in scenario_kw]
            + ["co2_kg_per_kwh"]
        )
        for i in range(m):
            writer.writerow(
                [horizon.timestamp(i).isoformat(), _format(baseload_kw[i])]
                + [_format(profile[i]) for profile in scenario_kw.values()]
                + [_format(emissions.kg_per_kwh[i])]
            )


def write_report(path: str | Path, reports: Sequence[ScenarioReport]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(REPORT_COLUMNS)
        for report in reports:
            writer.writerow(
                [
                    report.scenario,
                    _format(report.flatness_kwh2),
                    _format(report.co2_kg),
                    _format(report.peak_kw),
                ]
                + [
                    "" if value is None else _format(value)
                    for value in (
                        report.flatness_reduction_pct,
                        report.co2_reduction_pct,
                        report.peak_reduction_pct,
                    )
                ]
            )


def read_report(path: str | Path) -> tuple[ScenarioReport, ...]:
    rows = _read_rows(path, REPORT_COLUMNS)
    reports = []
    for k, row in enumerate(rows):
        line_no = k + 2
        pcts = {}
        for column in REPORT_COLUMNS[4:]:
            text = row[column]
            pcts[column] = None if text == "" else _parse_float(text, line_no, column)
        reports.append(
            ScenarioReport(
                scenario=row["scenario"],
                flatness_kwh2=_parse_float(row["flatness_kwh2"], line_no, "flatness_kwh2"),
                co2_kg=_parse_float(row["co2_kg"], line_no, "co2_kg"),
                peak_kw=_parse_float(row["peak_kw"], line_no, "peak_kw"),
                **pcts,
            )
        )
    return tuple(reports)


def write_sweep(
    path: str | Path, rows: Sequence[tuple[float, float, float, float]]
) -> None:
    """Trade-off curve rows: (flatness weight, peak kW, co2 kg, flatness kWh^2)."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(SWEEP_COLUMNS)
        for weight, peak, co2, flat in rows:
            writer.writerow([_format(weight), _format(peak), _format(co2), _format(flat)])
