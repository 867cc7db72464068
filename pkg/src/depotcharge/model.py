"""Core data model for depot charging schedules.

The depot horizon is a sequence of equal-length intervals (15 minutes by
default).  A charging job describes one bus that must receive a fixed
amount of energy between an arrival interval and a departure interval,
never faster than its charger allows.  A schedule assigns per-interval
energy to every job; its aggregate is the depot charging profile that
the objectives in :mod:`depotcharge.flow`, :mod:`depotcharge.flatten`,
and :mod:`depotcharge.weighted` act on.

All energies are kWh per interval.  Power (kW) appears only at the
reporting boundary, where a kWh-per-interval value is divided by the
interval length in hours.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Iterator, Mapping

import numpy as np

#: Absolute tolerance (kWh) accepted by schedule validators, per entry.
ENERGY_ATOL = 1e-6

#: Absolute tolerance (kWh per interval) for local-exchange optimality checks.
EXCHANGE_ATOL = 1e-5

_GRID_SNAP = 1e-9  # fraction of an interval treated as "already on the grid"


@dataclass(frozen=True)
class Horizon:
    """Discretisation of the planning window into equal intervals.

    Attributes:
        start: Wall-clock timestamp of the first interval boundary
            (naive local time).
        interval_count: Number of intervals in the horizon.
        interval_hours: Length of one interval in hours.  The default of
            0.25 matches 15-minute metering granularity.
    """

    start: datetime
    interval_count: int
    interval_hours: float = 0.25

    def __post_init__(self) -> None:
        if self.interval_count <= 0:
            raise ValueError("interval_count must be positive")
        if not (self.interval_hours > 0):
            raise ValueError("interval_hours must be positive")

    @property
    def end(self) -> datetime:
        return self.timestamp(self.interval_count)

    def timestamp(self, index: int) -> datetime:
        """Wall-clock time of interval boundary ``index``."""
        return self.start + timedelta(hours=index * self.interval_hours)

    def _offset(self, when: datetime) -> float:
        return (when - self.start).total_seconds() / 3600.0 / self.interval_hours

    def index_floor(self, when: datetime) -> int:
        """Largest interval boundary at or before ``when``."""
        off = self._offset(when)
        nearest = round(off)
        if abs(off - nearest) <= _GRID_SNAP:
            return int(nearest)
        return int(np.floor(off))

    def index_ceil(self, when: datetime) -> int:
        """Smallest interval boundary at or after ``when``."""
        off = self._offset(when)
        nearest = round(off)
        if abs(off - nearest) <= _GRID_SNAP:
            return int(nearest)
        return int(np.ceil(off))

    def clip(self, index: int) -> int:
        return min(max(index, 0), self.interval_count)


@dataclass(frozen=True)
class Job:
    """One charging session: a bus with an energy need and a time window.

    Attributes:
        id: Opaque unique identifier.
        arrival: First interval (inclusive) during which charging may occur.
        departure: First interval at which charging may no longer occur;
            the window is the half-open range ``[arrival, departure)``.
        energy_kwh: Energy the job must receive over its window.
        max_rate_kwh: Upper bound on energy received in any one interval
            (charger power times interval length).
    """

    id: str
    arrival: int
    departure: int
    energy_kwh: float
    max_rate_kwh: float

    def __post_init__(self) -> None:
        if self.arrival < 0 or self.departure <= self.arrival:
            raise ValueError(
                f"job {self.id!r}: window [{self.arrival}, {self.departure}) is empty or negative"
            )
        if not np.isfinite(self.energy_kwh) or self.energy_kwh < 0:
            raise ValueError(f"job {self.id!r}: energy must be finite and non-negative")
        if not np.isfinite(self.max_rate_kwh) or self.max_rate_kwh <= 0:
            raise ValueError(f"job {self.id!r}: max rate must be finite and positive")
        width = self.departure - self.arrival
        if self.energy_kwh > self.max_rate_kwh * width + ENERGY_ATOL:
            # Jobs that cannot be served even alone are rejected at
            # ingestion rather than silently clipped.
            raise ValueError(
                f"job {self.id!r}: needs {self.energy_kwh} kWh but the window admits at most "
                f"{self.max_rate_kwh * width} kWh"
            )

    @property
    def window(self) -> range:
        return range(self.arrival, self.departure)


@dataclass(frozen=True)
class Instance:
    """A scheduling instance: horizon, jobs, and optional aggregate caps.

    Attributes:
        horizon: The interval grid all jobs refer to.
        jobs: The charging jobs, windows expressed in horizon indices.
        caps_kwh: Optional per-interval upper bound on the summed charging
            energy of all jobs (kWh per interval).  ``None`` means the
            depot connection never binds.
    """

    horizon: Horizon
    jobs: tuple[Job, ...]
    caps_kwh: np.ndarray | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "jobs", tuple(self.jobs))
        m = self.horizon.interval_count
        seen: set[str] = set()
        for job in self.jobs:
            if job.id in seen:
                raise ValueError(f"duplicate job id {job.id!r}")
            seen.add(job.id)
            if job.departure > m:
                raise ValueError(
                    f"job {job.id!r}: departure {job.departure} exceeds horizon ({m} intervals)"
                )
        if self.caps_kwh is not None:
            caps = np.asarray(self.caps_kwh, dtype=float).copy()
            if caps.shape != (m,):
                raise ValueError(f"caps must have shape ({m},), got {caps.shape}")
            if not np.all(np.isfinite(caps)) or np.any(caps < 0):
                raise ValueError("caps must be finite and non-negative")
            caps.setflags(write=False)
            object.__setattr__(self, "caps_kwh", caps)

    @property
    def interval_count(self) -> int:
        return self.horizon.interval_count

    def job(self, job_id: str) -> Job:
        for j in self.jobs:
            if j.id == job_id:
                return j
        raise KeyError(job_id)


@dataclass(frozen=True)
class BaseloadSeries:
    """Non-bus depot load per interval, in kWh.

    Attributes:
        kwh: Array of length ``interval_count`` with the energy drawn by
            everything that is not bus charging.
    """

    kwh: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.kwh, dtype=float).copy()
        if values.ndim != 1:
            raise ValueError("baseload must be one-dimensional")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("baseload must be finite and non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "kwh", values)

    @classmethod
    def from_kw(cls, kw: np.ndarray, interval_hours: float) -> "BaseloadSeries":
        return cls(np.asarray(kw, dtype=float) * interval_hours)

    def __len__(self) -> int:
        return len(self.kwh)


def _sum_windows(
    interval_count: int,
    window_starts: Mapping[str, int],
    window_energy: Mapping[str, np.ndarray],
) -> np.ndarray:
    # Shared by Schedule.build and aggregate() so the stored aggregate is
    # bitwise recomputable.
    total = np.zeros(interval_count, dtype=float)
    for job_id, values in window_energy.items():
        a = window_starts[job_id]
        total[a : a + len(values)] += values
    return total


@dataclass(frozen=True)
class Schedule:
    """Per-job, per-interval energy allocations.

    Allocations are stored window-dense: each job carries one array that
    spans exactly its availability window, so energy outside a window is
    unrepresentable.  Arrays are read-only after construction.

    Attributes:
        interval_count: Length of the horizon the schedule refers to.
        window_starts: First window interval per job id.
        window_energy: Energy per window interval per job id (kWh).
        aggregate_kwh: Summed charging profile, length ``interval_count``.
    """

    interval_count: int
    window_starts: dict[str, int]
    window_energy: dict[str, np.ndarray]
    aggregate_kwh: np.ndarray

    @classmethod
    def build(cls, instance: Instance, allocations: Mapping[str, np.ndarray]) -> "Schedule":
        """Assemble a schedule from per-job window arrays.

        Jobs absent from ``allocations`` receive all-zero windows; keys
        that do not belong to the instance raise ``ValueError``.
        """
        known = {job.id for job in instance.jobs}
        unknown = set(allocations) - known
        if unknown:
            raise ValueError(f"allocations for unknown jobs: {sorted(unknown)}")
        starts: dict[str, int] = {}
        energy: dict[str, np.ndarray] = {}
        for job in instance.jobs:
            width = job.departure - job.arrival
            values = allocations.get(job.id)
            if values is None:
                arr = np.zeros(width, dtype=float)
            else:
                arr = np.asarray(values, dtype=float).copy()
                if arr.shape != (width,):
                    raise ValueError(
                        f"job {job.id!r}: allocation has shape {arr.shape}, window needs ({width},)"
                    )
            arr.setflags(write=False)
            starts[job.id] = job.arrival
            energy[job.id] = arr
        total = _sum_windows(instance.interval_count, starts, energy)
        total.setflags(write=False)
        return cls(
            interval_count=instance.interval_count,
            window_starts=starts,
            window_energy=energy,
            aggregate_kwh=total,
        )

    def window(self, job_id: str) -> tuple[int, np.ndarray]:
        """Return ``(window_start, energies)`` for one job."""
        return self.window_starts[job_id], self.window_energy[job_id]

    def energy_for(self, job_id: str) -> float:
        return float(self.window_energy[job_id].sum())

    def items(self) -> Iterator[tuple[tuple[int, str], float]]:
        """Iterate sparse entries as ``((interval, job_id), kwh)``."""
        for job_id, values in self.window_energy.items():
            a = self.window_starts[job_id]
            for k, value in enumerate(values):
                yield (a + k, job_id), float(value)


def availability(instance: Instance) -> tuple[tuple[frozenset[str], ...], dict[str, range]]:
    """Both directions of the job/interval availability relation.

    Returns ``(jobs_at, window_of)`` where ``jobs_at[i]`` is the set of
    job ids available in interval ``i`` and ``window_of[job_id]`` is that
    job's interval range.  The two views are transposes of each other.
    """
    per_interval: list[set[str]] = [set() for _ in range(instance.interval_count)]
    window_of: dict[str, range] = {}
    for job in instance.jobs:
        window_of[job.id] = job.window
        for i in job.window:
            per_interval[i].add(job.id)
    return tuple(frozenset(s) for s in per_interval), window_of


def aggregate(schedule: Schedule) -> np.ndarray:
    """Recompute the summed charging profile from the allocations."""
    return _sum_windows(schedule.interval_count, schedule.window_starts, schedule.window_energy)


def validate_schedule(
    instance: Instance, schedule: Schedule, atol: float = ENERGY_ATOL
) -> None:
    """Check a schedule against the instance constraints.

    Verifies, per entry and within ``atol`` kWh: non-negativity, the
    per-interval rate bound, exact delivery of each job's energy (small
    over-delivery is tolerated, never required), window coverage, the
    aggregate caps when present, and that the stored aggregate equals its
    recomputation bit for bit.  Raises ``ValueError`` on the first
    violated family.
    """
    if schedule.interval_count != instance.interval_count:
        raise ValueError(
            f"schedule spans {schedule.interval_count} intervals, instance has {instance.interval_count}"
        )
    if set(schedule.window_energy) != {job.id for job in instance.jobs}:
        raise ValueError("schedule and instance disagree on the set of jobs")
    for job in instance.jobs:
        start, values = schedule.window(job.id)
        if start != job.arrival or len(values) != job.departure - job.arrival:
            raise ValueError(f"job {job.id!r}: schedule window does not match the job window")
        if np.any(values < -atol):
            raise ValueError(f"job {job.id!r}: negative allocation")
        if np.any(values > job.max_rate_kwh + atol):
            raise ValueError(f"job {job.id!r}: allocation exceeds the per-interval rate bound")
        delivered = float(values.sum())
        if abs(delivered - job.energy_kwh) > atol:
            raise ValueError(
                f"job {job.id!r}: delivered {delivered} kWh, requires {job.energy_kwh} kWh"
            )
    recomputed = aggregate(schedule)
    if not np.array_equal(recomputed, schedule.aggregate_kwh):
        raise ValueError("stored aggregate does not match its recomputation")
    if instance.caps_kwh is not None:
        excess = schedule.aggregate_kwh - instance.caps_kwh
        worst = int(np.argmax(excess))
        if excess[worst] > atol:
            raise ValueError(
                f"interval {worst}: aggregate {schedule.aggregate_kwh[worst]} kWh exceeds cap "
                f"{instance.caps_kwh[worst]} kWh"
            )


@dataclass(frozen=True)
class FeasibilityReport:
    """Outcome of a feasibility check.

    Attributes:
        feasible: Whether some schedule satisfies all constraints.
        violating_jobs: When infeasible, a set of jobs whose combined
            demand exceeds the capacity available to them (a certifying
            cut); empty when feasible.
    """

    feasible: bool
    violating_jobs: frozenset[str] = field(default_factory=frozenset)


def check_feasible(instance: Instance) -> FeasibilityReport:
    """Decide whether the instance admits any valid schedule.

    Without aggregate caps every instance is feasible, because job
    construction already rejects windows too small for their energy.
    With caps the question is decided by a max-flow saturation test on
    the job/interval network; an infeasible verdict comes with a set of
    jobs forming a violating cut.
    """
    if instance.caps_kwh is None:
        return FeasibilityReport(feasible=True)
    from . import flow  # deferred: flow depends on this module

    return flow.feasibility_cut(instance)
