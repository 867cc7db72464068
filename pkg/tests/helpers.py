"""Shared builders and checkers for the test suite."""

from __future__ import annotations

from datetime import datetime

import numpy as np

from depotcharge.model import EXCHANGE_ATOL, Horizon, Instance, Job, Schedule, validate_schedule

WEEK_START = datetime(2023, 6, 5)


def make_horizon(interval_count: int, interval_hours: float = 0.25) -> Horizon:
    return Horizon(start=WEEK_START, interval_count=interval_count, interval_hours=interval_hours)


def random_instance(
    rng: np.random.Generator,
    max_jobs: int = 5,
    max_intervals: int = 12,
    with_caps: bool = False,
) -> Instance:
    """Random small instance with watt-hour-aligned energies.

    Energies, rates, and caps land on the watt-hour grid so that
    integer-scaled solvers represent them exactly.  Capped instances are
    feasible by construction: the caps dominate the even-spread profile.
    """
    m = int(rng.integers(2, max_intervals + 1))
    n = int(rng.integers(1, max_jobs + 1))
    jobs = []
    for k in range(n):
        arrival = int(rng.integers(0, m))
        departure = int(rng.integers(arrival + 1, m + 1))
        rate = round(float(rng.uniform(0.5, 8.0)), 3)
        width = departure - arrival
        energy = round(rate * width * float(rng.uniform(0.1, 0.95)), 3)
        jobs.append(
            Job(id=f"job{k}", arrival=arrival, departure=departure,
                energy_kwh=energy, max_rate_kwh=rate)
        )
    caps = None
    if with_caps:
        spread = np.zeros(m)
        for job in jobs:
            spread[job.arrival : job.departure] += job.energy_kwh / (job.departure - job.arrival)
        slack = spread * rng.uniform(0.05, 0.6) + rng.uniform(0.05, 1.0)
        caps = np.ceil((spread + slack) * 1000.0) / 1000.0
    return Instance(horizon=make_horizon(m), jobs=tuple(jobs), caps_kwh=caps)


def random_emissions(rng: np.random.Generator, interval_count: int) -> np.ndarray:
    """Emission factors rounded to 1e-6, the cost-scaling resolution."""
    return np.round(rng.uniform(0.05, 0.6, interval_count), 6)


def random_baseload(rng: np.random.Generator, interval_count: int, high: float = 12.0) -> np.ndarray:
    return rng.uniform(0.0, high, interval_count)


def assert_valid(instance: Instance, schedule: Schedule) -> None:
    validate_schedule(instance, schedule)


def assert_exchange_optimal(
    instance: Instance,
    schedule: Schedule,
    baseload: np.ndarray | None = None,
    tol: float = EXCHANGE_ATOL,
) -> None:
    """Local-exchange optimality of a flattening solution.

    For every job, no interval holding more than 1e-6 kWh may sit at a
    level more than ``tol`` above an interval of the same window that
    still has more than 1e-6 kWh of rate headroom; otherwise moving
    energy down would reduce the squared-profile objective.
    """
    levels = schedule.aggregate_kwh.copy()
    if baseload is not None:
        levels = levels + baseload
    for job in instance.jobs:
        _, values = schedule.window(job.id)
        window_levels = levels[job.arrival : job.departure]
        donors = values > 1e-6
        receivers = values < job.max_rate_kwh - 1e-6
        if donors.any() and receivers.any():
            worst_donor = float(window_levels[donors].max())
            best_receiver = float(window_levels[receivers].min())
            assert worst_donor <= best_receiver + tol, (
                f"job {job.id}: level {worst_donor} could shed into level {best_receiver}"
            )
