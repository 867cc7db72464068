"""Uncontrolled charging baseline.

Every bus starts charging the moment it arrives and draws its maximum
rate until the energy need is met, with one final partial interval
carrying the remainder.  This is what a depot without coordination does
and is the reference point for all reduction percentages.
"""

from __future__ import annotations

import numpy as np

from .model import Instance, Schedule


def solve_uncontrolled(instance: Instance) -> Schedule:
    """Greedy arrival-time charging, no coordination.

    Note that aggregate caps are deliberately ignored: an uncontrolled
    depot has no mechanism to enforce them.  The result is feasible for
    the cap-free relaxation of the instance.
    """
    allocations: dict[str, np.ndarray] = {}
    for job in instance.jobs:
        width = job.departure - job.arrival
        values = np.zeros(width)
        full = min(int(job.energy_kwh // job.max_rate_kwh), width)
        values[:full] = job.max_rate_kwh
        if full < width:
            values[full] = job.energy_kwh - full * job.max_rate_kwh
        allocations[job.id] = values
    return Schedule.build(instance, allocations)
