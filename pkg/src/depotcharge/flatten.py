"""Profile flattening by recursive critical-group decomposition.

The flattening objective ``sum_i (s(i) + b(i))^2`` is minimized by a
water-filling profile: charging fills the lowest-total intervals until
groups of intervals sit at common levels.  The solver peels those groups
off one at a time, highest level first:

1. Parametric level search.  For a candidate level X every interval can
   absorb ``max(0, X - b(i))``; a max-flow probe on the job/interval
   network decides whether the remaining jobs fit under that ceiling.
   Probes run on an integer grid, and each infeasible probe exposes a
   violated cut whose exact requirement becomes the next candidate, so
   the search reaches the minimal feasible level in a few probes.
2. Critical group.  One grid step below the minimal level the probe is
   infeasible, and its source-reachable cut names the jobs and intervals
   that bind.  Their exact common level is recovered in floating point
   by water-filling the cut's own baseload valleys.
3. Peel and recurse.  Cut intervals are finalized.  Cut jobs saturate
   their rate into every remaining window interval (that spill becomes
   baseload for the rest), and the remainder is a smaller instance of
   the same problem with strictly fewer intervals.

A final max flow against integer per-interval targets extracts one
feasible allocation.  The aggregate profile is unique even though the
per-job decomposition is not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError
from .flow import max_flow, residual_reachable
from .model import BaseloadSeries, Instance, Schedule

#: Largest scaled magnitude handed to the 32-bit max-flow kernel.
_KERNEL_BUDGET = 2_000_000_000


@dataclass(frozen=True)
class FlattenProblem:
    """A flattening task: an instance plus the static baseload under it.

    Attributes:
        instance: Jobs and horizon.  Aggregate caps are rejected; the
            flattening recursion has no sound place to enforce them.
        baseload: Fixed per-interval energy already on the connection,
            or None for an empty profile.
    """

    instance: Instance
    baseload: BaseloadSeries | None = None

    def __post_init__(self) -> None:
        if self.instance.caps_kwh is not None:
            raise ValueError("flattening does not support aggregate caps")
        if self.baseload is not None and len(self.baseload.kwh) != self.instance.interval_count:
            raise ValueError("baseload length does not match the horizon")

    def baseload_kwh(self) -> np.ndarray:
        if self.baseload is None:
            return np.zeros(self.instance.interval_count)
        return np.asarray(self.baseload.kwh, dtype=float)


def levels(schedule: Schedule, baseload: BaseloadSeries | np.ndarray | None) -> np.ndarray:
    """Per-interval totals s(i) + b(i), the quantity flattening equalizes."""
    totals = schedule.aggregate_kwh.astype(float).copy()
    if baseload is None:
        return totals
    values = baseload.kwh if isinstance(baseload, BaseloadSeries) else np.asarray(baseload, dtype=float)
    if values.shape != totals.shape:
        raise ValueError("baseload length does not match the schedule")
    return totals + values


def solve_flatten(problem: FlattenProblem) -> Schedule:
    """Minimize sum_i (s(i)+b(i))^2 over windows and rate bounds.

    The returned schedule's aggregate is the unique flattening optimum;
    the per-job split is one feasible decomposition among many.
    """
    instance = problem.instance
    jobs = instance.jobs
    if not jobs:
        return Schedule.build(instance, {})

    base_f = problem.baseload_kwh()
    rates = np.array([job.max_rate_kwh for job in jobs])
    energies = np.array([job.energy_kwh for job in jobs])
    scale = _pick_scale(instance, base_f, rates, energies)

    e_int = np.rint(energies * scale).astype(np.int64)
    l_int = np.rint(rates * scale).astype(np.int64)
    b_int = np.rint(base_f * scale).astype(np.int64)

    target_int = _peel_targets(instance, energies, rates, e_int, l_int, base_f, b_int, scale)
    allocations = _extract(instance, energies, rates, e_int, scale, target_int, base_f)
    return Schedule.build(instance, allocations)


def _pick_scale(
    instance: Instance, base_f: np.ndarray, rates: np.ndarray, energies: np.ndarray
) -> int:
    # Probe levels never exceed the worst concurrent rate pile-up plus
    # baseload, and source arcs never exceed the largest job energy.
    concurrent = base_f.copy()
    for job, rate in zip(instance.jobs, rates):
        concurrent[job.arrival : job.departure] += rate
    top = max(float(concurrent.max()), float(energies.max()), 1.0)
    scale = 1
    while top * (scale * 10) <= _KERNEL_BUDGET:
        scale *= 10
    return scale


def _min_int_level(basins: np.ndarray, volume: int) -> int:
    """Smallest integer X with sum_i max(0, X - basins[i]) >= volume."""
    order = np.sort(basins)
    prefix = np.cumsum(order)
    count = len(order)
    ks = np.arange(1, count + 1, dtype=np.int64)
    candidates = -(-(volume + prefix) // ks)
    upper = np.empty(count, dtype=order.dtype)
    upper[:-1] = order[1:]
    upper[-1] = np.iinfo(np.int64).max
    valid = np.flatnonzero((candidates > order) & (candidates <= upper))
    if len(valid) == 0:
        raise AssertionError("integer water fill found no level")
    return int(candidates[valid[0]])


def _float_water_fill(basins: np.ndarray, volume: float) -> tuple[float, int]:
    """Exact common level filling `volume` into the lowest basins.

    Returns (level, k): the k lowest basins sit strictly below level and
    absorb the whole volume.
    """
    order = np.sort(basins)
    prefix = np.cumsum(order)
    count = len(order)
    for k in range(1, count + 1):
        level = (volume + float(prefix[k - 1])) / k
        if level > order[k - 1] and (k == count or level <= order[k]):
            return level, k
    # Round-off can leave no exact segment when volume is vanishingly
    # small; fall back to spreading over every basin.
    return (volume + float(prefix[-1])) / count, count


def _apportion(raw: np.ndarray, total: int) -> np.ndarray:
    """Integer shares summing to `total`, tracking the float shares `raw`."""
    raw = np.maximum(raw, 0.0)
    shares = np.floor(raw).astype(np.int64)
    fracs = raw - shares
    deficit = total - int(shares.sum())
    if deficit > 0:
        order = np.argsort(-fracs, kind="stable")
        pos = 0
        while deficit > 0:
            shares[order[pos % len(order)]] += 1
            deficit -= 1
            pos += 1
    elif deficit < 0:
        order = np.argsort(fracs, kind="stable")
        pos = 0
        while deficit < 0:
            idx = order[pos % len(order)]
            if shares[idx] > 0:
                shares[idx] -= 1
                deficit += 1
            pos += 1
    return shares


class _ProbeNetwork:
    """Max-flow probe for one peel round; only sink caps vary per level."""

    def __init__(
        self,
        jobs_idx: np.ndarray,
        ints_idx: np.ndarray,
        windows: list[np.ndarray],
        e_int: np.ndarray,
        l_int: np.ndarray,
        b_eff_i: np.ndarray,
    ) -> None:
        self.jobs_idx = jobs_idx
        self.ints_idx = ints_idx
        self.n = len(jobs_idx)
        self.ni = len(ints_idx)
        self.node_count = 2 + self.n + self.ni
        self.sink = self.node_count - 1
        local = np.full(int(ints_idx.max()) + 1 if len(ints_idx) else 1, -1, dtype=np.int64)
        local[ints_idx] = np.arange(self.ni)

        counts = np.array([len(windows[k]) for k in jobs_idx], dtype=np.int64)
        window_ints = (
            np.concatenate([windows[k] for k in jobs_idx])
            if len(jobs_idx)
            else np.empty(0, dtype=np.int64)
        )
        job_nodes = 1 + np.arange(self.n, dtype=np.int64)
        int_nodes = 1 + self.n + np.arange(self.ni, dtype=np.int64)
        self.tails = np.concatenate(
            [np.zeros(self.n, dtype=np.int64), np.repeat(job_nodes, counts), int_nodes]
        )
        self.heads = np.concatenate(
            [job_nodes, 1 + self.n + local[window_ints], np.full(self.ni, self.sink)]
        )
        self.caps = np.concatenate(
            [e_int[jobs_idx], np.repeat(l_int[jobs_idx], counts), np.zeros(self.ni, dtype=np.int64)]
        )
        sink_first = len(self.tails) - self.ni
        self.sink_slice = slice(sink_first, sink_first + self.ni)
        self.basins = b_eff_i[ints_idx]

    def run(self, level: int) -> tuple[int, np.ndarray]:
        caps = self.caps
        caps[self.sink_slice] = np.maximum(level - self.basins, 0)
        value, flows = max_flow(self.node_count, self.tails, self.heads, caps, 0, self.sink)
        return value, flows

    def cut(self, flows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Source-reachable jobs and intervals (global indices)."""
        mask = residual_reachable(
            self.node_count, self.tails, self.heads, self.caps, flows, 0
        )
        cut_jobs = self.jobs_idx[mask[1 : 1 + self.n]]
        cut_ints = self.ints_idx[mask[1 + self.n : 1 + self.n + self.ni]]
        return cut_jobs, cut_ints


def _peel_targets(
    instance: Instance,
    energies: np.ndarray,
    rates: np.ndarray,
    e_int: np.ndarray,
    l_int: np.ndarray,
    base_f: np.ndarray,
    b_int: np.ndarray,
    scale: int,
) -> np.ndarray:
    """Per-interval integer charge targets realizing the water-fill optimum."""
    m = instance.interval_count
    jobs = instance.jobs
    active_job = np.ones(len(jobs), dtype=bool)
    interval_active = np.ones(m, dtype=bool)
    windows = [np.arange(job.arrival, job.departure) for job in jobs]
    b_eff_f = base_f.copy()
    b_eff_i = b_int.copy()
    target_int = np.zeros(m, dtype=np.int64)

    while True:
        jobs_idx = np.flatnonzero(active_job & (e_int > 0))
        if len(jobs_idx) == 0:
            break
        volume = int(e_int[jobs_idx].sum())
        reach = np.zeros(m, dtype=bool)
        for k in jobs_idx:
            reach[windows[k]] = True
        ints_idx = np.flatnonzero(reach)
        probe = _ProbeNetwork(jobs_idx, ints_idx, windows, e_int, l_int, b_eff_i)

        # Each violated cut states the exact level it needs; jumping there
        # reaches the minimal feasible level without a bisection ladder.
        # Per-job fills are necessary conditions too, so the search can
        # start at the tightest of those instead of the pooled volume.
        level = _min_int_level(b_eff_i[ints_idx], volume)
        for k in jobs_idx:
            level = max(level, _min_int_level(b_eff_i[windows[k]], int(e_int[k])))
        while True:
            value, flows = probe.run(level)
            if value == volume:
                break
            cut_jobs, cut_ints = probe.cut(flows)
            in_cut = np.zeros(m, dtype=bool)
            in_cut[cut_ints] = True
            outside = np.array(
                [len(windows[k]) - int(in_cut[windows[k]].sum()) for k in cut_jobs]
            )
            cut_volume = int(e_int[cut_jobs].sum() - (l_int[cut_jobs] * outside).sum())
            nxt = _min_int_level(b_eff_i[cut_ints], cut_volume)
            assert nxt > level, "parametric level search failed to advance"
            level = nxt

        # The critical group binds one grid step below the minimal level.
        value, flows = probe.run(level - 1)
        cut_jobs, cut_ints = probe.cut(flows)
        in_cut = np.zeros(m, dtype=bool)
        in_cut[cut_ints] = True
        outside_counts = np.array(
            [len(windows[k]) - int(in_cut[windows[k]].sum()) for k in cut_jobs]
        )
        group_volume_f = float(
            energies[cut_jobs].sum() - (rates[cut_jobs] * outside_counts).sum()
        )
        group_volume_i = int(
            e_int[cut_jobs].sum() - (l_int[cut_jobs] * outside_counts).sum()
        )
        group_volume_f = max(group_volume_f, group_volume_i / scale)
        lam, k_active = _float_water_fill(b_eff_f[cut_ints], group_volume_f)
        fill_order = cut_ints[np.argsort(b_eff_f[cut_ints], kind="stable")]
        group = fill_order[:k_active]
        target_int[group] += _apportion(lam * scale - b_eff_i[group], group_volume_i)

        # Cut jobs saturate every window interval left outside the cut;
        # that spill is immovable and becomes baseload for the remainder.
        for k in cut_jobs:
            spill_into = windows[k][~in_cut[windows[k]]]
            if len(spill_into):
                target_int[spill_into] += l_int[k]
                b_eff_i[spill_into] += l_int[k]
                b_eff_f[spill_into] += rates[k]

        active_job[cut_jobs] = False
        interval_active[cut_ints] = False
        for k in np.flatnonzero(active_job):
            w = windows[k]
            windows[k] = w[~in_cut[w]]
    return target_int


def _extract(
    instance: Instance,
    energies: np.ndarray,
    rates: np.ndarray,
    e_int: np.ndarray,
    scale: int,
    target_int: np.ndarray,
    base_f: np.ndarray,
) -> dict[str, np.ndarray]:
    """Decompose per-interval targets into one feasible allocation."""
    jobs = instance.jobs
    n = len(jobs)
    m = instance.interval_count
    tails: list[int] = []
    heads: list[int] = []
    caps: list[int] = []
    for k, job in enumerate(jobs):
        tails.append(0)
        heads.append(1 + k)
        caps.append(int(e_int[k]))
    arc_job: list[int] = []
    arc_interval: list[int] = []
    for k, job in enumerate(jobs):
        cap = _snap_ceil(rates[k] * scale)
        for i in job.window:
            tails.append(1 + k)
            heads.append(1 + n + i)
            caps.append(cap)
            arc_job.append(k)
            arc_interval.append(i)
    sink_first = len(tails)
    for i in range(m):
        tails.append(1 + n + i)
        heads.append(1 + n + m)
        caps.append(int(target_int[i]))

    tails_arr = np.asarray(tails, dtype=np.int64)
    heads_arr = np.asarray(heads, dtype=np.int64)
    caps_arr = np.asarray(caps, dtype=np.int64)
    total = int(e_int.sum())
    value, flows = max_flow(2 + n + m, tails_arr, heads_arr, caps_arr, 0, 1 + n + m)
    if value < total:
        # Integer rounding of the targets can pinch a corner; one unit of
        # headroom per interval restores an exact decomposition.
        caps_arr[sink_first:] += 1
        value, flows = max_flow(2 + n + m, tails_arr, heads_arr, caps_arr, 0, 1 + n + m)
        if value < total:
            raise InfeasibleError("could not decompose the flattened profile into allocations")

    allocations = {
        job.id: np.zeros(job.departure - job.arrival) for job in jobs
    }
    job_arc_flows = flows[n:sink_first]
    for pos in range(len(arc_job)):
        job = jobs[arc_job[pos]]
        allocations[job.id][arc_interval[pos] - job.arrival] = job_arc_flows[pos] / scale

    _repair_delivery(instance, allocations, rates, base_f)
    return allocations


def _snap_ceil(value: float) -> int:
    nearest = round(value)
    if abs(value - nearest) <= 1e-6 * max(1.0, abs(value)):
        return int(nearest)
    return int(np.ceil(value))


def _repair_delivery(
    instance: Instance,
    allocations: dict[str, np.ndarray],
    rates: np.ndarray,
    base_f: np.ndarray,
) -> None:
    """Absorb sub-grid delivery residuals left by integer extraction.

    Positive residual goes to the lowest-total window interval with rate
    headroom, negative comes out of the highest, so the adjustment never
    disturbs the water-fill shape by more than the residual itself.
    """
    totals = base_f.copy()
    for job in instance.jobs:
        totals[job.arrival : job.departure] += allocations[job.id]
    for k, job in enumerate(instance.jobs):
        values = allocations[job.id]
        residual = job.energy_kwh - float(values.sum())
        if abs(residual) < 1e-12:
            continue
        window = np.arange(job.arrival, job.departure)
        order = np.argsort(totals[window], kind="stable")
        if residual < 0:
            order = order[::-1]
        for offset in order:
            if residual > 0:
                step = min(residual, rates[k] - values[offset])
            else:
                step = max(residual, -values[offset])
            if step != 0.0:
                values[offset] += step
                totals[window[offset]] += step
                residual -= step
            if abs(residual) < 1e-12:
                break
