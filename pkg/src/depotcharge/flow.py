"""Minimum-emission scheduling as a minimum-cost flow problem.

The network has one source, one node per job, one node per interval, and
one sink.  The source feeds each job with its energy need, each job
feeds the intervals of its availability window at the per-interval rate
bound, and each interval drains into the sink at the aggregate cap (or
an amount that never binds, when the instance has no caps) paying the
interval's emission factor per unit.  An integral minimum-cost flow on
this network is exactly a minimum-CO2 schedule.

Quantities are scaled to integers before solving: energies at watt-hour
resolution, emission factors at 1e-6 kg/kWh resolution.  The solver is
exact for inputs on those grids, which covers everything this package
generates or loads; off-grid inputs are repaired back to exact delivery
after extraction, a sub-watt-hour adjustment covered by the validator
tolerance.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, maximum_flow

from .errors import InfeasibleError, ScalingOverflowError
from .model import FeasibilityReport, Instance, Schedule

#: Largest scaled magnitude representable exactly on the float path.
_INT_LIMIT = 2**53

#: Hard ceiling for single capacities handed to the int32 max-flow kernel.
_INT32_LIMIT = 2**31 - 1


@dataclass(frozen=True)
class EmissionSeries:
    """Per-interval emission factors in kg CO2 per kWh.

    Attributes:
        kg_per_kwh: Array with one non-negative factor per interval.
    """

    kg_per_kwh: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.kg_per_kwh, dtype=float).copy()
        if values.ndim != 1:
            raise ValueError("emission factors must be one-dimensional")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("emission factors must be finite and non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "kg_per_kwh", values)

    def __len__(self) -> int:
        return len(self.kg_per_kwh)


@dataclass(frozen=True)
class Scaling:
    """Integer scaling used to make the flow problem exact.

    Attributes:
        energy: Units per kWh; the default of 1000 is watt-hour resolution.
        cost: Units per kg/kWh for emission factors.
    """

    energy: int = 1000
    cost: int = 1_000_000

    def __post_init__(self) -> None:
        if self.energy < 1 or self.cost < 1:
            raise ValueError("scaling factors must be positive integers")


def _scaled(value: float, factor: int, what: str) -> int:
    scaled = value * factor
    if scaled > _INT_LIMIT:
        raise ScalingOverflowError(
            f"{what} {value} exceeds the exactly representable range at scale {factor}"
        )
    return int(round(scaled))


def _scaled_floor(value: float, factor: int, what: str) -> int:
    # Caps snap to the grid when they sit on it up to float noise and are
    # floored otherwise, so the scaled problem never allocates above the
    # true cap by more than noise.
    scaled = value * factor
    if scaled > _INT_LIMIT:
        raise ScalingOverflowError(
            f"{what} {value} exceeds the exactly representable range at scale {factor}"
        )
    nearest = round(scaled)
    if abs(scaled - nearest) <= 1e-6 * max(1.0, abs(scaled)):
        return int(nearest)
    return int(scaled)


@dataclass(frozen=True)
class FlowNetwork:
    """The scheduling network in arc-array form.

    Nodes are numbered source = 0, job k = 1 + k, interval i = 1 + n + i,
    sink = 1 + n + m.  Arcs are stored in three contiguous blocks: source
    arcs (one per job), job arcs (one per job/window-interval pair), and
    sink arcs (one per interval).

    Attributes:
        job_ids: Job identifiers, in job-node order.
        interval_count: Number of interval nodes.
        tails, heads: Arc endpoints.
        capacities: Scaled integer arc capacities.
        costs: Scaled integer arc costs (zero outside the sink arcs).
        job_arc_job: For each job arc, the job index it belongs to.
        job_arc_interval: For each job arc, the interval it reaches.
        scaling: The integer scaling the capacities and costs use.
    """

    job_ids: tuple[str, ...]
    interval_count: int
    tails: np.ndarray
    heads: np.ndarray
    capacities: np.ndarray
    costs: np.ndarray
    job_arc_job: np.ndarray
    job_arc_interval: np.ndarray
    scaling: Scaling

    @property
    def job_count(self) -> int:
        return len(self.job_ids)

    @property
    def node_count(self) -> int:
        return 2 + self.job_count + self.interval_count

    @property
    def source(self) -> int:
        return 0

    @property
    def sink(self) -> int:
        return 1 + self.job_count + self.interval_count

    @property
    def arc_count(self) -> int:
        return len(self.tails)

    def source_arcs(self) -> slice:
        return slice(0, self.job_count)

    def job_arcs(self) -> slice:
        return slice(self.job_count, self.job_count + len(self.job_arc_job))

    def sink_arcs(self) -> slice:
        first = self.job_count + len(self.job_arc_job)
        return slice(first, first + self.interval_count)


def build_network(
    instance: Instance, emissions: EmissionSeries, scaling: Scaling = Scaling()
) -> FlowNetwork:
    """Assemble the min-cost flow network for an instance.

    The resulting network has ``2 + n + m`` nodes and
    ``n + m + sum_j |window_j|`` arcs.  When the instance carries no
    aggregate caps, every sink arc gets the summed rate bound of all
    jobs, which no feasible flow can exceed.
    """
    m = instance.interval_count
    if len(emissions) != m:
        raise ValueError(f"emission series has {len(emissions)} entries, horizon needs {m}")
    n = len(instance.jobs)
    tails: list[int] = []
    heads: list[int] = []
    caps: list[int] = []
    costs: list[int] = []

    for k, job in enumerate(instance.jobs):
        tails.append(0)
        heads.append(1 + k)
        caps.append(_scaled(job.energy_kwh, scaling.energy, f"energy of job {job.id!r}"))
        costs.append(0)

    job_arc_job: list[int] = []
    job_arc_interval: list[int] = []
    for k, job in enumerate(instance.jobs):
        rate = _scaled(job.max_rate_kwh, scaling.energy, f"rate of job {job.id!r}")
        for i in job.window:
            tails.append(1 + k)
            heads.append(1 + n + i)
            caps.append(rate)
            costs.append(0)
            job_arc_job.append(k)
            job_arc_interval.append(i)

    if instance.caps_kwh is None:
        slack = sum(
            _scaled(job.max_rate_kwh, scaling.energy, f"rate of job {job.id!r}")
            for job in instance.jobs
        )
        sink_caps = [slack] * m
    else:
        sink_caps = [
            _scaled_floor(float(cap), scaling.energy, f"cap at interval {i}")
            for i, cap in enumerate(instance.caps_kwh)
        ]
    for i in range(m):
        tails.append(1 + n + i)
        heads.append(1 + n + m)
        caps.append(sink_caps[i])
        costs.append(_scaled(float(emissions.kg_per_kwh[i]), scaling.cost, f"emission factor at {i}"))

    return FlowNetwork(
        job_ids=tuple(job.id for job in instance.jobs),
        interval_count=m,
        tails=np.asarray(tails, dtype=np.int32),
        heads=np.asarray(heads, dtype=np.int32),
        capacities=np.asarray(caps, dtype=np.int64),
        costs=np.asarray(costs, dtype=np.int64),
        job_arc_job=np.asarray(job_arc_job, dtype=np.int32),
        job_arc_interval=np.asarray(job_arc_interval, dtype=np.int32),
        scaling=scaling,
    )


def _min_cost_flow(network: FlowNetwork) -> np.ndarray:
    """Successive shortest augmenting paths with node potentials.

    All arc costs are non-negative, so Dijkstra on reduced costs works
    from zero potentials.  Returns the integer flow per network arc;
    raises InfeasibleError when the supplies cannot all be routed.
    """
    node_count = network.node_count
    source, sink = network.source, network.sink
    arc_count = network.arc_count

    # Paired representation: arc 2a is forward, 2a + 1 its reverse.
    to = [0] * (2 * arc_count)
    residual = [0] * (2 * arc_count)
    cost = [0] * (2 * arc_count)
    adjacency: list[list[int]] = [[] for _ in range(node_count)]
    for a in range(arc_count):
        tail = int(network.tails[a])
        head = int(network.heads[a])
        to[2 * a] = head
        to[2 * a + 1] = tail
        residual[2 * a] = int(network.capacities[a])
        cost[2 * a] = int(network.costs[a])
        cost[2 * a + 1] = -int(network.costs[a])
        adjacency[tail].append(2 * a)
        adjacency[head].append(2 * a + 1)

    supply = int(network.capacities[network.source_arcs()].sum())
    potential = [0] * node_count
    infinity = float("inf")

    pushed = 0
    while pushed < supply:
        dist: list[float] = [infinity] * node_count
        prev_arc = [-1] * node_count
        dist[source] = 0
        heap: list[tuple[int, int]] = [(0, source)]
        sink_dist: float = infinity
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            if u == sink:
                sink_dist = d
                break
            pot_u = potential[u]
            for arc in adjacency[u]:
                if residual[arc] <= 0:
                    continue
                v = to[arc]
                nd = d + cost[arc] + pot_u - potential[v]
                if nd < dist[v]:
                    dist[v] = nd
                    prev_arc[v] = arc
                    heapq.heappush(heap, (nd, v))
        if sink_dist is infinity:
            raise InfeasibleError(
                "aggregate caps leave no room for the remaining charging energy"
            )
        for v in range(node_count):
            if dist[v] < sink_dist:
                potential[v] += int(dist[v])
            else:
                potential[v] += int(sink_dist)

        bottleneck = supply - pushed
        node = sink
        while node != source:
            arc = prev_arc[node]
            if residual[arc] < bottleneck:
                bottleneck = residual[arc]
            node = to[arc ^ 1]
        node = sink
        while node != source:
            arc = prev_arc[node]
            residual[arc] -= bottleneck
            residual[arc ^ 1] += bottleneck
            node = to[arc ^ 1]
        pushed += bottleneck

    flows = np.empty(arc_count, dtype=np.int64)
    for a in range(arc_count):
        flows[a] = residual[2 * a + 1]
    return flows


@dataclass(frozen=True)
class OptimalityCertificate:
    """Result of checking a flow for minimum cost.

    Attributes:
        optimal: True when the residual graph carries no negative-cost
            cycle, i.e. the flow cost cannot be reduced.
        witness_cycle: When not optimal, node indices of one residual
            cycle with negative total cost; empty otherwise.
    """

    optimal: bool
    witness_cycle: tuple[int, ...] = field(default=())


def verify_optimality(network: FlowNetwork, flows: np.ndarray) -> OptimalityCertificate:
    """Certify a flow as minimum-cost via Bellman-Ford on the residual graph.

    The flow must respect capacities and conservation (checked, since a
    certificate over an invalid flow would be meaningless).  A flow is
    minimum-cost for its routed value exactly when the residual graph has
    no negative-cost cycle; the witness returned for a suboptimal flow is
    one such cycle.
    """
    flows = np.asarray(flows, dtype=np.int64)
    if flows.shape != (network.arc_count,):
        raise ValueError("flow vector does not match the arc count")
    if np.any(flows < 0) or np.any(flows > network.capacities):
        raise ValueError("flow violates arc capacities")
    balance = np.zeros(network.node_count, dtype=np.int64)
    np.subtract.at(balance, network.tails, flows)
    np.add.at(balance, network.heads, flows)
    interior = np.ones(network.node_count, dtype=bool)
    interior[[network.source, network.sink]] = False
    if np.any(balance[interior] != 0):
        raise ValueError("flow violates conservation at a job or interval node")

    edges: list[tuple[int, int, int]] = []
    for a in range(network.arc_count):
        tail, head, cost = int(network.tails[a]), int(network.heads[a]), int(network.costs[a])
        if flows[a] < network.capacities[a]:
            edges.append((tail, head, cost))
        if flows[a] > 0:
            edges.append((head, tail, -cost))

    node_count = network.node_count
    dist = [0] * node_count  # virtual zero-cost source into every node
    prev = [-1] * node_count
    last_updated = -1
    for _ in range(node_count):
        changed = False
        for tail, head, cost in edges:
            nd = dist[tail] + cost
            if nd < dist[head]:
                dist[head] = nd
                prev[head] = tail
                last_updated = head
                changed = True
        if not changed:
            return OptimalityCertificate(optimal=True)

    # Still relaxing after node_count passes: walk back onto the cycle.
    node = last_updated
    for _ in range(node_count):
        node = prev[node]
    cycle = [node]
    walk = prev[node]
    while walk != node:
        cycle.append(walk)
        walk = prev[walk]
    cycle.reverse()
    return OptimalityCertificate(optimal=False, witness_cycle=tuple(cycle))


def _greedy_cheapest_fill(instance: Instance, emissions: EmissionSeries) -> Schedule:
    # Without aggregate caps the interval nodes never bind jobs against
    # each other, so the flow problem separates: each job fills its
    # cheapest window intervals at full rate.  Ties resolve to the
    # earlier interval for determinism.
    co2 = emissions.kg_per_kwh
    allocations: dict[str, np.ndarray] = {}
    for job in instance.jobs:
        width = job.departure - job.arrival
        values = np.zeros(width)
        remaining = job.energy_kwh
        for offset in np.argsort(co2[job.arrival : job.departure], kind="stable"):
            if remaining <= 0:
                break
            amount = min(job.max_rate_kwh, remaining)
            values[offset] = amount
            remaining -= amount
        allocations[job.id] = values
    return Schedule.build(instance, allocations)


def _repair_delivery(instance: Instance, allocations: dict[str, np.ndarray],
                     emissions: EmissionSeries) -> None:
    """Push sub-watt-hour extraction residuals back into exact delivery.

    Only inputs off the scaling grid need this; the adjustment per job is
    below half a scaling unit and lands in the cheapest interval that has
    rate (and cap) headroom.
    """
    caps = instance.caps_kwh
    profile = np.zeros(instance.interval_count)
    for job in instance.jobs:
        profile[job.arrival : job.departure] += allocations[job.id]
    for job in instance.jobs:
        values = allocations[job.id]
        residual = job.energy_kwh - float(values.sum())
        if abs(residual) < 1e-12:
            continue
        window = np.arange(job.arrival, job.departure)
        order = np.argsort(emissions.kg_per_kwh[window], kind="stable")
        if residual < 0:
            order = order[::-1]
        for offset in order:
            if residual > 0:
                room = job.max_rate_kwh - values[offset]
                if caps is not None:
                    room = min(room, float(caps[window[offset]] - profile[window[offset]]))
                step = min(residual, room)
            else:
                step = max(residual, -values[offset])
            if step != 0.0:
                values[offset] += step
                profile[window[offset]] += step
                residual -= step
            if abs(residual) < 1e-12:
                break
        if abs(residual) >= 1e-9:
            raise InfeasibleError(
                f"job {job.id!r}: cannot restore exact delivery after integer scaling"
            )


def solve_min_co2(
    instance: Instance, emissions: EmissionSeries, scaling: Scaling = Scaling()
) -> Schedule:
    """Schedule with the smallest total CO2 emission.

    Minimises ``sum_i s(i) * co2(i)`` subject to the window, rate, and
    cap constraints.  Instances without caps separate per job and are
    filled greedily; capped instances run the network solver.  Raises
    InfeasibleError when the caps cannot accommodate the demand.
    """
    if len(emissions) != instance.interval_count:
        raise ValueError("emission series does not cover the horizon")
    if instance.caps_kwh is None:
        return _greedy_cheapest_fill(instance, emissions)

    network = build_network(instance, emissions, scaling)
    flows = _min_cost_flow(network)
    allocations: dict[str, np.ndarray] = {
        job.id: np.zeros(job.departure - job.arrival) for job in instance.jobs
    }
    job_arcs = network.job_arcs()
    arc_flows = flows[job_arcs]
    for pos in range(len(network.job_arc_job)):
        job = instance.jobs[int(network.job_arc_job[pos])]
        interval = int(network.job_arc_interval[pos])
        allocations[job.id][interval - job.arrival] = arc_flows[pos] / scaling.energy
    _repair_delivery(instance, allocations, emissions)
    return Schedule.build(instance, allocations)


def max_flow(
    node_count: int,
    tails: np.ndarray,
    heads: np.ndarray,
    capacities: np.ndarray,
    source: int,
    sink: int,
) -> tuple[int, np.ndarray]:
    """Integer max flow on an arc list; returns (value, flow per arc).

    Thin wrapper over the sparse max-flow kernel.  Arc endpoints must be
    unique pairs and capacities must fit in 32 bits (the caller picks the
    scaling accordingly).
    """
    capacities = np.asarray(capacities)
    if capacities.size and int(capacities.max()) > _INT32_LIMIT:
        raise ScalingOverflowError("a scaled capacity exceeds the 32-bit kernel limit")
    graph = csr_matrix(
        (capacities.astype(np.int32), (tails, heads)), shape=(node_count, node_count)
    )
    result = maximum_flow(graph, source, sink)
    # The kernel reports net antisymmetric flow; an antiparallel partner
    # carrying the flow shows up negative here and means "nothing".
    flows = np.asarray(result.flow[tails, heads]).ravel().astype(np.int64)
    np.maximum(flows, 0, out=flows)
    return int(result.flow_value), flows


def residual_reachable(
    node_count: int,
    tails: np.ndarray,
    heads: np.ndarray,
    capacities: np.ndarray,
    flows: np.ndarray,
    start: int,
) -> np.ndarray:
    """Boolean mask of nodes reachable from ``start`` in the residual graph."""
    forward = flows < capacities
    backward = flows > 0
    res_tails = np.concatenate([tails[forward], heads[backward]])
    res_heads = np.concatenate([heads[forward], tails[backward]])
    if len(res_tails) == 0:
        mask = np.zeros(node_count, dtype=bool)
        mask[start] = True
        return mask
    graph = csr_matrix(
        (np.ones(len(res_tails), dtype=np.int8), (res_tails, res_heads)),
        shape=(node_count, node_count),
    )
    visited = breadth_first_order(graph, start, directed=True, return_predecessors=False)
    mask = np.zeros(node_count, dtype=bool)
    mask[visited] = True
    return mask


def feasibility_cut(instance: Instance) -> FeasibilityReport:
    """Max-flow saturation test for instances with aggregate caps.

    Feasible exactly when the flow saturates every job's supply arc (at
    watt-hour resolution).  When it does not, the jobs reachable from the
    source in the residual graph form a violating set: their combined
    demand exceeds the capacity reachable from their windows.
    """
    scale = 1000
    largest = max(
        [float(np.max(instance.caps_kwh))] +
        [max(job.energy_kwh, job.max_rate_kwh) for job in instance.jobs] or [0.0]
    )
    while scale > 1 and largest * scale > _INT32_LIMIT:
        scale //= 10
    if largest * scale > _INT32_LIMIT:
        raise ScalingOverflowError("instance magnitudes exceed the feasibility kernel range")

    n = len(instance.jobs)
    m = instance.interval_count
    tails: list[int] = []
    heads: list[int] = []
    caps: list[int] = []
    supply = 0
    for k, job in enumerate(instance.jobs):
        e = int(round(job.energy_kwh * scale))
        supply += e
        tails.append(0)
        heads.append(1 + k)
        caps.append(e)
        rate = int(round(job.max_rate_kwh * scale))
        for i in job.window:
            tails.append(1 + k)
            heads.append(1 + n + i)
            caps.append(rate)
    for i in range(m):
        tails.append(1 + n + i)
        heads.append(1 + n + m)
        # Same snap-or-floor rounding as the cost network, so the two agree.
        caps.append(_scaled_floor(float(instance.caps_kwh[i]), scale, f"cap at interval {i}"))

    tails_arr = np.asarray(tails, dtype=np.int32)
    heads_arr = np.asarray(heads, dtype=np.int32)
    caps_arr = np.asarray(caps, dtype=np.int64)
    value, flows = max_flow(2 + n + m, tails_arr, heads_arr, caps_arr, 0, 1 + n + m)
    if value >= supply:
        return FeasibilityReport(feasible=True)
    reachable = residual_reachable(2 + n + m, tails_arr, heads_arr, caps_arr, flows, 0)
    violating = frozenset(
        job.id for k, job in enumerate(instance.jobs) if reachable[1 + k]
    )
    return FeasibilityReport(feasible=False, violating_jobs=violating)
