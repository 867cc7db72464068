"""Tests for the minimum-emission flow solver."""

import numpy as np
import pytest

from depotcharge import flow
from depotcharge.errors import InfeasibleError, ScalingOverflowError
from depotcharge.model import Instance, Job, validate_schedule
from depotcharge.oracle import lp_min_co2

from helpers import make_horizon, random_emissions, random_instance


def co2_total(schedule, emissions: flow.EmissionSeries) -> float:
    return float(np.dot(schedule.aggregate_kwh, emissions.kg_per_kwh))


def emission_series(rng, interval_count: int) -> flow.EmissionSeries:
    return flow.EmissionSeries(random_emissions(rng, interval_count))


class TestNetworkShape:
    def test_node_and_arc_counts(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            instance = random_instance(rng, with_caps=True)
            emissions = emission_series(rng, instance.interval_count)
            network = flow.build_network(instance, emissions)
            n = len(instance.jobs)
            m = instance.interval_count
            window_total = sum(job.departure - job.arrival for job in instance.jobs)
            assert network.node_count == 2 + n + m
            assert network.arc_count == n + m + window_total
            assert network.sink == network.node_count - 1

    def test_arc_blocks(self):
        horizon = make_horizon(3)
        jobs = (
            Job(id="a", arrival=0, departure=2, energy_kwh=2.0, max_rate_kwh=1.5),
            Job(id="b", arrival=1, departure=3, energy_kwh=1.0, max_rate_kwh=1.0),
        )
        emissions = flow.EmissionSeries(np.array([0.3, 0.1, 0.2]))
        network = flow.build_network(Instance(horizon, jobs), emissions)

        source = network.source_arcs()
        assert list(network.tails[source]) == [0, 0]
        assert list(network.heads[source]) == [1, 2]
        assert list(network.capacities[source]) == [2000, 1000]

        job_arcs = network.job_arcs()
        assert list(network.tails[job_arcs]) == [1, 1, 2, 2]
        assert list(network.heads[job_arcs]) == [3, 4, 4, 5]
        assert list(network.capacities[job_arcs]) == [1500, 1500, 1000, 1000]

        sink = network.sink_arcs()
        assert list(network.tails[sink]) == [3, 4, 5]
        assert list(network.heads[sink]) == [6, 6, 6]
        # No caps: sink capacity is the summed rate bound, never binding.
        assert list(network.capacities[sink]) == [2500, 2500, 2500]
        assert list(network.costs[sink]) == [300000, 100000, 200000]

    def test_capped_sink_arcs(self):
        horizon = make_horizon(2)
        jobs = (Job(id="a", arrival=0, departure=2, energy_kwh=6.0, max_rate_kwh=6.0),)
        instance = Instance(horizon, jobs, caps_kwh=np.array([4.0, 6.0]))
        emissions = flow.EmissionSeries(np.array([0.1, 0.5]))
        network = flow.build_network(instance, emissions)
        assert list(network.capacities[network.sink_arcs()]) == [4000, 6000]

    def test_emission_length_mismatch(self):
        horizon = make_horizon(3)
        jobs = (Job(id="a", arrival=0, departure=2, energy_kwh=1.0, max_rate_kwh=1.0),)
        with pytest.raises(ValueError):
            flow.build_network(Instance(horizon, jobs), flow.EmissionSeries(np.array([0.1, 0.2])))

    def test_scaling_overflow(self):
        horizon = make_horizon(1)
        jobs = (Job(id="a", arrival=0, departure=1, energy_kwh=1e13, max_rate_kwh=1e13),)
        with pytest.raises(ScalingOverflowError):
            flow.build_network(
                Instance(horizon, jobs), flow.EmissionSeries(np.array([0.1]))
            )


class TestEmissionSeries:
    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            flow.EmissionSeries(np.array([0.1, -0.2]))

    def test_rejects_matrix(self):
        with pytest.raises(ValueError):
            flow.EmissionSeries(np.zeros((2, 2)))


class TestSolveMinCo2:
    def test_fills_cheapest_intervals(self):
        horizon = make_horizon(3)
        jobs = (Job(id="a", arrival=0, departure=3, energy_kwh=4.0, max_rate_kwh=3.0),)
        instance = Instance(horizon, jobs)
        emissions = flow.EmissionSeries(np.array([0.3, 0.1, 0.2]))
        schedule = flow.solve_min_co2(instance, emissions)
        validate_schedule(instance, schedule)
        _, values = schedule.window("a")
        assert np.allclose(values, [0.0, 3.0, 1.0])
        assert co2_total(schedule, emissions) == pytest.approx(0.5, rel=1e-9)

    def test_caps_push_energy_to_dearer_interval(self):
        horizon = make_horizon(2)
        jobs = (Job(id="a", arrival=0, departure=2, energy_kwh=6.0, max_rate_kwh=6.0),)
        instance = Instance(horizon, jobs, caps_kwh=np.array([4.0, 6.0]))
        emissions = flow.EmissionSeries(np.array([0.1, 0.5]))
        schedule = flow.solve_min_co2(instance, emissions)
        validate_schedule(instance, schedule)
        assert co2_total(schedule, emissions) == pytest.approx(4 * 0.1 + 2 * 0.5, rel=1e-9)

    def test_matches_reference_lp_without_caps(self):
        rng = np.random.default_rng(11)
        for _ in range(60):
            instance = random_instance(rng)
            emissions = emission_series(rng, instance.interval_count)
            schedule = flow.solve_min_co2(instance, emissions)
            validate_schedule(instance, schedule)
            reference = lp_min_co2(instance, emissions.kg_per_kwh)
            got = co2_total(schedule, emissions)
            assert got <= reference.objective + 1e-6 * max(1.0, reference.objective)
            assert got >= reference.objective - 1e-6 * max(1.0, reference.objective)

    def test_matches_reference_lp_with_caps(self):
        rng = np.random.default_rng(13)
        for _ in range(60):
            instance = random_instance(rng, with_caps=True)
            emissions = emission_series(rng, instance.interval_count)
            schedule = flow.solve_min_co2(instance, emissions)
            validate_schedule(instance, schedule)
            reference = lp_min_co2(instance, emissions.kg_per_kwh)
            got = co2_total(schedule, emissions)
            assert abs(got - reference.objective) <= 1e-6 * max(1.0, reference.objective)

    def test_greedy_and_network_paths_agree(self):
        # Non-binding caps force the network solver onto instances the
        # separable path also accepts; both must land on the same cost.
        rng = np.random.default_rng(17)
        for _ in range(30):
            instance = random_instance(rng)
            emissions = emission_series(rng, instance.interval_count)
            greedy = flow.solve_min_co2(instance, emissions)
            slack = sum(job.max_rate_kwh for job in instance.jobs)
            capped = Instance(
                instance.horizon,
                instance.jobs,
                caps_kwh=np.full(instance.interval_count, slack),
            )
            network = flow.solve_min_co2(capped, emissions)
            validate_schedule(capped, network)
            assert co2_total(greedy, emissions) == pytest.approx(
                co2_total(network, emissions), abs=1e-9
            )

    def test_cost_translation_shifts_objective_only(self):
        rng = np.random.default_rng(19)
        for _ in range(20):
            instance = random_instance(rng)
            emissions = emission_series(rng, instance.interval_count)
            shifted = flow.EmissionSeries(emissions.kg_per_kwh + 0.05)
            base = flow.solve_min_co2(instance, emissions)
            moved = flow.solve_min_co2(instance, shifted)
            np.testing.assert_array_equal(base.aggregate_kwh, moved.aggregate_kwh)
            total = sum(job.energy_kwh for job in instance.jobs)
            assert co2_total(moved, shifted) == pytest.approx(
                co2_total(base, emissions) + 0.05 * total, rel=1e-9
            )

    def test_deterministic(self):
        rng = np.random.default_rng(23)
        instance = random_instance(rng, with_caps=True)
        emissions = emission_series(np.random.default_rng(23), instance.interval_count)
        first = flow.solve_min_co2(instance, emissions)
        second = flow.solve_min_co2(instance, emissions)
        assert first.aggregate_kwh.tobytes() == second.aggregate_kwh.tobytes()

    def test_infeasible_caps_raise(self):
        horizon = make_horizon(1)
        jobs = (
            Job(id="a", arrival=0, departure=1, energy_kwh=6.0, max_rate_kwh=6.0),
            Job(id="b", arrival=0, departure=1, energy_kwh=6.0, max_rate_kwh=6.0),
        )
        instance = Instance(horizon, jobs, caps_kwh=np.array([10.0]))
        with pytest.raises(InfeasibleError):
            flow.solve_min_co2(instance, flow.EmissionSeries(np.array([0.2])))


class TestVerifyOptimality:
    def _tiny_network(self):
        horizon = make_horizon(2)
        jobs = (Job(id="a", arrival=0, departure=2, energy_kwh=2.0, max_rate_kwh=2.0),)
        instance = Instance(horizon, jobs, caps_kwh=np.array([3.0, 3.0]))
        emissions = flow.EmissionSeries(np.array([0.1, 0.5]))
        return flow.build_network(instance, emissions)

    def test_certifies_solver_output(self):
        rng = np.random.default_rng(29)
        for _ in range(20):
            instance = random_instance(rng, with_caps=True)
            emissions = emission_series(rng, instance.interval_count)
            network = flow.build_network(instance, emissions)
            flows = flow._min_cost_flow(network)
            certificate = flow.verify_optimality(network, flows)
            assert certificate.optimal
            assert certificate.witness_cycle == ()

    def test_suboptimal_flow_yields_negative_witness_cycle(self):
        network = self._tiny_network()
        # Arc order: source->job, job->i0, job->i1, i0->sink, i1->sink.
        # Routing everything through the dear interval is feasible but
        # beatable, so the certificate must expose a cycle.
        flows = np.array([2000, 0, 2000, 0, 2000], dtype=np.int64)
        certificate = flow.verify_optimality(network, flows)
        assert not certificate.optimal
        cycle = certificate.witness_cycle
        assert len(cycle) >= 2

        residual_cost = {}
        for a in range(network.arc_count):
            tail, head = int(network.tails[a]), int(network.heads[a])
            if flows[a] < network.capacities[a]:
                residual_cost[(tail, head)] = int(network.costs[a])
            if flows[a] > 0:
                residual_cost[(head, tail)] = -int(network.costs[a])
        total = 0
        for pos, node in enumerate(cycle):
            succ = cycle[(pos + 1) % len(cycle)]
            assert (node, succ) in residual_cost
            total += residual_cost[(node, succ)]
        assert total < 0

    def test_rejects_flow_violating_conservation(self):
        network = self._tiny_network()
        flows = np.array([2000, 1000, 0, 1000, 0], dtype=np.int64)
        with pytest.raises(ValueError):
            flow.verify_optimality(network, flows)

    def test_rejects_flow_violating_capacity(self):
        network = self._tiny_network()
        flows = np.array([9000, 9000, 0, 9000, 0], dtype=np.int64)
        with pytest.raises(ValueError):
            flow.verify_optimality(network, flows)


class TestFeasibilityCut:
    def test_generous_caps_feasible(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            instance = random_instance(rng, with_caps=True)
            report = flow.feasibility_cut(instance)
            assert report.feasible
            assert report.violating_jobs == frozenset()

    def test_overloaded_interval_names_both_jobs(self):
        horizon = make_horizon(1)
        jobs = (
            Job(id="a", arrival=0, departure=1, energy_kwh=6.0, max_rate_kwh=6.0),
            Job(id="b", arrival=0, departure=1, energy_kwh=6.0, max_rate_kwh=6.0),
        )
        instance = Instance(horizon, jobs, caps_kwh=np.array([10.0]))
        report = flow.feasibility_cut(instance)
        assert not report.feasible
        assert report.violating_jobs == frozenset({"a", "b"})

    def test_cut_isolates_overloaded_window(self):
        # Job "c" charges in a separate, uncongested interval and must
        # stay out of the violating set.
        horizon = make_horizon(2)
        jobs = (
            Job(id="a", arrival=0, departure=1, energy_kwh=6.0, max_rate_kwh=6.0),
            Job(id="b", arrival=0, departure=1, energy_kwh=6.0, max_rate_kwh=6.0),
            Job(id="c", arrival=1, departure=2, energy_kwh=2.0, max_rate_kwh=2.0),
        )
        instance = Instance(horizon, jobs, caps_kwh=np.array([10.0, 5.0]))
        report = flow.feasibility_cut(instance)
        assert not report.feasible
        assert report.violating_jobs == frozenset({"a", "b"})


class TestMaxFlowKernel:
    def test_diamond_graph(self):
        tails = np.array([0, 0, 1, 2, 1, 2])
        heads = np.array([1, 2, 3, 3, 2, 1])
        caps = np.array([10, 5, 7, 9, 2, 0])
        # Node 1 forwards at most 7 + 2 units, so the value is 7 + 7.
        value, flows = flow.max_flow(4, tails, heads, caps, 0, 3)
        assert value == 14
        balance = np.zeros(4, dtype=np.int64)
        np.subtract.at(balance, tails, flows)
        np.add.at(balance, heads, flows)
        assert balance[1] == 0 and balance[2] == 0
        assert balance[0] == -14 and balance[3] == 14

    def test_residual_reachability_stops_at_cut(self):
        tails = np.array([0, 1])
        heads = np.array([1, 2])
        caps = np.array([5, 3])
        value, flows = flow.max_flow(3, tails, heads, caps, 0, 2)
        assert value == 3
        mask = flow.residual_reachable(3, tails, heads, caps, flows, 0)
        assert list(mask) == [True, True, False]

    def test_rejects_capacities_beyond_kernel_range(self):
        tails = np.array([0])
        heads = np.array([1])
        caps = np.array([2**40], dtype=np.int64)
        with pytest.raises(ScalingOverflowError):
            flow.max_flow(2, tails, heads, caps, 0, 1)
