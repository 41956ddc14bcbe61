import random

import pytest

from accelmodel import (
    AccelGraph,
    CycleLimitError,
    DataPathAttrs,
    DeadlockError,
    Edge,
    IpCostParams,
    IpKind,
    IpNode,
    IpState,
    SimLimits,
    StateMachine,
    UnitCostLibrary,
    export_trace,
    predict_coarse,
    replay_trace,
    simulate,
)
from accelmodel.fine import bottleneck_of
from accelmodel.fixtures import systolic_matmul_3x3

from oracle_sim import oracle_simulate, random_bound_graph, random_cost_library

BUS = IpCostParams(kind="data_path", e_bit=1e-13, l_bit=1e-8, e_control=1e-12)


def chain(n_nodes, states_per_node=2, work=4):
    """A pure barrier chain: every state needs the full output of the
    predecessor's corresponding state, so no overlap is possible."""
    nodes = []
    edges = []
    for i in range(n_nodes):
        states = []
        for k in range(states_per_node):
            if i == 0:
                needed = frozenset({"go"}) if k == 0 else frozenset()
            else:
                # Wait for the predecessor to fully finish its round k.
                needed = frozenset({f"t.{i - 1}.{states_per_node - 1}"}) \
                    if k == 0 else frozenset()
            states.append(IpState(needed, frozenset({f"t.{i}.{k}"}), work))
        nodes.append(IpNode(f"n{i}", IpKind.DATA_PATH, "rnd_bus", 100.0, 16,
                            DataPathAttrs(1), StateMachine(tuple(states))))
        if i:
            edges.append(Edge(f"n{i - 1}", f"n{i}"))
    return AccelGraph(
        tuple(nodes), tuple(edges),
        primary_input_tokens=frozenset({"go"}),
        final_output_tokens=frozenset({f"t.{n_nodes - 1}.{states_per_node - 1}"}),
    )


def bus_lib():
    return UnitCostLibrary(entries={("rnd_bus", "t"): BUS}, provenance="t")


class TestGolden:
    def test_systolic_seven_cycles(self):
        g, lib = systolic_matmul_3x3()
        sim = simulate(g, lib)
        assert sim.total_cycles == 7

    def test_wavefront_start_cycles(self):
        # Each diagonal starts one cycle after the previous one.
        g, lib = systolic_matmul_3x3()
        sim = simulate(g, lib, SimLimits(trace_enabled=True))
        starts = {r.node: r.cycle for r in sim.trace
                  if r.from_state == "idle" and r.to_state == "s0"}
        for i in range(3):
            for j in range(3):
                assert starts[f"pe_{i}_{j}"] == i + j


class TestVsCoarse:
    def test_barrier_chain_matches_coarse_exactly(self):
        g = chain(4, states_per_node=3, work=5)
        lib = bus_lib()
        assert simulate(g, lib).total_cycles == predict_coarse(g, lib).latency_cycles

    def test_fine_never_exceeds_coarse(self):
        rng = random.Random(99)
        for _ in range(100):
            g = random_bound_graph(rng)
            lib = random_cost_library(rng)
            assert simulate(g, lib).total_cycles <= \
                predict_coarse(g, lib).latency_cycles

    def test_energy_mode_invariant(self):
        rng = random.Random(17)
        for _ in range(100):
            g = random_bound_graph(rng)
            lib = random_cost_library(rng)
            e_fine = simulate(g, lib).energy
            e_coarse = predict_coarse(g, lib).energy_total
            assert e_fine == pytest.approx(e_coarse, rel=1e-12, abs=0.0)


class TestAccounting:
    def test_idle_plus_busy_equals_total(self):
        rng = random.Random(3)
        g = random_bound_graph(rng)
        lib = random_cost_library(rng)
        sim = simulate(g, lib)
        for nid in sim.per_ip_busy_cycles:
            assert sim.per_ip_busy_cycles[nid] + sim.per_ip_idle_cycles[nid] \
                == sim.total_cycles

    def test_bottleneck_minimum_idle(self):
        assert bottleneck_of({"A": 0, "B": 5}) == "A"
        assert bottleneck_of({"B": 5, "A": 0}) == "A"
        # Ties break toward the smallest id.
        assert bottleneck_of({"y": 2, "x": 2}) == "x"

    def test_single_ip_has_zero_idle(self):
        g = chain(1, states_per_node=1, work=3)
        sim = simulate(g, bus_lib())
        assert sim.total_cycles == 3
        assert sim.per_ip_idle_cycles == {"n0": 0}
        assert sim.bottleneck == "n0"

    def test_deterministic_across_runs(self):
        rng = random.Random(11)
        g = random_bound_graph(rng)
        lib = random_cost_library(rng)
        a = simulate(g, lib, SimLimits(trace_enabled=True))
        b = simulate(g, lib, SimLimits(trace_enabled=True))
        assert a == b


class TestFailureModes:
    def test_deadlock_names_starved_tokens(self):
        # Validation statically rejects every starvation we know how to
        # construct, so the runtime guard is exercised by skipping it: drop
        # the primary token and mark the graph as already validated.
        g = chain(2)
        starved = AccelGraph(g.nodes, g.edges,
                             primary_input_tokens=frozenset(),
                             final_output_tokens=g.final_output_tokens)
        lib = bus_lib()
        object.__setattr__(starved, "_valid_for", {id(lib)})
        with pytest.raises(DeadlockError) as exc:
            simulate(starved, lib)
        assert "go" in str(exc.value)
        assert exc.value.cycle == 0

    def test_cycle_limit(self):
        g = chain(4, states_per_node=3, work=5)
        with pytest.raises(CycleLimitError):
            simulate(g, bus_lib(), SimLimits(max_cycles=3))


class TestTrace:
    def test_format_and_replay_consistency(self):
        g, lib = systolic_matmul_3x3()
        sim = simulate(g, lib, SimLimits(trace_enabled=True))
        text = export_trace(sim)
        assert text.splitlines()[0] == "cycle,node,from_state,to_state"
        busy, total = replay_trace(text)
        assert total == sim.total_cycles
        assert busy == {k: v for k, v in sim.per_ip_busy_cycles.items() if v}

    def test_trace_disabled_by_default(self):
        g, lib = systolic_matmul_3x3()
        sim = simulate(g, lib)
        assert sim.trace is None
        with pytest.raises(Exception, match="not enabled"):
            export_trace(sim)

    def test_replay_on_random_graphs(self):
        rng = random.Random(21)
        for _ in range(25):
            g = random_bound_graph(rng)
            lib = random_cost_library(rng)
            sim = simulate(g, lib, SimLimits(trace_enabled=True))
            busy, total = replay_trace(export_trace(sim))
            assert total == sim.total_cycles
            assert busy == {k: v for k, v in sim.per_ip_busy_cycles.items() if v}


class TestOracle:
    def test_matches_oracle_on_corpus(self):
        rng = random.Random(4242)
        for _ in range(100):
            g = random_bound_graph(rng)
            lib = random_cost_library(rng)
            sim = simulate(g, lib)
            total, energy, busy = oracle_simulate(g, lib)
            assert sim.total_cycles == total
            assert sim.energy == pytest.approx(energy, rel=1e-12, abs=0.0)
            assert sim.per_ip_busy_cycles == busy
