import random
import time

import pytest

from accelmodel import (
    ComputeAttrs,
    DataPathAttrs,
    IpCostParams,
    IpKind,
    IpNode,
    IpState,
    StateMachine,
    UnitCostLibrary,
    ValidationError,
    ip_estimate,
    predict_coarse,
    report_to_csv,
    resource_usage,
)
from accelmodel.coarse import state_duration_cycles, warmup_cycles
from accelmodel.fixtures import (
    demo_blocks,
    demo_cost_library,
    demo_graph,
    systolic_matmul_3x3,
)

from oracle_sim import random_bound_graph, random_cost_library


def mac_node(unroll=4, states=()):
    return IpNode("m", IpKind.COMPUTATION, "rnd_mac", 100.0, 16,
                  ComputeAttrs(unroll), StateMachine(tuple(states)))


def bus_node(width=8, states=()):
    return IpNode("b", IpKind.DATA_PATH, "rnd_bus", 100.0, 16,
                  DataPathAttrs(width), StateMachine(tuple(states)))


MAC = IpCostParams(kind="computation", e_mac=2e-12, l_mac=1e-8,
                   e_control=1e-12, e_warmup=5e-11, l_warmup=2.5e-8)
BUS = IpCostParams(kind="data_path", e_bit=1e-13, l_bit=1e-8,
                   l_control=3e-8)


class TestStateDuration:
    def test_compute_rounds_ceil(self):
        # 10 MACs on 4 lanes -> 3 rounds of one cycle each at 100 MHz.
        assert state_duration_cycles(mac_node(4), 10, MAC, 100e6) == 3

    def test_zero_work_occupies_one_cycle(self):
        assert state_duration_cycles(mac_node(), 0, MAC, 100e6) == 1

    def test_data_path_beats_plus_control(self):
        # 20 bits over 8-bit port -> 3 beats; 3 + 3 control cycles.
        assert state_duration_cycles(bus_node(8), 20, BUS, 100e6) == 6

    def test_exact_cycle_boundary_not_overcounted(self):
        # 4 rounds x 10 ns at 100 MHz is exactly 4 cycles, not 5.
        assert state_duration_cycles(mac_node(1), 4, MAC, 100e6) == 4

    def test_warmup_cycles_round_up(self):
        assert warmup_cycles(MAC, 100e6) == 3


class TestIpEstimate:
    def lib(self):
        return UnitCostLibrary(entries={("rnd_mac", "t"): MAC, ("rnd_bus", "t"): BUS},
                               provenance="t")

    def test_empty_state_machine_is_warmup_only(self):
        est = ip_estimate(mac_node(), self.lib())
        assert est.latency_cycles == 3
        assert est.energy == MAC.e_warmup

    def test_uniform_states_match_closed_form(self):
        # S identical states: L = l_warm + S * ceil(work/U) * l_mac,
        # E = e_warm + S * (e_ctl + e_mac * work).
        node = mac_node(4, [IpState(frozenset(), frozenset({f"t{i}"}), 10)
                            for i in range(5)])
        est = ip_estimate(node, self.lib())
        assert est.latency_cycles == 3 + 5 * 3
        expect_e = MAC.e_warmup + 5 * (MAC.e_control + MAC.e_mac * 10)
        assert est.energy == pytest.approx(expect_e, rel=1e-12)

    def test_kind_mismatch_rejected(self):
        lib = UnitCostLibrary(entries={("rnd_mac", "t"): BUS}, provenance="t")
        with pytest.raises(ValidationError, match="data_path entry"):
            ip_estimate(mac_node(), lib)


class TestResources:
    def test_memory_grouped_and_decode_muls(self):
        g, _ = systolic_matmul_3x3()
        lib = UnitCostLibrary(
            entries={
                ("systolic_mac", "t"): MAC,
                ("io_port", "t"): IpCostParams(kind="memory", e_bit=0, l_bit=0),
            },
            mul_per_decode=2, provenance="t")
        res = resource_usage(g, lib)
        assert res.mem_bits_by_type == {"io_port": 2048}
        # 9 PEs at unroll 1 plus 2 memories x 2 decode multipliers.
        assert res.mul_count == 9 + 4
        assert res.mul_decode_count == 4


class TestSystemPrediction:
    def test_fixture_critical_path(self):
        g, lib = systolic_matmul_3x3()
        rep = predict_coarse(g, lib)
        assert rep.latency_cycles == 15
        assert rep.latency_seconds == pytest.approx(15 / 100e6)
        assert len(rep.critical_path) == 5

    def test_energy_is_sum_plus_host(self):
        rng = random.Random(5)
        g = random_bound_graph(rng)
        lib = random_cost_library(rng)
        rep = predict_coarse(g, lib)
        total = sum(e.energy for e in rep.per_ip.values()) + lib.host_energy
        assert rep.energy_total == pytest.approx(total, rel=1e-12)

    def test_invalid_graph_rejected(self):
        g, lib = systolic_matmul_3x3()
        broken = g.with_nodes({}, final_output_tokens=frozenset({"nothing"}))
        with pytest.raises(ValidationError, match="invalid graph"):
            predict_coarse(broken, lib)

    def test_csv_export_shape(self):
        g, lib = systolic_matmul_3x3()
        csv = report_to_csv(predict_coarse(g, lib))
        lines = csv.strip().splitlines()
        assert lines[0] == "node,energy_j,latency_cycles,latency_seconds"
        assert lines[-1].startswith("TOTAL,")
        assert len(lines) == 1 + 11 + 1

    def test_prediction_speed_under_1ms(self):
        # Mean analytical prediction time on a bound graph near the 100-node
        # scale (a 6x6 row-stationary array is 76 IPs).
        from accelmodel import DataSchedule, TemplateKind, bind_mapping, build_graph
        from accelmodel.templates import instantiate_template

        lib = demo_cost_library()
        _, model = demo_blocks()[2]
        arch = instantiate_template(TemplateKind.ROW_STATIONARY_NOC,
                                    {"dims": 6, "unroll": 2})
        g = bind_mapping(build_graph(arch, lib), model,
                         DataSchedule(default_tiles=2))
        assert len(g.nodes) > 70
        predict_coarse(g, lib)  # warm the duration caches
        n = 100
        t0 = time.perf_counter()
        for _ in range(n):
            predict_coarse(g, lib)
        mean = (time.perf_counter() - t0) / n
        assert mean < 1e-3, f"mean prediction time {mean * 1e3:.3f} ms"
