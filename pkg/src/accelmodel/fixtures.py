"""Reference fixtures: a hand-built 3x3 systolic matrix-multiply graph with
known golden latencies, plus a small six-block convolutional workload used by
the demos and the optimizer tests.

The systolic fixture's numbers are derivable by hand. Every PE runs three
one-cycle states; the first forwards operands to the right/down neighbours,
so the wavefront advances one diagonal per cycle:

  coarse latency = 3 cycles per PE x 5 PEs on the corner-to-corner
                   dependency path = 15 cycles
  fine latency   = last PE starts forwarding at cycle 4 (its diagonal) and
                   finishes its third state at the end of cycle 6 = 7 cycles
"""

from __future__ import annotations

from .binding import DataSchedule, bind_mapping
from .costs import IpCostParams, UnitCostLibrary
from .dnn import DnnModel, LayerKind, LayerSpec, Precision, TensorShape
from .graph import (
    AccelGraph,
    ComputeAttrs,
    Edge,
    IpKind,
    IpNode,
    IpState,
    StateMachine,
    build_graph,
)
from .templates import TemplateKind, instantiate_template

SYSTOLIC_COARSE_CYCLES = 15
SYSTOLIC_FINE_CYCLES = 7


def systolic_cost_library() -> UnitCostLibrary:
    """Unit costs making one MAC round exactly one 100 MHz cycle."""
    return UnitCostLibrary(
        entries={
            ("systolic_mac", "fixture"): IpCostParams(
                kind="computation", e_mac=1e-12, l_mac=1e-8,
            ),
            ("io_port", "fixture"): IpCostParams(
                kind="memory", e_bit=0.0, l_bit=0.0,
            ),
        },
        mul_per_decode=0,
        provenance="hand-built fixture; one MAC per cycle at 100 MHz, "
                   "1 pJ per MAC, no overheads",
    )


def systolic_matmul_3x3() -> tuple[AccelGraph, UnitCostLibrary]:
    """3x3 output-stationary systolic array computing a 3x3 matrix multiply.

    Each PE holds three single-cycle states: forward operands (producing the
    tokens its neighbours wait on), accumulate, and emit its result element.
    PE (0,0) consumes the two primary operand tokens; all nine result tokens
    are the final outputs. Stateless zero-cost I/O memories frame the array
    so every compute node has a physical feeder and drain; they contribute
    no cycles to either prediction mode.
    """
    from .graph import MemoryAttrs

    n = 3
    nodes = [
        IpNode("mem_feed", IpKind.MEMORY, "io_port", 100.0, 16,
               MemoryAttrs(volume_bits=1024, data_types_held=("input activations",))),
        IpNode("mem_drain", IpKind.MEMORY, "io_port", 100.0, 16,
               MemoryAttrs(volume_bits=1024, data_types_held=("partial sums",))),
    ]
    edges = [Edge("mem_feed", "pe_0_0"), Edge(f"pe_{n - 1}_{n - 1}", "mem_drain")]
    for i in range(n):
        for j in range(n):
            needed: set[str] = set()
            if i == 0 and j == 0:
                needed = {"a00", "b00"}
            if j > 0:
                needed.add(f"fwd.{i}.{j - 1}")
            if i > 0:
                needed.add(f"fwd.{i - 1}.{j}")
            states = (
                IpState(frozenset(needed), frozenset({f"fwd.{i}.{j}"}), work=1),
                IpState(frozenset(), frozenset({f"acc.{i}.{j}"}), work=1),
                IpState(frozenset(), frozenset({f"res.{i}.{j}"}), work=1),
            )
            nodes.append(
                IpNode(
                    id=f"pe_{i}_{j}",
                    kind=IpKind.COMPUTATION,
                    impl="systolic_mac",
                    freq_mhz=100.0,
                    precision=16,
                    attrs=ComputeAttrs(unroll_u=1),
                    state_machine=StateMachine(states),
                )
            )
            if j + 1 < n:
                edges.append(Edge(f"pe_{i}_{j}", f"pe_{i}_{j + 1}"))
            if i + 1 < n:
                edges.append(Edge(f"pe_{i}_{j}", f"pe_{i + 1}_{j}"))
    graph = AccelGraph(
        nodes=tuple(nodes),
        edges=tuple(edges),
        primary_input_tokens=frozenset({"a00", "b00"}),
        final_output_tokens=frozenset(
            f"res.{i}.{j}" for i in range(n) for j in range(n)
        ),
    )
    return graph, systolic_cost_library()


# --------------------------------------------------------------------------
# Demo workload: six convolutional blocks of increasing depth/width, bound
# onto the adder-tree template. Unit costs are tuned so the input bus and
# the compute engine have comparable occupancy, which is where inter-IP
# pipelining pays off.


def data_path(name: str):
    """Filesystem path of a bundled data file (cost libraries, fixtures)."""
    from importlib import resources

    return resources.files("accelmodel").joinpath("data", name)


def bundled_cost_library() -> UnitCostLibrary:
    """The placeholder generic-28nm library shipped with the package."""
    from .costs import load_library

    return load_library(data_path("generic-28nm.json").read_text())


def demo_cost_library() -> UnitCostLibrary:
    return UnitCostLibrary(
        entries={
            ("dram_offchip", "demo"): IpCostParams(
                kind="memory", e_control=2e-10, l_control=1e-7,
                e_bit=4e-12, l_bit=5e-12,
            ),
            ("sram_bram", "demo"): IpCostParams(
                kind="memory", e_control=5e-11, l_control=2e-8,
                e_bit=5e-13, l_bit=2e-12,
            ),
            ("sram_gbuf", "demo"): IpCostParams(
                kind="memory", e_control=5e-11, l_control=2e-8,
                e_bit=8e-13, l_bit=2e-12,
            ),
            ("axi_bus", "demo"): IpCostParams(
                kind="data_path", e_control=1e-10, l_control=5e-8,
                e_bit=1e-12, l_bit=6.5e-8,
            ),
            ("sync_fifo", "demo"): IpCostParams(
                kind="data_path", e_control=2e-11, l_control=5e-9,
                e_bit=3e-13, l_bit=1e-9,
            ),
            ("noc_link", "demo"): IpCostParams(
                kind="data_path", e_control=5e-11, l_control=1e-8,
                e_bit=6e-13, l_bit=2e-9,
            ),
            ("adder_tree_mac", "demo"): IpCostParams(
                kind="computation", e_control=1e-10, l_control=0.0,
                e_mac=2e-12, l_mac=5e-9,
            ),
            ("conv_engine", "demo"): IpCostParams(
                kind="computation", e_control=1e-10, l_control=0.0,
                e_mac=2e-12, l_mac=5e-9,
            ),
            ("dw_conv_engine", "demo"): IpCostParams(
                kind="computation", e_control=8e-11, l_control=0.0,
                e_mac=1.5e-12, l_mac=5e-9,
            ),
            ("systolic_mac", "demo"): IpCostParams(
                kind="computation", e_control=9e-11, l_control=0.0,
                e_mac=1.8e-12, l_mac=5e-9,
            ),
            ("rs_pe", "demo"): IpCostParams(
                kind="computation", e_control=9e-11, l_control=0.0,
                e_mac=1.7e-12, l_mac=5e-9,
            ),
        },
        mul_per_decode=1,
        host_energy=1e-6,
        host_latency=2e-6,
        provenance="synthetic demo calibration; per-unit values chosen so one "
                   "MAC round and one bus beat are whole 200 MHz cycles",
    )


def _conv_block(name: str, c_in: int, c_out: int, size: int,
                stride: int = 1) -> DnnModel:
    out_size = -(-size // stride)
    conv = LayerSpec(
        id=f"{name}_conv",
        kind=LayerKind.CONV,
        input_shape=TensorShape(c_in, size, size),
        output_shape=TensorShape(c_out, out_size, out_size),
        kernel=(3, 3),
        stride=stride,
    )
    relu = LayerSpec(
        id=f"{name}_relu",
        kind=LayerKind.RELU,
        input_shape=conv.output_shape,
        output_shape=conv.output_shape,
        kernel=None,
        stride=1,
        predecessors=(conv.id,),
    )
    return DnnModel(name=name, precision=Precision(16, 16, 32),
                    layers=(conv, relu))


def demo_blocks() -> list[tuple[str, DnnModel]]:
    """Six conv+relu blocks spanning a small feature-extractor's shapes."""
    return [
        ("block1", _conv_block("b1", 3, 32, 32)),
        ("block2", _conv_block("b2", 32, 32, 16)),
        ("block3", _conv_block("b3", 32, 64, 16, stride=2)),
        ("block4", _conv_block("b4", 64, 64, 8)),
        ("block5", _conv_block("b5", 64, 96, 8)),
        ("block6", _conv_block("b6", 96, 128, 4)),
    ]


def demo_graph(model: DnnModel, lib: UnitCostLibrary,
               tiles: int = 1, unroll: int = 16) -> AccelGraph:
    """Bind a model onto the default adder-tree accelerator."""
    arch = instantiate_template(TemplateKind.ADDER_TREE_SPATIAL,
                                {"unroll": unroll, "freq_mhz": 200.0})
    return bind_mapping(build_graph(arch, lib), model,
                        DataSchedule(default_tiles=tiles))
