#!/usr/bin/env python3
"""Watch the systolic wavefront.

Simulates the hand-built 3x3 systolic matrix multiply with tracing enabled
and renders which PE is busy in each cycle. The diagonal wavefront is the
whole story: PE (i,j) starts at cycle i+j, so the array finishes in 7 cycles
where the no-overlap estimate says 15.
"""

from accelmodel import SimLimits, predict_coarse, simulate
from accelmodel.fixtures import systolic_matmul_3x3


def main():
    graph, lib = systolic_matmul_3x3()
    coarse = predict_coarse(graph, lib)
    sim = simulate(graph, lib, SimLimits(trace_enabled=True))

    print(f"coarse (serial) latency: {coarse.latency_cycles} cycles")
    print(f"fine (overlapped) latency: {sim.total_cycles} cycles\n")

    pes = sorted(n.id for n in graph.nodes if n.id.startswith("pe"))
    busy = {nid: [" ."] * sim.total_cycles for nid in pes}
    active: dict[str, str] = {}
    for rec in sim.trace:
        if rec.from_state == "idle":
            active[rec.node] = rec.to_state
        if rec.node in active:
            busy[rec.node][rec.cycle] = " " + active[rec.node][-1]
        if rec.to_state == "idle":
            del active[rec.node]

    header = "cycle    " + "".join(f"{c:>2}" for c in range(sim.total_cycles))
    print(header)
    for nid in pes:
        print(f"{nid:<9}" + "".join(busy[nid]))
    print("\n(cell = state index the PE is executing; '.' = idle)")


if __name__ == "__main__":
    main()
