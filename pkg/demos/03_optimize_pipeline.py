#!/usr/bin/env python3
"""Pipeline the bottleneck away.

Runs the greedy latency optimizer on one conv block: each iteration finds
the IP with the fewest idle cycles (the busiest stage), splits its states
toward its heaviest consumer so the two can overlap, or widens its resources
once a pipeline is already in place. Worsening steps roll back, so the best
latency only ever falls.
"""

from accelmodel import AppSpec, ConvergenceRule, Objective, ResourceBudget, simulate
from accelmodel.explore import optimize_candidate
from accelmodel.fixtures import demo_blocks, demo_cost_library, demo_graph


def main():
    lib = demo_cost_library()
    name, model = demo_blocks()[0]
    spec = AppSpec(Objective.MIN_LATENCY, throughput_fps_min=10.0,
                   power_budget_w=10.0,
                   resource_budget=ResourceBudget(mul_count=512,
                                                  mem_bits=1 << 24))
    graph = demo_graph(model, lib)
    before = simulate(graph, lib)

    best, after, log, _ = optimize_candidate(graph, lib, spec,
                                             ConvergenceRule())

    print(f"{name}: {before.total_cycles:,} -> {after.total_cycles:,} cycles "
          f"({before.total_cycles / after.total_cycles:.1f}x)\n")
    for entry in log:
        line = f"iter {entry['iter']:>2}  {entry.get('action', ''):<10}"
        if "bottleneck" in entry:
            line += f" bottleneck={entry['bottleneck']:<8}"
        if "latency_cycles" in entry:
            line += f" latency={entry['latency_cycles']:>9,}"
        if "result" in entry:
            line += f"  {entry['result']}"
        print(line)

    idle_b = min(before.per_ip_idle_cycles.values())
    idle_a = min(after.per_ip_idle_cycles.values())
    print(f"\nbottleneck idle cycles: {idle_b:,} -> {idle_a:,} "
          f"({idle_b / max(1, idle_a):.1f}x reduction)")


if __name__ == "__main__":
    main()
