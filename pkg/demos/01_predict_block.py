#!/usr/bin/env python3
"""Predict a convolution block two ways.

Binds a small conv+relu block onto the adder-tree accelerator and compares
the fast analytical estimate (every IP runs to completion before the next
starts) with the cycle-level simulation (IPs overlap wherever tokens allow).
"""

from accelmodel import predict_coarse, simulate
from accelmodel.fixtures import demo_blocks, demo_cost_library, demo_graph


def main():
    lib = demo_cost_library()
    name, model = demo_blocks()[0]
    print(f"model: {name}, {model.total_mac_count():,} MACs")

    for tiles in (1, 4):
        graph = demo_graph(model, lib, tiles=tiles)
        coarse = predict_coarse(graph, lib)
        fine = simulate(graph, lib)
        print(f"\n--- {tiles} tile(s) per layer ---")
        print(f"coarse: {coarse.latency_cycles:>9,} cycles "
              f"({coarse.latency_seconds * 1e3:.3f} ms), "
              f"{coarse.energy_total * 1e6:.2f} uJ")
        print(f"fine:   {fine.total_cycles:>9,} cycles "
              f"({fine.latency_seconds * 1e3:.3f} ms), "
              f"{fine.energy * 1e6:.2f} uJ")
        print(f"critical path: {' -> '.join(coarse.critical_path)}")
        print(f"bottleneck (min idle): {fine.bottleneck}")
        print(f"resources: {coarse.resources.mul_count} multipliers, "
              f"{coarse.resources.total_mem_bits:,} memory bits")

    print("\nTiling cuts both ways: each tile re-reads the input feature "
          "map, so total bus traffic grows, but smaller tiles let downstream "
          "IPs start earlier. Compare the fine/coarse ratios above: the "
          "overlap fraction improves with tiles even when this block's extra "
          "traffic makes the absolute numbers worse.")


if __name__ == "__main__":
    main()
