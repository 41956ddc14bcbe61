#!/usr/bin/env python3
"""Two-stage design-space exploration, end to end.

Stage 1 sweeps two template families over their parameter grids and prunes
with the fast analytical model against the resource, throughput, and power
budgets. Stage 2 takes the survivors into the cycle-level simulator and
co-optimizes pipelining and resource allocation. The result is a ranked,
fully reproducible manifest.
"""

import json

from accelmodel import parse_app_config, run_exploration
from accelmodel.fixtures import demo_blocks, demo_cost_library

CONFIG = {
    "version": "1",
    "objective": "min_edp",
    "throughput_fps_min": 10.0,
    "power_budget_w": 10.0,
    "resource_budget": {"mul_count": 512, "mem_bits": 1 << 24},
    "templates": [
        {"kind": "AdderTreeSpatial", "grid": {"unroll": [8, 16, 32, 64]}},
        {"kind": "SystolicArray", "grid": {"dims": [2, 4]}},
    ],
    "schedules": [{"default_tiles": 1}, {"default_tiles": 2}],
    "keep": 5,
    "n_opt": 3,
}


def main():
    lib = demo_cost_library()
    _, model = demo_blocks()[0]
    config = parse_app_config(json.dumps(CONFIG))
    manifest = run_exploration(model, config, lib, seed=0)

    c = manifest["counters"]
    print(f"enumerated {c['n1']} points -> {c['n2']} survived pruning -> "
          f"{c['n3']} simulated variants -> top {c['n_opt']}\n")
    for cand in manifest["candidates"]:
        print(f"#{cand['rank']} {cand['template']} {cand['params']} "
              f"tiles={cand['schedule']['default_tiles']}")
        print(f"    coarse {cand['coarse']['latency_seconds'] * 1e3:8.3f} ms   "
              f"fine {cand['fine']['latency_seconds'] * 1e3:8.3f} ms   "
              f"EDP {cand['objective_value']:.3e} J*s")


if __name__ == "__main__":
    main()
