"""Command-line entry point.

Subcommands: predict (coarse or fine), simulate (fine shortcut), explore,
report, validate. Exit codes: 1 malformed input file, 2 semantic validation
failure, 3 simulation failure (deadlock / cycle limit), 4 filesystem I/O
error. All outputs are deterministic: keys are sorted and no timestamps or
environment details are embedded beyond the recorded seed/thread settings.
"""

from __future__ import annotations

import argparse
import json
import sys

from .binding import DataSchedule, bind_mapping
from .coarse import predict_coarse, report_to_csv
from .costs import load_library
from .dnn import parse_model
from .errors import SchemaError, SimulationError, ValidationError
from .explore import manifest_to_csv, parse_app_config, run_exploration
from .fine import SimLimits, export_trace, simulate
from .graph import build_graph, export_dot, parse_arch, validate_graph

EXIT_SCHEMA = 1
EXIT_VALIDATION = 2
EXIT_SIMULATION = 3
EXIT_IO = 4


def _read(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        print(f"error: cannot read '{path}': {exc.strerror}", file=sys.stderr)
        raise SystemExit(EXIT_IO) from None


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        print(f"error: cannot write '{path}': {exc.strerror}", file=sys.stderr)
        raise SystemExit(EXIT_IO) from None


def _dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _load_graph(args):
    """Build the (bound) graph from --arch/--costs and optionally --model."""
    lib = load_library(_read(args.costs))
    arch = parse_arch(_read(args.arch))
    graph = build_graph(arch, lib)
    model = None
    if getattr(args, "model", None):
        model = parse_model(_read(args.model))
        graph = bind_mapping(graph, model,
                             DataSchedule(default_tiles=args.tiles))
    elif not graph.is_bound:
        raise ValidationError(
            "architecture carries no state machines; provide --model to bind "
            "a workload"
        )
    return graph, lib, model


def _add_common(p: argparse.ArgumentParser, model_required: bool = False):
    p.add_argument("--arch", required=True, help="architecture description file")
    p.add_argument("--costs", required=True, help="unit cost library file")
    p.add_argument("--model", required=model_required,
                   help="model interchange file to bind onto the architecture")
    p.add_argument("--tiles", type=int, default=1,
                   help="output-channel tile count per layer (default 1)")
    p.add_argument("--out", help="output path (default: stdout)")


def cmd_predict(args) -> int:
    graph, lib, _ = _load_graph(args)
    if args.mode == "coarse":
        report = predict_coarse(graph, lib)
        doc = report.to_doc()
    else:
        limits = SimLimits(max_cycles=args.max_cycles,
                           trace_enabled=args.trace is not None)
        sim = simulate(graph, lib, limits)
        doc = sim.to_doc()
        if args.trace is not None:
            _write(args.trace, export_trace(sim))
    _write(args.out, _dumps(doc))
    return 0


def cmd_explore(args) -> int:
    lib = load_library(_read(args.costs))
    model = parse_model(_read(args.model))
    config = parse_app_config(_read(args.config))
    manifest = run_exploration(model, config, lib, seed=args.seed,
                               threads=args.threads)
    _write(args.out, _dumps(manifest))
    return 0


def cmd_report(args) -> int:
    try:
        doc = json.loads(_read(args.input))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"report input is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("report input must be a JSON object")
    if "candidates" in doc:
        _write(args.out, manifest_to_csv(doc))
        return 0
    if doc.get("mode") == "coarse":
        lines = ["node,energy_j,latency_cycles,latency_seconds"]
        for nid, est in sorted(doc.get("per_ip", {}).items()):
            lines.append(f"{nid},{est['energy_j']!r},{est['latency_cycles']},"
                         f"{est['latency_seconds']!r}")
        lines.append(f"TOTAL,{doc['energy_total_j']!r},{doc['latency_cycles']},"
                     f"{doc['latency_seconds']!r}")
        _write(args.out, "\n".join(lines) + "\n")
        return 0
    if doc.get("mode") == "fine":
        lines = ["node,busy_cycles,idle_cycles"]
        for nid, row in sorted(doc.get("per_ip", {}).items()):
            lines.append(f"{nid},{row['busy_cycles']},{row['idle_cycles']}")
        lines.append(f"TOTAL,{doc['total_cycles']},")
        _write(args.out, "\n".join(lines) + "\n")
        return 0
    raise SchemaError("report input is neither a prediction report nor an "
                      "exploration manifest")


def cmd_validate(args) -> int:
    graph, lib, _ = _load_graph(args)
    diags = validate_graph(graph, lib)
    for d in diags:
        print(d)
    if args.dot is not None:
        _write(args.dot, export_dot(graph))
    if diags:
        return EXIT_VALIDATION
    print("ok")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="accelmodel",
        description="accelerator energy/latency prediction and exploration",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="predict energy/latency/resources")
    _add_common(p)
    p.add_argument("--mode", choices=("coarse", "fine"), default="coarse")
    p.add_argument("--trace", help="write a state-transition trace (fine mode)")
    p.add_argument("--max-cycles", type=int, default=10_000_000)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", help="cycle-level simulation (predict --mode fine)")
    _add_common(p)
    p.add_argument("--trace", help="write a state-transition trace")
    p.add_argument("--max-cycles", type=int, default=10_000_000)
    p.set_defaults(func=cmd_predict, mode="fine")

    p = sub.add_parser("explore", help="two-stage design-space exploration")
    p.add_argument("--model", required=True)
    p.add_argument("--costs", required=True)
    p.add_argument("--config", required=True, help="exploration config file")
    p.add_argument("--out", help="manifest output path (default: stdout)")
    p.add_argument("--seed", type=int, default=0,
                   help="recorded in the manifest for provenance")
    p.add_argument("--threads", type=int, default=1,
                   help="recorded in the manifest; evaluation is sequential")
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("report", help="tabular view of a report or manifest")
    p.add_argument("--input", required=True,
                   help="prediction report or exploration manifest (JSON)")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("validate", help="structural checks on an architecture")
    _add_common(p)
    p.add_argument("--dot", help="also write a Graphviz rendering")
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
