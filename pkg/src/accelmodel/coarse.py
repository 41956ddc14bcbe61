"""Analytical (coarse-grained) predictor.

Per-IP energy/latency follow the intra-IP models:

  computation IP:  E = e_warm + sum_s (e_ctl + e_mac * work_s)
                   L = l_warm + sum_s ceil(work_s / U) * l_mac
  data-path / memory IP:
                   E = e_warm + sum_s (e_ctl + work_s * e_bit)
                   L = l_warm + sum_s (l_ctl + ceil(work_s / P_w) * l_bit)

which reduce to the uniform-volume closed forms when every state carries the
same work. System totals: resources and energy sum over all IPs; latency is
the max over source-to-sink dependency paths of the summed per-IP latencies,
plus a once-per-inference host constant.

All cycle accounting happens in the graph's global clock domain; per-state
latencies convert to cycles with a ceiling and occupy at least one cycle.
The same per-state durations drive the fine-grained simulator, so the two
modes agree exactly whenever no inter-IP overlap is possible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .costs import IpCostParams, UnitCostLibrary
from .errors import ValidationError
from .graph import AccelGraph, IpKind, IpNode, critical_path, validate_graph

_DUR_CACHE_ATTR = "_dur_cache"


def ensure_valid(graph: AccelGraph, lib: UnitCostLibrary) -> None:
    """Validate once per (graph, library) pair; graphs are immutable, so a
    clean result is cached on the graph object."""
    if id(lib) in getattr(graph, "_valid_for", ()):
        return
    diags = validate_graph(graph, lib)
    if diags:
        raise ValidationError("invalid graph: " + "; ".join(diags))
    seen = getattr(graph, "_valid_for", None)
    if seen is None:
        seen = set()
        object.__setattr__(graph, "_valid_for", seen)
    seen.add(id(lib))


def node_params(node: IpNode, lib: UnitCostLibrary) -> IpCostParams:
    params = lib.resolve(node.impl)
    if params.kind != node.kind.cost_kind:
        raise ValidationError(
            f"node '{node.id}': impl '{node.impl}' is a {params.kind} entry "
            f"but the node is a {node.kind.value} IP"
        )
    return params


def state_duration_cycles(node: IpNode, work: int, params: IpCostParams,
                          clock_hz: float) -> int:
    """Duration of one state in global clock cycles (ceiling, min 1).

    Hardware transfers whole beats and a state occupies at least one cycle,
    so both divisions round up; this is deliberately conservative relative to
    the exact-fraction closed forms.
    """
    if node.kind is IpKind.COMPUTATION:
        rounds = -(-work // node.unroll_u)
        seconds = rounds * params.l_mac
    else:
        beats = -(-work // node.port_width_bits)
        seconds = params.l_control + beats * params.l_bit
    return max(1, math.ceil(seconds * clock_hz - 1e-9))


def state_energy(node: IpNode, work: int, params: IpCostParams) -> float:
    if node.kind is IpKind.COMPUTATION:
        return params.e_control + params.e_mac * work
    return params.e_control + work * params.e_bit


def warmup_cycles(params: IpCostParams, clock_hz: float) -> int:
    return math.ceil(params.l_warmup * clock_hz - 1e-9)


def state_durations(node: IpNode, params: IpCostParams, clock_hz: float) -> list[int]:
    """Per-state durations in cycles, cached on the (immutable) state machine."""
    cache = getattr(node.state_machine, _DUR_CACHE_ATTR, None)
    if cache is None:
        cache = {}
        object.__setattr__(node.state_machine, _DUR_CACHE_ATTR, cache)
    key = (id(params), node.unroll_u, node.port_width_bits, clock_hz)
    durs = cache.get(key)
    if durs is None:
        durs = [state_duration_cycles(node, w, params, clock_hz)
                for w in node.state_machine.works]
        cache[key] = durs
    return durs


@dataclass(frozen=True)
class IpEstimate:
    energy: float
    latency_cycles: int
    latency_seconds: float

    def __post_init__(self):
        if self.energy < 0 or self.latency_cycles < 0 or self.latency_seconds < 0:
            raise ValidationError("IpEstimate values must be >= 0")


def ip_estimate(node: IpNode, lib: UnitCostLibrary,
                clock_hz: float | None = None) -> IpEstimate:
    """Intra-IP energy and latency of one bound node.

    An empty state machine costs exactly the warm-up overheads.
    """
    if clock_hz is None:
        clock_hz = node.freq_mhz * 1e6
    cache = getattr(node, "_est_cache", None)
    if cache is None:
        cache = {}
        object.__setattr__(node, "_est_cache", cache)
    key = (id(lib), clock_hz)
    est = cache.get(key)
    if est is not None:
        return est
    params = node_params(node, lib)
    cycles = warmup_cycles(params, clock_hz)
    energy = params.e_warmup
    if len(node.state_machine):
        cycles += sum(state_durations(node, params, clock_hz))
        for w in node.state_machine.works:
            energy += state_energy(node, w, params)
    est = IpEstimate(
        energy=energy,
        latency_cycles=cycles,
        latency_seconds=cycles / clock_hz,
    )
    cache[key] = est
    return est


@dataclass(frozen=True)
class ResourceReport:
    mem_bits_by_type: dict[str, int]
    mul_count: int
    mul_decode_count: int

    def __post_init__(self):
        if self.mul_count < 0 or self.mul_decode_count < 0:
            raise ValidationError("resource counts must be >= 0")
        if self.mul_count < self.mul_decode_count:
            raise ValidationError("mul_count must include mul_decode_count")

    @property
    def total_mem_bits(self) -> int:
        return sum(self.mem_bits_by_type.values())


def resource_usage(graph: AccelGraph, lib: UnitCostLibrary) -> ResourceReport:
    """Memory bits grouped by implementation, plus total multiplier count
    (compute unrolling plus address-decode multipliers per memory node)."""
    mem: dict[str, int] = {}
    for n in graph.memory_nodes():
        mem[n.impl] = mem.get(n.impl, 0) + n.attrs.volume_bits
    decode = lib.mul_per_decode * len(graph.memory_nodes())
    muls = sum(n.unroll_u for n in graph.computation_nodes()) + decode
    return ResourceReport(mem_bits_by_type=mem, mul_count=muls, mul_decode_count=decode)


@dataclass(frozen=True)
class PredictionReport:
    energy_total: float
    latency_cycles: int
    latency_seconds: float
    critical_path: tuple[str, ...]
    resources: ResourceReport
    per_ip: dict[str, IpEstimate]
    clock_hz: float

    def to_doc(self) -> dict:
        return {
            "mode": "coarse",
            "energy_total_j": self.energy_total,
            "latency_cycles": self.latency_cycles,
            "latency_seconds": self.latency_seconds,
            "critical_path": list(self.critical_path),
            "clock_hz": self.clock_hz,
            "resources": {
                "mem_bits_by_type": dict(sorted(self.resources.mem_bits_by_type.items())),
                "mul_count": self.resources.mul_count,
                "mul_decode_count": self.resources.mul_decode_count,
            },
            "per_ip": {
                nid: {
                    "energy_j": est.energy,
                    "latency_cycles": est.latency_cycles,
                    "latency_seconds": est.latency_seconds,
                }
                for nid, est in sorted(self.per_ip.items())
            },
        }


def predict_coarse(graph: AccelGraph, lib: UnitCostLibrary) -> PredictionReport:
    """System-level analytical prediction, excluding inter-IP pipeline effects.

    Energy and resources sum over all IPs; latency is the weighted critical
    path through the dependency DAG. Host overheads are added once per
    inference, outside the path maximum.
    """
    ensure_valid(graph, lib)
    clock_hz = graph.clock_hz
    per_ip = {n.id: ip_estimate(n, lib, clock_hz) for n in graph.nodes}
    weights = {nid: float(est.latency_cycles) for nid, est in per_ip.items()}
    path, total_cycles = critical_path(graph, weights)
    energy = sum(est.energy for est in per_ip.values()) + lib.host_energy
    total_cycles = int(round(total_cycles))
    return PredictionReport(
        energy_total=energy,
        latency_cycles=total_cycles,
        latency_seconds=total_cycles / clock_hz + lib.host_latency,
        critical_path=tuple(path),
        resources=resource_usage(graph, lib),
        per_ip=per_ip,
        clock_hz=clock_hz,
    )


def report_to_csv(report: PredictionReport) -> str:
    """Flat tabular export: one row per IP plus a totals row."""
    lines = ["node,energy_j,latency_cycles,latency_seconds"]
    for nid, est in sorted(report.per_ip.items()):
        lines.append(f"{nid},{est.energy!r},{est.latency_cycles},{est.latency_seconds!r}")
    lines.append(
        f"TOTAL,{report.energy_total!r},{report.latency_cycles},{report.latency_seconds!r}"
    )
    return "\n".join(lines) + "\n"
