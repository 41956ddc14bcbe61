"""Cycle-level run-time simulation of a bound accelerator graph.

Every IP steps through its state machine: an idle IP becomes busy when all
needed input tokens of its next state were produced in strictly earlier
cycles (no zero-delay same-cycle forwarding); a busy IP releases all its
state's output tokens atomically when the state's duration elapses and then
returns to idle, accruing that state's energy.

All IPs are evaluated each cycle in a fixed dependency-topological order;
because token visibility is delayed by one cycle the results are independent
of that order, making the simulation fully deterministic. Idle cycles count
every cycle an IP is not busy, so the bottleneck (minimum idle cycles) is
the stage occupied for the largest share of the run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .coarse import (
    ensure_valid,
    node_params,
    state_durations,
    state_energy,
    warmup_cycles,
)
from .costs import UnitCostLibrary
from .errors import CycleLimitError, DeadlockError, ValidationError
from .graph import AccelGraph

DEFAULT_MAX_CYCLES = 10_000_000


@dataclass(frozen=True)
class SimLimits:
    max_cycles: int = DEFAULT_MAX_CYCLES
    trace_enabled: bool = False

    def __post_init__(self):
        if self.max_cycles < 1:
            raise ValidationError("max_cycles must be >= 1")


@dataclass(frozen=True)
class TraceRecord:
    cycle: int
    node: str
    from_state: str
    to_state: str


@dataclass(frozen=True)
class SimResult:
    total_cycles: int
    latency_seconds: float
    energy: float
    per_ip_idle_cycles: dict[str, int]
    per_ip_busy_cycles: dict[str, int]
    bottleneck: str
    clock_hz: float
    trace: tuple[TraceRecord, ...] | None = None

    def to_doc(self) -> dict:
        return {
            "mode": "fine",
            "total_cycles": self.total_cycles,
            "latency_seconds": self.latency_seconds,
            "energy_j": self.energy,
            "clock_hz": self.clock_hz,
            "bottleneck": self.bottleneck,
            "per_ip": {
                nid: {
                    "busy_cycles": self.per_ip_busy_cycles[nid],
                    "idle_cycles": self.per_ip_idle_cycles[nid],
                }
                for nid in sorted(self.per_ip_busy_cycles)
            },
        }


def simulate(graph: AccelGraph, lib: UnitCostLibrary,
             limits: SimLimits = SimLimits()) -> SimResult:
    """Run the cycle-synchronous simulation until every state machine has
    completed (which covers all inference outputs being stored back).

    Raises DeadlockError when no IP can make progress with work remaining,
    and CycleLimitError past limits.max_cycles.
    """
    ensure_valid(graph, lib)

    clock_hz = graph.clock_hz
    order = graph.dependency_topo_order()
    nodes = [graph.node(nid) for nid in order]

    durations: dict[str, list[int]] = {}
    energies: dict[str, list[float]] = {}
    warm: dict[str, int] = {}
    energy = lib.host_energy
    for n in nodes:
        params = node_params(n, lib)
        durations[n.id] = state_durations(n, params, clock_hz)
        energies[n.id] = [state_energy(n, w, params) for w in n.state_machine.works]
        warm[n.id] = warmup_cycles(params, clock_hz)
        energy += params.e_warmup  # warm-up happens once per inference per IP

    next_state = {n.id: 0 for n in nodes}
    remaining = {n.id: 0 for n in nodes}  # 0 means idle
    busy_cycles = {n.id: 0 for n in nodes}
    n_states = {n.id: len(n.state_machine) for n in nodes}
    needs = {n.id: [s.needed_inputs for s in n.state_machine] for n in nodes}
    produces = {n.id: [s.produced_outputs for s in n.state_machine] for n in nodes}

    available: set[str] = set(graph.primary_input_tokens)
    trace: list[TraceRecord] = [] if limits.trace_enabled else None

    cycle = 0
    unfinished = {n.id for n in nodes if n_states[n.id] > 0}
    while unfinished:
        if cycle >= limits.max_cycles:
            raise CycleLimitError(
                f"simulation exceeded max_cycles={limits.max_cycles}"
            )
        newly: set[str] = set()
        progressed = False
        for n in nodes:
            nid = n.id
            if nid not in unfinished:
                continue
            k = next_state[nid]
            if remaining[nid] == 0:
                # Idle: start the next state if its inputs are ready.
                if needs[nid][k] <= available:
                    dur = durations[nid][k]
                    if k == 0:
                        dur += warm[nid]
                    remaining[nid] = dur
                    if trace is not None:
                        trace.append(TraceRecord(cycle, nid, "idle", f"s{k}"))
                # else: stays idle this cycle (counted as idle at the end).
            if remaining[nid] > 0:
                remaining[nid] -= 1
                busy_cycles[nid] += 1
                progressed = True
                if remaining[nid] == 0:
                    # Outputs become visible to consumers next cycle.
                    newly |= produces[nid][k]
                    energy += energies[nid][k]
                    if trace is not None:
                        trace.append(TraceRecord(cycle, nid, f"s{k}", "idle"))
                    next_state[nid] = k + 1
                    if next_state[nid] >= n_states[nid]:
                        unfinished.discard(nid)
        if not progressed:
            starved = set()
            for nid in unfinished:
                starved |= needs[nid][next_state[nid]] - available
            raise DeadlockError(cycle, starved)
        available |= newly
        cycle += 1
        if not newly and unfinished:
            # No tokens appeared, so no idle IP can start before the next
            # completion: fast-forward to one cycle short of it. This is an
            # exact shortcut, not an approximation; skipped cycles hold no
            # transitions (and therefore no trace records).
            skip = min(remaining[nid] for nid in unfinished
                       if remaining[nid] > 0) - 1
            skip = min(skip, limits.max_cycles - cycle)
            if skip > 0:
                for nid in unfinished:
                    if remaining[nid] > 0:
                        remaining[nid] -= skip
                        busy_cycles[nid] += skip
                cycle += skip

    missing = graph.final_output_tokens - available
    if missing:
        raise ValidationError(f"final output tokens never produced: {sorted(missing)}")

    idle = {nid: cycle - busy_cycles[nid] for nid in busy_cycles}
    return SimResult(
        total_cycles=cycle,
        latency_seconds=cycle / clock_hz + lib.host_latency,
        energy=energy,
        per_ip_idle_cycles=idle,
        per_ip_busy_cycles=busy_cycles,
        bottleneck=bottleneck_of(idle) if idle else "",
        clock_hz=clock_hz,
        trace=tuple(trace) if trace is not None else None,
    )


def bottleneck_of(idle_cycles: dict[str, int]) -> str:
    """The IP with minimum idle cycles; ties break toward the smallest id."""
    return min(sorted(idle_cycles), key=lambda nid: idle_cycles[nid])


def bottleneck(sim: SimResult) -> str:
    return bottleneck_of(sim.per_ip_idle_cycles)


def export_trace(sim: SimResult) -> str:
    """Line-oriented trace export: cycle,node,from_state,to_state."""
    if sim.trace is None:
        raise ValidationError("trace was not enabled for this simulation")
    lines = ["cycle,node,from_state,to_state"]
    for rec in sim.trace:
        lines.append(f"{rec.cycle},{rec.node},{rec.from_state},{rec.to_state}")
    return "\n".join(lines) + "\n"


def replay_trace(trace_text: str) -> tuple[dict[str, int], int]:
    """Recompute per-node busy totals and the cycle count from a trace.

    Used to check trace/result consistency: a node is busy from its idle->s
    record through its s->idle record, inclusive.
    """
    busy: dict[str, int] = {}
    starts: dict[str, int] = {}
    last_cycle = -1
    for line in trace_text.strip().splitlines()[1:]:
        cyc_s, node, frm, to = line.split(",")
        cyc = int(cyc_s)
        last_cycle = max(last_cycle, cyc)
        if frm == "idle":
            starts[node] = cyc
        elif to == "idle":
            busy[node] = busy.get(node, 0) + (cyc - starts.pop(node) + 1)
    return busy, last_cycle + 1
