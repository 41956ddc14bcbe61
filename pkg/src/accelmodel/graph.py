"""One-for-all accelerator description: an attributed directed graph of IP
nodes plus the per-IP state machines that bind a workload onto it.

Nodes are memory, computation, or data-path IPs; directed edges follow the
data-movement direction. Tokens are abstract ids (one state's worth of data),
not byte addresses: a state lists the token ids it needs and the token ids it
produces, and a token has exactly one producer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property

from .costs import (
    KIND_COMPUTATION,
    KIND_DATA_PATH,
    KIND_MEMORY,
    UnitCostLibrary,
)
from .errors import SchemaError, ValidationError

ARCH_VERSION = "1"


class IpKind(str, Enum):
    MEMORY = "Memory"
    COMPUTATION = "Computation"
    DATA_PATH = "DataPath"

    @property
    def cost_kind(self) -> str:
        return {
            IpKind.MEMORY: KIND_MEMORY,
            IpKind.COMPUTATION: KIND_COMPUTATION,
            IpKind.DATA_PATH: KIND_DATA_PATH,
        }[self]


DATA_TYPES = ("weights", "input activations", "partial sums")


@dataclass(frozen=True)
class MemoryAttrs:
    volume_bits: int
    data_types_held: tuple[str, ...] = ()

    def __post_init__(self):
        if self.volume_bits <= 0:
            raise ValidationError(f"memory volume_bits must be > 0, got {self.volume_bits}")
        for dt in self.data_types_held:
            if dt not in DATA_TYPES:
                raise ValidationError(f"unknown data type {dt!r}")


@dataclass(frozen=True)
class ComputeAttrs:
    unroll_u: int
    # None means the engine accepts every layer kind.
    supported_kinds: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.unroll_u < 1:
            raise ValidationError(f"unroll_u must be >= 1, got {self.unroll_u}")


@dataclass(frozen=True)
class DataPathAttrs:
    port_width_bits: int
    # Carried for reporting; not used by any cost formula.
    data_type: str | None = None

    def __post_init__(self):
        if self.port_width_bits < 1:
            raise ValidationError(
                f"port_width_bits must be >= 1, got {self.port_width_bits}"
            )


_ATTRS_FOR_KIND = {
    IpKind.MEMORY: MemoryAttrs,
    IpKind.COMPUTATION: ComputeAttrs,
    IpKind.DATA_PATH: DataPathAttrs,
}


@dataclass(frozen=True)
class IpState:
    """One state of an IP's state machine.

    work is kind-specific: MAC operations for computation IPs, bits moved for
    memory and data-path IPs. layer records which model layer the state
    belongs to (state machines are flattened across layers).
    """

    needed_inputs: frozenset[str]
    produced_outputs: frozenset[str]
    work: int
    layer: str | None = None

    def __post_init__(self):
        if self.work < 0:
            raise ValidationError(f"state work must be >= 0, got {self.work}")


@dataclass(frozen=True)
class StateMachine:
    states: tuple[IpState, ...] = ()

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    @cached_property
    def works(self) -> tuple[int, ...]:
        return tuple(s.work for s in self.states)

    def total_work(self) -> int:
        return sum(self.works)


EMPTY_STM = StateMachine()


@dataclass(frozen=True)
class IpNode:
    id: str
    kind: IpKind
    impl: str
    freq_mhz: float
    precision: int
    attrs: MemoryAttrs | ComputeAttrs | DataPathAttrs
    state_machine: StateMachine = EMPTY_STM

    def __post_init__(self):
        if self.freq_mhz <= 0:
            raise ValidationError(f"node '{self.id}': freq_mhz must be > 0")
        expected = _ATTRS_FOR_KIND[self.kind]
        if not isinstance(self.attrs, expected):
            raise ValidationError(
                f"node '{self.id}': {self.kind.value} requires {expected.__name__}"
            )

    @property
    def port_width_bits(self) -> int:
        """Transfer beat width: data-path attribute, 1 for memory IPs."""
        if isinstance(self.attrs, DataPathAttrs):
            return self.attrs.port_width_bits
        return 1

    @property
    def unroll_u(self) -> int:
        return self.attrs.unroll_u if isinstance(self.attrs, ComputeAttrs) else 1


@dataclass(frozen=True)
class Edge:
    start: str
    end: str

    def __post_init__(self):
        if self.start == self.end:
            raise ValidationError(f"self-edge on node '{self.start}'")


@dataclass(frozen=True)
class AccelGraph:
    nodes: tuple[IpNode, ...]
    edges: tuple[Edge, ...]
    primary_input_tokens: frozenset[str] = frozenset()
    final_output_tokens: frozenset[str] = frozenset()

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        dupes = {i for i in ids if ids.count(i) > 1}
        if dupes:
            raise ValidationError(f"duplicate node ids {sorted(dupes)}")
        known = set(ids)
        for e in self.edges:
            for endpoint in (e.start, e.end):
                if endpoint not in known:
                    raise ValidationError(f"dangling endpoint '{endpoint}'")

    # -- structure ---------------------------------------------------------

    @cached_property
    def by_id(self) -> dict[str, IpNode]:
        return {n.id: n for n in self.nodes}

    def node(self, nid: str) -> IpNode:
        return self.by_id[nid]

    @cached_property
    def _adjacency(self) -> tuple[dict[str, list[str]], dict[str, list[str]]]:
        preds: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        succs: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        for e in self.edges:
            preds[e.end].append(e.start)
            succs[e.start].append(e.end)
        for v in preds.values():
            v.sort()
        for v in succs.values():
            v.sort()
        return preds, succs

    def preds(self, nid: str) -> list[str]:
        return self._adjacency[0][nid]

    def succs(self, nid: str) -> list[str]:
        return self._adjacency[1][nid]

    def computation_nodes(self) -> list[IpNode]:
        return [n for n in self.nodes if n.kind is IpKind.COMPUTATION]

    def memory_nodes(self) -> list[IpNode]:
        return [n for n in self.nodes if n.kind is IpKind.MEMORY]

    @property
    def is_bound(self) -> bool:
        return any(len(n.state_machine) > 0 for n in self.nodes)

    @property
    def clock_hz(self) -> float:
        """Global clock domain used for cycle accounting (fastest IP clock)."""
        return max(n.freq_mhz for n in self.nodes) * 1e6

    def with_nodes(self, replacements: dict[str, IpNode], **kwargs) -> "AccelGraph":
        """Copy with some nodes replaced (graphs are immutable)."""
        nodes = tuple(replacements.get(n.id, n) for n in self.nodes)
        fields = {
            "primary_input_tokens": self.primary_input_tokens,
            "final_output_tokens": self.final_output_tokens,
        }
        fields.update(kwargs)
        return AccelGraph(nodes=nodes, edges=self.edges, **fields)

    # -- token bookkeeping -------------------------------------------------

    @cached_property
    def token_producers(self) -> dict[str, tuple[str, int]]:
        """token id -> (node id, state index). Duplicate producers are reported
        by validate_graph; here the first producer wins."""
        out: dict[str, tuple[str, int]] = {}
        for n in self.nodes:
            for i, s in enumerate(n.state_machine):
                for tok in s.produced_outputs:
                    out.setdefault(tok, (n.id, i))
        return out

    @cached_property
    def dependency_edges(self) -> tuple[tuple[str, str], ...]:
        """IP-level dependency edges derived from token flow.

        For bound graphs: producer -> consumer wherever a token crosses IPs.
        For unbound graphs the physical edges stand in for dependencies.
        """
        if not self.is_bound:
            return tuple(sorted({(e.start, e.end) for e in self.edges}))
        deps: set[tuple[str, str]] = set()
        producers = self.token_producers
        for n in self.nodes:
            for s in n.state_machine:
                for tok in s.needed_inputs:
                    prod = producers.get(tok)
                    if prod is not None and prod[0] != n.id:
                        deps.add((prod[0], n.id))
        return tuple(sorted(deps))

    def dependency_topo_order(self) -> list[str]:
        """Topological order of nodes over dependency edges (id tie-break).

        Raises ValidationError when the dependency structure is cyclic.
        """
        preds: dict[str, set[str]] = {n.id: set() for n in self.nodes}
        succs: dict[str, set[str]] = {n.id: set() for n in self.nodes}
        for a, b in self.dependency_edges:
            preds[b].add(a)
            succs[a].add(b)
        import heapq

        heap = sorted(nid for nid, p in preds.items() if not p)
        order: list[str] = []
        remaining = {nid: set(p) for nid, p in preds.items()}
        while heap:
            nid = heapq.heappop(heap)
            order.append(nid)
            for nxt in sorted(succs[nid]):
                remaining[nxt].discard(nid)
                if not remaining[nxt]:
                    heapq.heappush(heap, nxt)
        if len(order) != len(self.nodes):
            leftover = sorted(set(preds) - set(order))
            raise ValidationError(f"cycle detected in dependency structure: {leftover}")
        return order


# --------------------------------------------------------------------------
# Validation


def validate_graph(graph: AccelGraph, lib: UnitCostLibrary | None = None) -> list[str]:
    """Check all graph and state-machine invariants.

    Returns a list of human-readable diagnostics; empty iff the graph is
    valid. Passing a cost library additionally checks impl resolvability.
    """
    diags: list[str] = []
    ids = {n.id for n in graph.nodes}

    if lib is not None:
        for n in graph.nodes:
            if not lib.has_impl(n.impl):
                diags.append(f"node '{n.id}': unresolvable impl key '{n.impl}'")

    # Weak connectivity.
    if len(graph.nodes) > 1:
        seen = set()
        frontier = [graph.nodes[0].id]
        neighbors: dict[str, set[str]] = {i: set() for i in ids}
        for e in graph.edges:
            neighbors[e.start].add(e.end)
            neighbors[e.end].add(e.start)
        while frontier:
            nid = frontier.pop()
            if nid in seen:
                continue
            seen.add(nid)
            frontier.extend(neighbors[nid] - seen)
        if seen != ids:
            diags.append(f"graph not connected: unreachable nodes {sorted(ids - seen)}")

    for n in graph.computation_nodes():
        if not graph.preds(n.id):
            diags.append(f"computation node '{n.id}' has no incoming edge")
        if not graph.succs(n.id):
            diags.append(f"computation node '{n.id}' has no outgoing edge")

    # Token invariants (bound graphs only).
    producers: dict[str, list[tuple[str, int]]] = {}
    for n in graph.nodes:
        for i, s in enumerate(n.state_machine):
            for tok in s.produced_outputs:
                producers.setdefault(tok, []).append((n.id, i))
    for tok, plist in sorted(producers.items()):
        if len(plist) > 1:
            diags.append(f"duplicate producer for token '{tok}': {sorted(plist)}")
    produced = set(producers)

    for n in graph.nodes:
        allowed_sources = set(graph.preds(n.id))
        is_sink = not graph.succs(n.id)
        for i, s in enumerate(n.state_machine):
            if not s.produced_outputs and not is_sink:
                diags.append(f"node '{n.id}' state {i}: no produced outputs on non-sink node")
            for tok in sorted(s.needed_inputs):
                if tok in graph.primary_input_tokens:
                    continue
                if tok not in produced:
                    diags.append(f"orphan token '{tok}' needed by '{n.id}' state {i}")
                else:
                    src = graph.token_producers[tok][0]
                    if src not in allowed_sources:
                        diags.append(
                            f"node '{n.id}' state {i} needs token '{tok}' from "
                            f"non-predecessor '{src}'"
                        )

    for tok in sorted(graph.final_output_tokens):
        if tok not in produced:
            diags.append(f"final output token '{tok}' is never produced")

    # Per-round dependency structure must be acyclic.
    try:
        graph.dependency_topo_order()
    except ValidationError as exc:
        diags.append(str(exc))
        return diags

    # Reachability: every final output token must be derivable from the
    # primary inputs through the produced-by/needed-by relations.
    if graph.final_output_tokens:
        available = set(graph.primary_input_tokens)
        pending = {
            (n.id, i): s
            for n in graph.nodes
            for i, s in enumerate(n.state_machine)
        }
        progressed = True
        while progressed:
            progressed = False
            for key in sorted(pending):
                s = pending[key]
                if s.needed_inputs <= available:
                    available |= s.produced_outputs
                    del pending[key]
                    progressed = True
        unreachable = graph.final_output_tokens - available
        if unreachable:
            diags.append(
                f"final output tokens unreachable from primary inputs: {sorted(unreachable)}"
            )
    return diags


# --------------------------------------------------------------------------
# Critical paths


def critical_paths(graph: AccelGraph) -> list[list[str]]:
    """Enumerate all maximal source-to-sink paths over the dependency DAG.

    Exhaustive DFS; intended for small graphs and as the oracle against which
    the weighted longest-path computation is checked.
    """
    order = graph.dependency_topo_order()  # raises on cycles
    succs: dict[str, list[str]] = {nid: [] for nid in order}
    preds_count: dict[str, int] = {nid: 0 for nid in order}
    for a, b in graph.dependency_edges:
        succs[a].append(b)
        preds_count[b] += 1
    sources = [nid for nid in order if preds_count[nid] == 0]

    paths: list[list[str]] = []

    def walk(nid: str, acc: list[str]):
        acc.append(nid)
        nxt = sorted(succs[nid])
        if not nxt:
            paths.append(list(acc))
        else:
            for s in nxt:
                walk(s, acc)
        acc.pop()

    for src in sorted(sources):
        walk(src, [])
    return paths


def critical_path(graph: AccelGraph, weights: dict[str, float]) -> tuple[list[str], float]:
    """Longest source-to-sink path weighted by per-node latency.

    Deterministic: ties are broken toward the lexicographically smallest
    path. Raises ValidationError on a cyclic dependency structure.
    """
    order = graph.dependency_topo_order()
    succs: dict[str, list[str]] = {nid: [] for nid in order}
    for a, b in graph.dependency_edges:
        succs[a].append(b)

    best: dict[str, tuple[float, tuple[str, ...]]] = {}
    for nid in reversed(order):
        w = weights.get(nid, 0.0)
        candidates = [best[s] for s in succs[nid]]
        if not candidates:
            best[nid] = (w, (nid,))
        else:
            # Max by weight; among equals prefer the smallest suffix path.
            top_w = max(c[0] for c in candidates)
            tail = min(c[1] for c in candidates if c[0] == top_w)
            best[nid] = (w + top_w, (nid,) + tail)
    if not best:
        return [], 0.0
    # Only source nodes start maximal paths.
    incoming = {b for _, b in graph.dependency_edges}
    sources = [nid for nid in order if nid not in incoming]
    src_best = [(best[s][0], best[s][1]) for s in sources]
    total = max(v[0] for v in src_best)
    path = min(p for v, p in src_best if v == total)
    return list(path), total


# --------------------------------------------------------------------------
# Architecture description (file-facing)


@dataclass(frozen=True)
class NodeDesc:
    id: str
    kind: IpKind
    impl: str
    freq_mhz: float
    precision: int
    attrs: dict


@dataclass(frozen=True)
class ArchDescription:
    """Structured architecture description accepted by build_graph.

    May optionally carry state machines plus token sets, in which case
    build_graph returns an already-bound graph (used for golden fixtures and
    for feeding the simulator without a model).
    """

    name: str
    nodes: tuple[NodeDesc, ...]
    edges: tuple[tuple[str, str], ...]
    state_machines: dict[str, StateMachine] | None = None
    primary_inputs: frozenset[str] = frozenset()
    final_outputs: frozenset[str] = frozenset()


def _attrs_from_desc(kind: IpKind, attrs: dict, ctx: str):
    try:
        if kind is IpKind.MEMORY:
            return MemoryAttrs(
                volume_bits=int(attrs["volume_bits"]),
                data_types_held=tuple(attrs.get("data_types_held", ())),
            )
        if kind is IpKind.COMPUTATION:
            sk = attrs.get("supported_kinds")
            return ComputeAttrs(
                unroll_u=int(attrs["unroll_u"]),
                supported_kinds=tuple(sk) if sk is not None else None,
            )
        return DataPathAttrs(
            port_width_bits=int(attrs["port_width_bits"]),
            data_type=attrs.get("data_type"),
        )
    except KeyError as exc:
        raise SchemaError(f"{ctx}: missing attribute {exc}") from None


def build_graph(arch: ArchDescription, lib: UnitCostLibrary) -> AccelGraph:
    """Construct the (possibly bound) graph from an architecture description.

    Errors on duplicate node ids, dangling edge endpoints, and impl keys the
    cost library cannot resolve.
    """
    nodes = []
    seen: set[str] = set()
    for nd in arch.nodes:
        if nd.id in seen:
            raise ValidationError(f"duplicate node id '{nd.id}'")
        seen.add(nd.id)
        if not lib.has_impl(nd.impl):
            raise ValidationError(f"node '{nd.id}': unresolvable impl key '{nd.impl}'")
        stm = EMPTY_STM
        if arch.state_machines is not None:
            stm = arch.state_machines.get(nd.id, EMPTY_STM)
        nodes.append(
            IpNode(
                id=nd.id,
                kind=nd.kind,
                impl=nd.impl,
                freq_mhz=nd.freq_mhz,
                precision=nd.precision,
                attrs=nd.attrs if not isinstance(nd.attrs, dict)
                else _attrs_from_desc(nd.kind, nd.attrs, f"node '{nd.id}'"),
                state_machine=stm,
            )
        )
    for s, e in arch.edges:
        for endpoint in (s, e):
            if endpoint not in seen:
                raise ValidationError(f"dangling endpoint '{endpoint}'")
    return AccelGraph(
        nodes=tuple(nodes),
        edges=tuple(Edge(s, e) for s, e in arch.edges),
        primary_input_tokens=frozenset(arch.primary_inputs),
        final_output_tokens=frozenset(arch.final_outputs),
    )


def _attrs_to_doc(attrs) -> dict:
    if isinstance(attrs, MemoryAttrs):
        return {"volume_bits": attrs.volume_bits,
                "data_types_held": list(attrs.data_types_held)}
    if isinstance(attrs, ComputeAttrs):
        doc = {"unroll_u": attrs.unroll_u}
        if attrs.supported_kinds is not None:
            doc["supported_kinds"] = list(attrs.supported_kinds)
        return doc
    doc = {"port_width_bits": attrs.port_width_bits}
    if attrs.data_type is not None:
        doc["data_type"] = attrs.data_type
    return doc


def parse_arch(document: str) -> ArchDescription:
    """Parse the architecture-description file format."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"architecture document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("architecture document must be a JSON object")
    if "version" not in doc:
        raise SchemaError("architecture: missing required field 'version'")
    if str(doc["version"]) != ARCH_VERSION:
        raise SchemaError(f"architecture: unsupported version {doc['version']!r}")
    allowed = {"version", "name", "nodes", "edges", "state_machines",
               "primary_inputs", "final_outputs"}
    unknown = set(doc) - allowed
    if unknown:
        raise SchemaError(f"architecture: unknown fields {sorted(unknown)}")
    nodes = []
    for i, nd in enumerate(doc.get("nodes", [])):
        ctx = f"architecture nodes[{i}]"
        for f in ("id", "kind", "impl", "freq_mhz", "precision", "attrs"):
            if f not in nd:
                raise SchemaError(f"{ctx}: missing required field '{f}'")
        try:
            kind = IpKind(nd["kind"])
        except ValueError:
            raise SchemaError(f"{ctx}: unknown node kind {nd['kind']!r}") from None
        nodes.append(
            NodeDesc(
                id=str(nd["id"]),
                kind=kind,
                impl=str(nd["impl"]),
                freq_mhz=float(nd["freq_mhz"]),
                precision=int(nd["precision"]),
                attrs=dict(nd["attrs"]),
            )
        )
    edges = []
    for i, ed in enumerate(doc.get("edges", [])):
        ctx = f"architecture edges[{i}]"
        for f in ("start", "end"):
            if f not in ed:
                raise SchemaError(f"{ctx}: missing required field '{f}'")
        edges.append((str(ed["start"]), str(ed["end"])))

    stms = None
    if "state_machines" in doc:
        stms = {}
        for nid, states in doc["state_machines"].items():
            stm_states = []
            for j, sd in enumerate(states):
                ctx = f"state_machines['{nid}'][{j}]"
                unknown = set(sd) - {"needs", "produces", "work", "layer"}
                if unknown:
                    raise SchemaError(f"{ctx}: unknown fields {sorted(unknown)}")
                stm_states.append(
                    IpState(
                        needed_inputs=frozenset(sd.get("needs", [])),
                        produced_outputs=frozenset(sd.get("produces", [])),
                        work=int(sd.get("work", 0)),
                        layer=sd.get("layer"),
                    )
                )
            stms[str(nid)] = StateMachine(tuple(stm_states))
    return ArchDescription(
        name=str(doc.get("name", "")),
        nodes=tuple(nodes),
        edges=tuple(edges),
        state_machines=stms,
        primary_inputs=frozenset(doc.get("primary_inputs", [])),
        final_outputs=frozenset(doc.get("final_outputs", [])),
    )


def serialize_arch(arch: ArchDescription) -> str:
    doc = {
        "version": ARCH_VERSION,
        "name": arch.name,
        "nodes": [
            {
                "id": nd.id,
                "kind": nd.kind.value,
                "impl": nd.impl,
                "freq_mhz": nd.freq_mhz,
                "precision": nd.precision,
                "attrs": nd.attrs if isinstance(nd.attrs, dict) else _attrs_to_doc(nd.attrs),
            }
            for nd in arch.nodes
        ],
        "edges": [{"start": s, "end": e} for s, e in arch.edges],
    }
    if arch.state_machines is not None:
        doc["state_machines"] = {
            nid: [
                {
                    "needs": sorted(s.needed_inputs),
                    "produces": sorted(s.produced_outputs),
                    "work": s.work,
                    **({"layer": s.layer} if s.layer is not None else {}),
                }
                for s in stm
            ]
            for nid, stm in sorted(arch.state_machines.items())
        }
        doc["primary_inputs"] = sorted(arch.primary_inputs)
        doc["final_outputs"] = sorted(arch.final_outputs)
    return json.dumps(doc, indent=2) + "\n"


def graph_to_arch(graph: AccelGraph, name: str = "") -> ArchDescription:
    """Round-trip helper: re-describe a (possibly bound) graph as a document."""
    return ArchDescription(
        name=name,
        nodes=tuple(
            NodeDesc(n.id, n.kind, n.impl, n.freq_mhz, n.precision, _attrs_to_doc(n.attrs))
            for n in graph.nodes
        ),
        edges=tuple((e.start, e.end) for e in graph.edges),
        state_machines={n.id: n.state_machine for n in graph.nodes}
        if graph.is_bound else None,
        primary_inputs=graph.primary_input_tokens,
        final_outputs=graph.final_output_tokens,
    )


def export_dot(graph: AccelGraph) -> str:
    """Render the node/edge structure in Graphviz DOT form for documentation."""
    shape = {IpKind.MEMORY: "box", IpKind.COMPUTATION: "ellipse", IpKind.DATA_PATH: "diamond"}
    lines = ["digraph accel {"]
    for n in graph.nodes:
        label = f"{n.id}\\n{n.kind.value} ({n.impl})"
        lines.append(f'  "{n.id}" [shape={shape[n.kind]}, label="{label}"];')
    for e in graph.edges:
        lines.append(f'  "{e.start}" -> "{e.end}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
