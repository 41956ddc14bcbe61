"""Binding of a DNN workload onto an accelerator graph.

The binder walks the physical graph in topological order once per (layer,
tile) and gives every node one state per tile: upstream memory/data-path
nodes carry the tile's input and weight bits, computation nodes share the
tile's MACs, and downstream nodes carry the tile's output bits. Tokens chain
along the physical edges, so consumers only ever need tokens from direct
predecessors or the graph's primary inputs.

Tiling splits a layer along its output channels; the last tile carries the
remainder, so total MAC work is conserved exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .dnn import DnnModel, LayerKind, LayerSpec, layer_workload
from .errors import ValidationError
from .graph import (
    AccelGraph,
    ComputeAttrs,
    IpKind,
    IpNode,
    IpState,
    StateMachine,
)


@dataclass(frozen=True)
class DataSchedule:
    """How the model's loop nest is tiled onto the accelerator.

    tiles maps a layer id to its tile count along output channels; layers not
    listed use default_tiles. Tile counts are clamped to the layer's output
    channel count.
    """

    tiles: dict[str, int] = field(default_factory=dict)
    default_tiles: int = 1

    def __post_init__(self):
        if self.default_tiles < 1:
            raise ValidationError("default_tiles must be >= 1")
        for lid, t in self.tiles.items():
            if t < 1:
                raise ValidationError(f"tile count for layer '{lid}' must be >= 1")

    def tiles_for(self, layer: LayerSpec) -> int:
        t = self.tiles.get(layer.id, self.default_tiles)
        return min(t, layer.output_shape.channels)

    def key(self) -> tuple:
        return (self.default_tiles, tuple(sorted(self.tiles.items())))


def _split(total: int, parts: int) -> list[int]:
    """Split an integer quantity into parts; the last part takes the remainder."""
    base = total // parts
    chunks = [base] * parts
    chunks[-1] += total - base * parts
    return chunks


def node_supports(node: IpNode, kind: LayerKind) -> bool:
    if not isinstance(node.attrs, ComputeAttrs):
        return False
    sk = node.attrs.supported_kinds
    return sk is None or kind.value in sk


def bind_mapping(graph: AccelGraph, model: DnnModel,
                 schedule: DataSchedule | None = None) -> AccelGraph:
    """Populate every node's state machine for the given model and schedule.

    Returns a new bound graph; the input graph is untouched. An empty model
    yields the unchanged (empty-state-machine) graph.
    """
    if schedule is None:
        schedule = DataSchedule()
    if not model.layers:
        return graph

    # The physical structure must be acyclic for one execution round.
    topo = _physical_topo(graph)

    comp_nodes = [nid for nid in topo if graph.node(nid).kind is IpKind.COMPUTATION]
    for layer in model.layers:
        if layer.mac_count() > 0 and not any(
            node_supports(graph.node(nid), layer.kind) for nid in comp_nodes
        ):
            raise ValidationError(
                f"unsupported layer kind {layer.kind.value} for this graph "
                f"(layer '{layer.id}')"
            )

    upstream = _reaches_computation(graph)

    states: dict[str, list[IpState]] = {n.id: [] for n in graph.nodes}
    primary: set[str] = set()
    final: set[str] = set()
    sinks = {nid for nid in topo if not graph.succs(nid)}

    for layer in model.layers:
        wl = layer_workload(layer, model.precision)
        n_tiles = schedule.tiles_for(layer)
        mac_chunks = _split(wl.mac_count, n_tiles)
        weight_chunks = _split(wl.weight_volume, n_tiles)
        out_chunks = _split(wl.output_volume, n_tiles)
        for t in range(n_tiles):
            # Bits staged through the input side of the graph: the tile's
            # slice of the weights plus the full input feature map (tiling is
            # along output channels, so inputs are re-read per tile).
            in_bits = wl.input_volume + weight_chunks[t]
            out_bits = out_chunks[t]
            supporters = [nid for nid in comp_nodes
                          if node_supports(graph.node(nid), layer.kind)]
            comp_chunks = dict(zip(supporters, _split(mac_chunks[t], len(supporters)))) \
                if supporters else {}
            for nid in topo:
                node = graph.node(nid)
                token = f"{layer.id}.t{t}.{nid}"
                preds = graph.preds(nid)
                if preds:
                    needed = frozenset(f"{layer.id}.t{t}.{p}" for p in preds)
                else:
                    src = f"in.{layer.id}.t{t}"
                    primary.add(src)
                    needed = frozenset({src})
                if node.kind is IpKind.COMPUTATION:
                    work = comp_chunks.get(nid, 0)
                else:
                    work = in_bits if upstream[nid] else out_bits
                    if node.kind is IpKind.MEMORY and work > node.attrs.volume_bits:
                        raise ValidationError(
                            f"tile of layer '{layer.id}' needs {work} bits, "
                            f"exceeding memory '{nid}' volume "
                            f"{node.attrs.volume_bits}"
                        )
                states[nid].append(
                    IpState(
                        needed_inputs=needed,
                        produced_outputs=frozenset({token}),
                        work=work,
                        layer=layer.id,
                    )
                )
                if nid in sinks:
                    final.add(token)

    replacements = {
        nid: _with_stm(graph.node(nid), StateMachine(tuple(sts)))
        for nid, sts in states.items()
    }
    return graph.with_nodes(
        replacements,
        primary_input_tokens=frozenset(primary),
        final_output_tokens=frozenset(final),
    )


def _with_stm(node: IpNode, stm: StateMachine) -> IpNode:
    return IpNode(
        id=node.id,
        kind=node.kind,
        impl=node.impl,
        freq_mhz=node.freq_mhz,
        precision=node.precision,
        attrs=node.attrs,
        state_machine=stm,
    )


def _physical_topo(graph: AccelGraph) -> list[str]:
    """Topological order over the physical edges (deterministic id tie-break)."""
    import heapq

    preds = {n.id: set(graph.preds(n.id)) for n in graph.nodes}
    heap = sorted(nid for nid, p in preds.items() if not p)
    order: list[str] = []
    while heap:
        nid = heapq.heappop(heap)
        order.append(nid)
        for nxt in graph.succs(nid):
            preds[nxt].discard(nid)
            if not preds[nxt]:
                heapq.heappush(heap, nxt)
    if len(order) != len(graph.nodes):
        raise ValidationError(
            "physical graph has a cycle; binding requires an acyclic structure"
        )
    return order


def _reaches_computation(graph: AccelGraph) -> dict[str, bool]:
    """True for nodes with a path to some computation node (the input side)."""
    out = {}
    memo: dict[str, bool] = {}

    def visit(nid: str) -> bool:
        if nid in memo:
            return memo[nid]
        memo[nid] = False  # cycle guard; graph is a DAG here anyway
        hit = any(
            graph.node(s).kind is IpKind.COMPUTATION or visit(s)
            for s in graph.succs(nid)
        )
        memo[nid] = hit
        return hit

    for n in graph.nodes:
        out[n.id] = visit(n.id)
    return out
