"""Hardware template pool: four parameterized architecture families that
instantiate into architecture descriptions accepted by build_graph.

Node/edge counts are closed-form functions of the parameters, e.g. an n x n
systolic array yields n^2 compute nodes plus 2n injection data paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from itertools import product

from .dnn import LayerKind
from .errors import ValidationError
from .graph import ArchDescription, IpKind, NodeDesc


class TemplateKind(str, Enum):
    ADDER_TREE_SPATIAL = "AdderTreeSpatial"
    HETERO_DW_CONV = "HeteroDwConv"
    SYSTOLIC_ARRAY = "SystolicArray"
    ROW_STATIONARY_NOC = "RowStationaryNoC"


# Layer kinds each template family can execute. The heterogeneous template
# is the only one with a dedicated depth-wise engine.
_GENERIC_KINDS = (
    LayerKind.CONV.value,
    LayerKind.FULLY_CONNECTED.value,
    LayerKind.POOL.value,
    LayerKind.RELU.value,
    LayerKind.ADD.value,
    LayerKind.CONCAT.value,
    LayerKind.REORG.value,
)
_DW_KINDS = (LayerKind.DW_CONV.value, LayerKind.POOL.value, LayerKind.RELU.value)

SUPPORTED_LAYER_KINDS = {
    TemplateKind.ADDER_TREE_SPATIAL: set(_GENERIC_KINDS),
    TemplateKind.HETERO_DW_CONV: set(_GENERIC_KINDS) | set(_DW_KINDS),
    TemplateKind.SYSTOLIC_ARRAY: set(_GENERIC_KINDS),
    TemplateKind.ROW_STATIONARY_NOC: set(_GENERIC_KINDS),
}


@dataclass(frozen=True)
class ArchTemplate:
    """A template family plus finite parameter ranges to enumerate."""

    kind: TemplateKind
    param_grid: dict[str, tuple]

    def __post_init__(self):
        if not self.param_grid:
            raise ValidationError(f"template {self.kind.value}: empty parameter grid")
        for name, values in self.param_grid.items():
            if len(values) == 0:
                raise ValidationError(
                    f"template {self.kind.value}: empty range for '{name}'"
                )

    def assignments(self) -> list[dict]:
        names = sorted(self.param_grid)
        out = []
        for combo in product(*(self.param_grid[n] for n in names)):
            out.append(dict(zip(names, combo)))
        return out

    def grid_size(self) -> int:
        size = 1
        for values in self.param_grid.values():
            size *= len(values)
        return size


_DEFAULTS = {
    "freq_mhz": 200.0,
    "precision": 16,
    "mem_bits": 2 ** 21,
    "port_width": 64,
    "unroll": 16,
    "dims": 4,
}


def _param(params: dict, name: str, lo=None, hi=None):
    v = params.get(name, _DEFAULTS[name])
    if lo is not None and v < lo:
        raise ValidationError(f"parameter '{name}' = {v} out of range (min {lo})")
    if hi is not None and v > hi:
        raise ValidationError(f"parameter '{name}' = {v} out of range (max {hi})")
    return v


def _mem(nid, impl, freq, prec, bits, held=()):
    return NodeDesc(nid, IpKind.MEMORY, impl, freq, prec,
                    {"volume_bits": int(bits), "data_types_held": list(held)})


def _dp(nid, impl, freq, prec, width):
    return NodeDesc(nid, IpKind.DATA_PATH, impl, freq, prec,
                    {"port_width_bits": int(width)})


def _comp(nid, impl, freq, prec, unroll, kinds):
    return NodeDesc(nid, IpKind.COMPUTATION, impl, freq, prec,
                    {"unroll_u": int(unroll), "supported_kinds": sorted(kinds)})


def instantiate_template(kind: TemplateKind, params: dict) -> ArchDescription:
    """Build the architecture description for one concrete parameter assignment.

    Raises ValidationError for out-of-range parameters.
    """
    freq = float(_param(params, "freq_mhz", lo=1.0))
    prec = int(_param(params, "precision", lo=1, hi=64))
    mem_bits = int(_param(params, "mem_bits", lo=1))
    width = int(_param(params, "port_width", lo=1))

    if kind is TemplateKind.ADDER_TREE_SPATIAL:
        unroll = int(_param(params, "unroll", lo=1))
        nodes = (
            _mem("mem_in", "dram_offchip", freq, prec, mem_bits,
                 ("weights", "input activations")),
            _dp("dp_in", "axi_bus", freq, prec, width),
            _comp("pe_tree", "adder_tree_mac", freq, prec, unroll, _GENERIC_KINDS),
            _dp("dp_out", "axi_bus", freq, prec, width),
            _mem("mem_out", "sram_bram", freq, prec, mem_bits, ("partial sums",)),
        )
        edges = (("mem_in", "dp_in"), ("dp_in", "pe_tree"),
                 ("pe_tree", "dp_out"), ("dp_out", "mem_out"))
        return ArchDescription(f"adder_tree_u{unroll}", nodes, edges)

    if kind is TemplateKind.HETERO_DW_CONV:
        unroll = int(_param(params, "unroll", lo=1))
        dw_unroll = int(params.get("dw_unroll", max(1, unroll // 2)))
        # Two distinct computation engines (DW_CONV + CONV) fed by two BRAMs.
        nodes = (
            _mem("mem_in", "dram_offchip", freq, prec, mem_bits,
                 ("weights", "input activations")),
            _dp("dp_in", "axi_bus", freq, prec, width),
            _mem("bram_dw", "sram_bram", freq, prec, mem_bits // 2,
                 ("input activations",)),
            _mem("bram_pw", "sram_bram", freq, prec, mem_bits // 2, ("weights",)),
            _comp("engine_dw", "dw_conv_engine", freq, prec, dw_unroll, _DW_KINDS),
            _comp("engine_pw", "conv_engine", freq, prec, unroll, _GENERIC_KINDS),
            _dp("dp_out", "axi_bus", freq, prec, width),
            _mem("mem_out", "dram_offchip", freq, prec, mem_bits, ("partial sums",)),
        )
        edges = (
            ("mem_in", "dp_in"),
            ("dp_in", "bram_dw"), ("dp_in", "bram_pw"),
            ("bram_dw", "engine_dw"), ("bram_pw", "engine_pw"),
            ("engine_dw", "engine_pw"),
            ("engine_pw", "dp_out"), ("dp_out", "mem_out"),
        )
        return ArchDescription(f"hetero_dw_u{unroll}", nodes, edges)

    if kind is TemplateKind.SYSTOLIC_ARRAY:
        n = int(_param(params, "dims", lo=1))
        unroll = int(params.get("unroll", 1))
        if unroll < 1:
            raise ValidationError(f"parameter 'unroll' = {unroll} out of range (min 1)")
        nodes = [
            _mem("mem_in", "sram_bram", freq, prec, mem_bits,
                 ("weights", "input activations")),
        ]
        edges = []
        # 2n injection data paths feed the first row and first column.
        for i in range(n):
            nodes.append(_dp(f"inj_row_{i}", "sync_fifo", freq, prec, width))
            nodes.append(_dp(f"inj_col_{i}", "sync_fifo", freq, prec, width))
            edges.append(("mem_in", f"inj_row_{i}"))
            edges.append(("mem_in", f"inj_col_{i}"))
            edges.append((f"inj_row_{i}", f"pe_{i}_0"))
            edges.append((f"inj_col_{i}", f"pe_0_{i}"))
        for i in range(n):
            for j in range(n):
                nodes.append(_comp(f"pe_{i}_{j}", "systolic_mac", freq, prec,
                                   unroll, _GENERIC_KINDS))
                if j + 1 < n:
                    edges.append((f"pe_{i}_{j}", f"pe_{i}_{j + 1}"))
                if i + 1 < n:
                    edges.append((f"pe_{i}_{j}", f"pe_{i + 1}_{j}"))
        nodes.append(_dp("drain", "sync_fifo", freq, prec, width))
        nodes.append(_mem("mem_out", "sram_bram", freq, prec, mem_bits,
                          ("partial sums",)))
        edges.append((f"pe_{n - 1}_{n - 1}", "drain"))
        edges.append(("drain", "mem_out"))
        return ArchDescription(f"systolic_{n}x{n}", tuple(nodes), tuple(edges))

    if kind is TemplateKind.ROW_STATIONARY_NOC:
        rows = int(_param(params, "dims", lo=1))
        cols = int(params.get("cols", rows))
        if cols < 1:
            raise ValidationError(f"parameter 'cols' = {cols} out of range (min 1)")
        unroll = int(params.get("unroll", 1))
        nodes = [
            _mem("gbuf", "sram_gbuf", freq, prec, mem_bits,
                 ("weights", "input activations", "partial sums")),
            _dp("bcast", "noc_link", freq, prec, width),
        ]
        edges = [("gbuf", "bcast")]
        # Per-row NoC links distribute data; PEs chain horizontally so the
        # NoC IPs between PEs capture the local reuse pattern.
        for i in range(rows):
            nodes.append(_dp(f"noc_row_{i}", "noc_link", freq, prec, width))
            edges.append(("bcast", f"noc_row_{i}"))
            for j in range(cols):
                nodes.append(_comp(f"pe_{i}_{j}", "rs_pe", freq, prec, unroll,
                                   _GENERIC_KINDS))
                if j == 0:
                    edges.append((f"noc_row_{i}", f"pe_{i}_0"))
                else:
                    nodes.append(_dp(f"noc_{i}_{j}", "noc_link", freq, prec, width))
                    edges.append((f"pe_{i}_{j - 1}", f"noc_{i}_{j}"))
                    edges.append((f"noc_{i}_{j}", f"pe_{i}_{j}"))
        nodes.append(_dp("collect", "noc_link", freq, prec, width))
        nodes.append(_mem("spad_out", "sram_bram", freq, prec, mem_bits,
                          ("partial sums",)))
        for i in range(rows):
            edges.append((f"pe_{i}_{cols - 1}", "collect"))
        edges.append(("collect", "spad_out"))
        return ArchDescription(f"rs_noc_{rows}x{cols}", tuple(nodes), tuple(edges))

    raise ValidationError(f"unknown template kind {kind!r}")


def template_min_mul_floor(kind: TemplateKind, template: ArchTemplate) -> int:
    """Smallest multiplier count any point of the template can use.

    Used as the static feasibility pre-filter: variants whose floor exceeds
    the budget are dropped before any prediction runs.
    """
    if kind in (TemplateKind.SYSTOLIC_ARRAY, TemplateKind.ROW_STATIONARY_NOC):
        dims = template.param_grid.get("dims", (_DEFAULTS["dims"],))
        unrolls = template.param_grid.get("unroll", (1,))
        min_dim = min(dims)
        cols = min(template.param_grid.get("cols", (min_dim,)))
        n_pe = min_dim * (cols if kind is TemplateKind.ROW_STATIONARY_NOC else min_dim)
        return n_pe * min(unrolls)
    unrolls = template.param_grid.get("unroll", (_DEFAULTS["unroll"],))
    if kind is TemplateKind.HETERO_DW_CONV:
        dw = template.param_grid.get("dw_unroll", (max(1, min(unrolls) // 2),))
        return min(unrolls) + min(dw)
    return min(unrolls)
