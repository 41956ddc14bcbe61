"""PyTorch -> layer-graph interchange exporter.

Traces a model with torch.fx against a fixed example input, maps each traced
operation onto the interchange layer vocabulary, and emits the versioned JSON
document. The consumer parses and re-validates the document itself; this
module never imports the consumer.
"""

from __future__ import annotations

import json
import operator
from dataclasses import dataclass

import torch
import torch.fx
from torch.fx.passes.shape_prop import ShapeProp

INTERCHANGE_VERSION = "1"

# Operations consumed without emitting a layer: pure shape bookkeeping.
_TRANSPARENT_FUNCTIONS = {torch.flatten}
_TRANSPARENT_METHODS = {"view", "reshape", "flatten", "contiguous", "squeeze"}
_TRANSPARENT_MODULES = (torch.nn.Flatten, torch.nn.Identity, torch.nn.Dropout)


class ExportError(Exception):
    """Raised when a model cannot be expressed in the interchange format."""


@dataclass(frozen=True)
class ExportSession:
    """One export request: a model, its example input shape, and metadata.

    input_shape is (C, H, W) or (1, C, H, W); any other rank is rejected.
    precision is the user-declared (weights, activations, accum) bit triple;
    the source framework's float types are never inferred into it.
    """

    model: torch.nn.Module
    input_shape: tuple[int, ...]
    precision: tuple[int, int, int] = (16, 16, 32)
    name: str = "exported"

    def chw(self) -> tuple[int, int, int]:
        shape = tuple(int(d) for d in self.input_shape)
        if len(shape) == 4:
            if shape[0] != 1:
                raise ExportError(f"batch dimension must be 1, got {shape[0]}")
            shape = shape[1:]
        if len(shape) != 3 or any(d < 1 for d in shape):
            raise ExportError(f"input shape must be (C, H, W), got {self.input_shape}")
        return shape


def _pair(v) -> tuple[int, int]:
    if isinstance(v, (tuple, list)):
        return (int(v[0]), int(v[1]))
    return (int(v), int(v))


def _node_shape(node: torch.fx.Node, where: str) -> tuple[int, ...]:
    meta = node.meta.get("tensor_meta")
    if meta is None:
        raise ExportError(f"no static shape for '{where}' (dynamic shapes are rejected)")
    shape = tuple(int(d) for d in meta.shape)
    if not shape or shape[0] != 1:
        raise ExportError(f"'{where}': expected batch-1 tensor, got shape {shape}")
    return shape


def _out_chw(node: torch.fx.Node, where: str) -> tuple[int, int, int]:
    shape = _node_shape(node, where)
    if len(shape) == 4:
        return shape[1:]
    if len(shape) == 2:
        # Post-flatten / linear activations: (1, M) -> (M, 1, 1).
        return (shape[1], 1, 1)
    raise ExportError(f"'{where}': unsupported tensor rank {len(shape)}")


class _Exporter:
    def __init__(self, session: ExportSession):
        self.session = session
        self.layers: list[dict] = []
        # fx node -> producing layer id, or None for the graph input.
        self.source: dict[torch.fx.Node, str | None] = {}
        self.out_shapes: dict[str, tuple[int, int, int]] = {}

    def run(self) -> dict:
        model = self.session.model.eval()
        chw = self.session.chw()
        try:
            traced = torch.fx.symbolic_trace(model)
        except Exception as exc:
            raise ExportError(
                f"model is not statically traceable (dynamic control flow?): {exc}"
            ) from exc
        ShapeProp(traced).propagate(torch.zeros(1, *chw))

        placeholders = [n for n in traced.graph.nodes if n.op == "placeholder"]
        if len(placeholders) != 1:
            raise ExportError(f"expected exactly 1 model input, got {len(placeholders)}")

        for node in traced.graph.nodes:
            if node.op == "placeholder":
                self.source[node] = None
            elif node.op == "call_module":
                self._module(traced, node)
            elif node.op == "call_function":
                self._function(node)
            elif node.op == "call_method":
                self._method(node)
            elif node.op == "output":
                pass
            else:
                raise ExportError(f"unsupported operation '{node.op}' at '{node.name}'")

        w, a, acc = self.session.precision
        return {
            "version": INTERCHANGE_VERSION,
            "name": self.session.name,
            "precision": {"w": w, "a": a, "acc": acc},
            "layers": self.layers,
        }

    # -- dispatch ----------------------------------------------------------

    def _module(self, traced, node):
        mod = traced.get_submodule(node.target)
        where = str(node.target)
        if isinstance(mod, _TRANSPARENT_MODULES):
            self._passthrough(node, where)
        elif isinstance(mod, torch.nn.Conv2d):
            self._conv(node, where, mod.in_channels, mod.out_channels,
                       mod.kernel_size, mod.stride, mod.padding, mod.dilation,
                       mod.groups)
        elif isinstance(mod, torch.nn.ReLU):
            self._relu(node, where)
        elif isinstance(mod, (torch.nn.MaxPool2d, torch.nn.AvgPool2d)):
            self._pool(node, where, mod.kernel_size,
                       mod.stride if mod.stride is not None else mod.kernel_size,
                       mod.padding, getattr(mod, "ceil_mode", False))
        elif isinstance(mod, torch.nn.Linear):
            self._linear(node, where, mod.in_features, mod.out_features)
        else:
            raise ExportError(
                f"unsupported module {type(mod).__name__} at '{where}'")

    def _function(self, node):
        fn = node.target
        where = node.name
        if fn in _TRANSPARENT_FUNCTIONS:
            self._passthrough(node, where)
        elif fn in (operator.add, torch.add):
            self._add(node, where)
        elif fn is torch.cat:
            self._concat(node, where)
        elif fn in (torch.relu, torch.nn.functional.relu):
            self._relu(node, where)
        elif fn is torch.nn.functional.max_pool2d or fn is torch.nn.functional.avg_pool2d:
            args = dict(zip(("input", "kernel_size", "stride", "padding"), node.args))
            args.update(node.kwargs)
            kernel = args.get("kernel_size")
            self._pool(node, where, kernel, args.get("stride") or kernel,
                       args.get("padding", 0), bool(args.get("ceil_mode", False)))
        else:
            name = getattr(fn, "__name__", repr(fn))
            raise ExportError(f"unsupported operation '{name}' at '{where}'")

    def _method(self, node):
        if node.target in _TRANSPARENT_METHODS:
            self._passthrough(node, node.name)
        elif node.target == "add":
            self._add(node, node.name)
        elif node.target == "relu":
            self._relu(node, node.name)
        else:
            raise ExportError(
                f"unsupported operation '{node.target}' at '{node.name}'")

    # -- layer emission ----------------------------------------------------

    def _pred(self, arg, where: str) -> str | None:
        if not isinstance(arg, torch.fx.Node):
            raise ExportError(f"'{where}': non-tensor operand {arg!r}")
        if arg not in self.source:
            raise ExportError(f"'{where}': operand '{arg.name}' has no traced producer")
        return self.source[arg]

    def _in_shape(self, pred: str | None) -> tuple[int, int, int]:
        # Keyed off the producing layer (not the raw tensor) so flatten and
        # friends stay invisible: a Linear after flatten keeps the (C, H, W)
        # view of its predecessor's output.
        if pred is None:
            return self.session.chw()
        return self.out_shapes[pred]

    def _emit(self, node, kind: str, in_shape, out_shape, preds, **extra):
        doc = {
            "id": node.name,
            "kind": kind,
            "in_shape": list(in_shape),
            "out_shape": list(out_shape),
            "stride": extra.pop("stride", 1),
            "preds": [p for p in preds if p is not None],
        }
        doc.update(extra)
        self.layers.append(doc)
        self.source[node] = node.name
        self.out_shapes[node.name] = tuple(out_shape)

    def _passthrough(self, node, where: str):
        _node_shape(node, where)  # still insist on a static shape
        src = node.args[0] if node.args else None
        self.source[node] = self._pred(src, where)

    def _check_stride(self, stride, where: str) -> int:
        sh, sw = _pair(stride)
        if sh != sw or sh not in (1, 2):
            raise ExportError(f"'{where}': unsupported stride {stride!r} "
                              f"(only square strides 1 and 2 are modeled)")
        return sh

    def _conv(self, node, where, c_in, c_out, kernel, stride, padding,
              dilation, groups):
        if _pair(dilation) != (1, 1):
            raise ExportError(f"'{where}': dilation is not modeled")
        if isinstance(padding, str):
            if padding != "same":
                raise ExportError(f"'{where}': unsupported padding '{padding}'")
            pad = None
        else:
            pad = _pair(padding)
        if groups == 1:
            kind = "Conv"
        elif groups == c_in == c_out:
            kind = "DwConv"
        else:
            raise ExportError(f"'{where}': grouped convolution (groups={groups}) "
                              f"is not modeled")
        pred = self._pred(node.args[0], where)
        extra = {"kernel": list(_pair(kernel)),
                 "stride": self._check_stride(stride, where)}
        if pad is not None:
            extra["padding"] = list(pad)
        self._emit(node, kind, self._in_shape(pred), _out_chw(node, where),
                   [pred], **extra)

    def _pool(self, node, where, kernel, stride, padding, ceil_mode):
        if ceil_mode:
            raise ExportError(f"'{where}': ceil_mode pooling is not modeled")
        pred = self._pred(node.args[0], where)
        self._emit(node, "Pool", self._in_shape(pred), _out_chw(node, where),
                   [pred], kernel=list(_pair(kernel)),
                   stride=self._check_stride(stride, where),
                   padding=list(_pair(padding)))

    def _relu(self, node, where):
        pred = self._pred(node.args[0], where)
        self._emit(node, "ReLU", self._in_shape(pred), _out_chw(node, where),
                   [pred])

    def _linear(self, node, where, in_features, out_features):
        pred = self._pred(node.args[0], where)
        in_shape = self._in_shape(pred)
        c, h, w = in_shape
        if c * h * w != in_features:
            raise ExportError(
                f"'{where}': in_features {in_features} does not match the "
                f"producing layer's output volume {c * h * w}")
        self._emit(node, "FullyConnected", in_shape, (out_features, 1, 1),
                   [pred])

    def _add(self, node, where):
        preds = [self._pred(a, where) for a in node.args[:2]]
        out = _out_chw(node, where)
        self._emit(node, "Add", out, out, preds)

    def _concat(self, node, where):
        tensors = node.args[0]
        dim = node.args[1] if len(node.args) > 1 else node.kwargs.get("dim", 0)
        if dim != 1:
            raise ExportError(f"'{where}': only channel (dim=1) concat is modeled")
        preds = [self._pred(t, where) for t in tensors]
        out = _out_chw(node, where)
        self._emit(node, "Concat", out, out, preds)


def export_model(session: ExportSession) -> str:
    """Trace the session's model and return the interchange JSON document."""
    return json.dumps(_Exporter(session).run(), indent=2) + "\n"
