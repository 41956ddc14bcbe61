"""DNN layer-graph intermediate representation.

Parses the versioned model-interchange format into a validated layer DAG and
derives per-layer workload quantities (MAC counts and data volumes) that the
mapping and prediction stages consume.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

from .errors import SchemaError, ValidationError

INTERCHANGE_VERSION = "1"

# Strides outside this set are rejected rather than silently mis-modeled.
SUPPORTED_STRIDES = (1, 2)


class LayerKind(str, Enum):
    CONV = "Conv"
    DW_CONV = "DwConv"
    POOL = "Pool"
    RELU = "ReLU"
    REORG = "Reorg"
    FULLY_CONNECTED = "FullyConnected"
    ADD = "Add"
    CONCAT = "Concat"


KINDS_WITH_KERNEL = {LayerKind.CONV, LayerKind.DW_CONV, LayerKind.POOL}
KINDS_WITH_WEIGHTS = {LayerKind.CONV, LayerKind.DW_CONV, LayerKind.FULLY_CONNECTED}


@dataclass(frozen=True)
class TensorShape:
    """Channel-major feature-map shape (C, H, W)."""

    channels: int
    height: int
    width: int

    def __post_init__(self):
        for name in ("channels", "height", "width"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValidationError(f"TensorShape.{name} must be >= 1, got {v!r}")

    @property
    def elements(self) -> int:
        return self.channels * self.height * self.width

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.channels, self.height, self.width)


@dataclass(frozen=True)
class Precision:
    """Bit widths for weights, activations, and accumulations."""

    weights: int
    activations: int
    accum: int

    def __post_init__(self):
        for name in ("weights", "activations", "accum"):
            v = getattr(self, name)
            if not isinstance(v, int) or not 1 <= v <= 64:
                raise ValidationError(f"precision bits {name} must be in [1, 64], got {v!r}")


@dataclass(frozen=True)
class LayerSpec:
    id: str
    kind: LayerKind
    input_shape: TensorShape
    output_shape: TensorShape
    kernel: tuple[int, int] | None = None
    stride: int = 1
    predecessors: tuple[str, ...] = ()
    # None means "same" padding; an explicit (ph, pw) pair otherwise.
    padding: tuple[int, int] | None = None

    def __post_init__(self):
        if self.kind in KINDS_WITH_KERNEL:
            if self.kernel is None:
                raise ValidationError(f"layer '{self.id}': {self.kind.value} requires a kernel")
            kh, kw = self.kernel
            if kh < 1 or kw < 1:
                raise ValidationError(f"layer '{self.id}': kernel dims must be >= 1")
        elif self.kernel is not None:
            raise ValidationError(
                f"layer '{self.id}': {self.kind.value} must not declare a kernel"
            )
        if self.stride not in SUPPORTED_STRIDES:
            raise ValidationError(
                f"layer '{self.id}': stride {self.stride} unsupported "
                f"(only {SUPPORTED_STRIDES} are modeled)"
            )
        self._check_shapes()

    def _check_shapes(self):
        cin, hin, win = self.input_shape.as_tuple()
        cout, hout, wout = self.output_shape.as_tuple()
        k = self.kind
        if k in (LayerKind.CONV, LayerKind.DW_CONV, LayerKind.POOL):
            kh, kw = self.kernel
            if self.padding is None:
                # "same" padding: spatial dims shrink only by the stride.
                exp_h = math.ceil(hin / self.stride)
                exp_w = math.ceil(win / self.stride)
            else:
                ph, pw = self.padding
                exp_h = (hin + 2 * ph - kh) // self.stride + 1
                exp_w = (win + 2 * pw - kw) // self.stride + 1
            if (hout, wout) != (exp_h, exp_w):
                raise ValidationError(
                    f"layer '{self.id}': output spatial dims {(hout, wout)} inconsistent "
                    f"with input {(hin, win)}, kernel {self.kernel}, stride {self.stride} "
                    f"(expected {(exp_h, exp_w)})"
                )
            if k in (LayerKind.DW_CONV, LayerKind.POOL) and cout != cin:
                raise ValidationError(
                    f"layer '{self.id}': {k.value} must preserve channels "
                    f"({cin} -> {cout})"
                )
        elif k in (LayerKind.RELU, LayerKind.ADD):
            if self.output_shape != self.input_shape:
                raise ValidationError(
                    f"layer '{self.id}': {k.value} must preserve the tensor shape"
                )
        elif k is LayerKind.REORG:
            # Space-to-depth with block = stride.
            s = self.stride
            if (cout, hout, wout) != (cin * s * s, hin // s, win // s):
                raise ValidationError(
                    f"layer '{self.id}': Reorg output {(cout, hout, wout)} inconsistent "
                    f"with input {(cin, hin, win)} and stride {s}"
                )
        elif k is LayerKind.FULLY_CONNECTED:
            if (hout, wout) != (1, 1):
                raise ValidationError(
                    f"layer '{self.id}': FullyConnected output must be (M, 1, 1)"
                )
        elif k is LayerKind.CONCAT:
            if (hout, wout) != (hin, win):
                raise ValidationError(
                    f"layer '{self.id}': Concat must preserve spatial dims"
                )

    @property
    def has_weights(self) -> bool:
        return self.kind in KINDS_WITH_WEIGHTS

    def weight_elements(self) -> int:
        cin = self.input_shape.channels
        cout = self.output_shape.channels
        if self.kind is LayerKind.CONV:
            kh, kw = self.kernel
            return cout * cin * kh * kw
        if self.kind is LayerKind.DW_CONV:
            kh, kw = self.kernel
            return cin * kh * kw
        if self.kind is LayerKind.FULLY_CONNECTED:
            return cout * self.input_shape.elements
        return 0

    def mac_count(self) -> int:
        cin = self.input_shape.channels
        cout, hout, wout = self.output_shape.as_tuple()
        if self.kind is LayerKind.CONV:
            kh, kw = self.kernel
            return cout * cin * kh * kw * hout * wout
        if self.kind is LayerKind.DW_CONV:
            kh, kw = self.kernel
            return cin * kh * kw * hout * wout
        if self.kind is LayerKind.FULLY_CONNECTED:
            return cout * self.input_shape.elements
        # Pool/ReLU/Add/Concat/Reorg involve no multiplies.
        return 0


@dataclass(frozen=True)
class Workload:
    """Per-layer cost quantities: MACs plus data volumes in bits."""

    mac_count: int
    input_volume: int
    weight_volume: int
    output_volume: int

    def __post_init__(self):
        for name in ("mac_count", "input_volume", "weight_volume", "output_volume"):
            if getattr(self, name) < 0:
                raise ValidationError(f"Workload.{name} must be >= 0")


def layer_workload(layer: LayerSpec, precision: Precision) -> Workload:
    """Derive the MAC count and data volumes of one layer.

    Volumes are element counts times the respective bit precision; activations
    (inputs and outputs) use the activation width, weights the weight width.
    """
    return Workload(
        mac_count=layer.mac_count(),
        input_volume=layer.input_shape.elements * precision.activations,
        weight_volume=layer.weight_elements() * precision.weights,
        output_volume=layer.output_shape.elements * precision.activations,
    )


@dataclass(frozen=True)
class DnnModel:
    name: str
    layers: tuple[LayerSpec, ...]
    precision: Precision

    def __post_init__(self):
        seen: dict[str, LayerSpec] = {}
        for layer in self.layers:
            if layer.id in seen:
                raise ValidationError(f"duplicate layer id '{layer.id}'")
            seen[layer.id] = layer
        for layer in self.layers:
            for pred in layer.predecessors:
                if pred not in seen:
                    raise ValidationError(
                        f"layer '{layer.id}': unknown predecessor '{pred}'"
                    )
        self._check_dag()
        self._check_edge_shapes(seen)
        if self.layers:
            if not self.entry_layers():
                raise ValidationError("model has no entry layer")
            if not self.exit_layers():
                raise ValidationError("model has no exit layer")

    def _check_dag(self):
        color: dict[str, int] = {}
        by_id = {l.id: l for l in self.layers}

        def visit(lid: str, stack: list[str]):
            state = color.get(lid, 0)
            if state == 1:
                cycle = stack[stack.index(lid):] + [lid]
                raise ValidationError(f"cyclic layer graph: {' -> '.join(cycle)}")
            if state == 2:
                return
            color[lid] = 1
            stack.append(lid)
            for pred in by_id[lid].predecessors:
                visit(pred, stack)
            stack.pop()
            color[lid] = 2

        for layer in self.layers:
            visit(layer.id, [])

    def _check_edge_shapes(self, by_id: dict[str, LayerSpec]):
        for layer in self.layers:
            preds = [by_id[p] for p in layer.predecessors]
            if not preds:
                continue
            k = layer.kind
            if k is LayerKind.CONCAT:
                total_c = sum(p.output_shape.channels for p in preds)
                if total_c != layer.output_shape.channels:
                    raise ValidationError(
                        f"layer '{layer.id}': Concat channels {layer.output_shape.channels} "
                        f"!= sum of predecessor channels {total_c}"
                    )
                for p in preds:
                    if (p.output_shape.height, p.output_shape.width) != (
                        layer.input_shape.height,
                        layer.input_shape.width,
                    ):
                        raise ValidationError(
                            f"layer '{layer.id}': Concat input spatial mismatch with '{p.id}'"
                        )
            elif k is LayerKind.ADD:
                for p in preds:
                    if p.output_shape != layer.input_shape:
                        raise ValidationError(
                            f"layer '{layer.id}': Add shape mismatch with '{p.id}' "
                            f"({p.output_shape.as_tuple()} vs {layer.input_shape.as_tuple()})"
                        )
            else:
                # Single-input layers must match their (first) predecessor.
                p = preds[0]
                if p.output_shape != layer.input_shape:
                    raise ValidationError(
                        f"layer '{layer.id}': input shape {layer.input_shape.as_tuple()} "
                        f"does not match output of '{p.id}' {p.output_shape.as_tuple()}"
                    )

    def layer(self, lid: str) -> LayerSpec:
        for layer in self.layers:
            if layer.id == lid:
                return layer
        raise KeyError(lid)

    def entry_layers(self) -> list[LayerSpec]:
        return [l for l in self.layers if not l.predecessors]

    def exit_layers(self) -> list[LayerSpec]:
        referenced = {p for l in self.layers for p in l.predecessors}
        return [l for l in self.layers if l.id not in referenced]

    def total_mac_count(self) -> int:
        return sum(l.mac_count() for l in self.layers)

    def workloads(self) -> dict[str, Workload]:
        return {l.id: layer_workload(l, self.precision) for l in self.layers}


# --------------------------------------------------------------------------
# Interchange format (see docs/formats.md)

_LAYER_FIELDS = {"id", "kind", "in_shape", "out_shape", "kernel", "stride", "preds", "padding"}


def _require(doc: dict, field_name: str, ctx: str):
    if field_name not in doc:
        raise SchemaError(f"{ctx}: missing required field '{field_name}'")
    return doc[field_name]


def _shape_from_doc(value, ctx: str) -> TensorShape:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise SchemaError(f"{ctx}: shape must be a [C, H, W] triple, got {value!r}")
    try:
        return TensorShape(*[int(v) for v in value])
    except ValidationError as exc:
        raise SchemaError(f"{ctx}: {exc}") from exc


def parse_model(document: str) -> DnnModel:
    """Parse and validate a model-interchange document.

    Raises SchemaError for malformed documents (naming the offending field)
    and ValidationError for well-formed documents violating model invariants.
    """
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"model document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("model document must be a JSON object")
    version = _require(doc, "version", "model")
    if str(version) != INTERCHANGE_VERSION:
        raise SchemaError(f"model: unsupported version {version!r}")
    unknown = set(doc) - {"version", "name", "precision", "layers"}
    if unknown:
        raise SchemaError(f"model: unknown fields {sorted(unknown)}")
    name = _require(doc, "name", "model")
    prec_doc = _require(doc, "precision", "model")
    for f in ("w", "a", "acc"):
        _require(prec_doc, f, "model.precision")
    precision = Precision(int(prec_doc["w"]), int(prec_doc["a"]), int(prec_doc["acc"]))

    layers = []
    for i, ldoc in enumerate(_require(doc, "layers", "model")):
        ctx = f"model.layers[{i}]"
        if not isinstance(ldoc, dict):
            raise SchemaError(f"{ctx}: layer must be an object")
        unknown = set(ldoc) - _LAYER_FIELDS
        if unknown:
            raise SchemaError(f"{ctx}: unknown fields {sorted(unknown)}")
        lid = str(_require(ldoc, "id", ctx))
        kind_name = _require(ldoc, "kind", ctx)
        try:
            kind = LayerKind(kind_name)
        except ValueError:
            raise SchemaError(f"{ctx}: unknown layer kind {kind_name!r}") from None
        kernel = ldoc.get("kernel")
        if kernel is not None:
            kernel = (int(kernel[0]), int(kernel[1]))
        padding = ldoc.get("padding")
        if padding is not None:
            padding = (int(padding[0]), int(padding[1]))
        layers.append(
            LayerSpec(
                id=lid,
                kind=kind,
                input_shape=_shape_from_doc(_require(ldoc, "in_shape", ctx), ctx),
                output_shape=_shape_from_doc(_require(ldoc, "out_shape", ctx), ctx),
                kernel=kernel,
                stride=int(ldoc.get("stride", 1)),
                predecessors=tuple(str(p) for p in ldoc.get("preds", [])),
                padding=padding,
            )
        )
    return DnnModel(name=str(name), layers=tuple(layers), precision=precision)


def serialize_model(model: DnnModel) -> str:
    """Emit the interchange document for a model (inverse of parse_model)."""
    doc = {
        "version": INTERCHANGE_VERSION,
        "name": model.name,
        "precision": {
            "w": model.precision.weights,
            "a": model.precision.activations,
            "acc": model.precision.accum,
        },
        "layers": [],
    }
    for layer in model.layers:
        ldoc = {
            "id": layer.id,
            "kind": layer.kind.value,
            "in_shape": list(layer.input_shape.as_tuple()),
            "out_shape": list(layer.output_shape.as_tuple()),
            "stride": layer.stride,
            "preds": list(layer.predecessors),
        }
        if layer.kernel is not None:
            ldoc["kernel"] = list(layer.kernel)
        if layer.padding is not None:
            ldoc["padding"] = list(layer.padding)
        doc["layers"].append(ldoc)
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"
