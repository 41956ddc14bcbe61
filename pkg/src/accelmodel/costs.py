"""Unit energy/latency cost library.

Each implementation key (e.g. "sram_bram", "mac_array") maps to the unit
costs that instantiate the per-IP analytical models: warm-up overheads,
per-state control overheads, and either per-MAC costs (computation IPs) or
per-bit costs (memory / data-path IPs).

Latencies are stored in seconds; conversion to cycles happens at prediction
time against the graph's clock, rounding up.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import SchemaError, ValidationError

COST_LIBRARY_VERSION = "1"

KIND_COMPUTATION = "computation"
KIND_DATA_PATH = "data_path"
KIND_MEMORY = "memory"
_PARAM_KINDS = (KIND_COMPUTATION, KIND_DATA_PATH, KIND_MEMORY)


@dataclass(frozen=True)
class IpCostParams:
    """Unit costs of one IP implementation.

    kind selects which unit costs are meaningful: computation entries carry
    e_mac/l_mac, memory and data-path entries carry e_bit/l_bit. Energy in
    joules, latency in seconds.
    """

    kind: str
    e_warmup: float = 0.0
    l_warmup: float = 0.0
    e_control: float = 0.0
    l_control: float = 0.0
    e_mac: float | None = None
    l_mac: float | None = None
    e_bit: float | None = None
    l_bit: float | None = None

    def __post_init__(self):
        if self.kind not in _PARAM_KINDS:
            raise ValidationError(f"unknown cost-entry kind {self.kind!r}")
        for name in ("e_warmup", "l_warmup", "e_control", "l_control",
                     "e_mac", "l_mac", "e_bit", "l_bit"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValidationError(f"negative cost: {name} = {v}")
        if self.kind == KIND_COMPUTATION:
            if self.e_mac is None or self.l_mac is None:
                raise ValidationError("computation entry must define e_mac and l_mac")
        else:
            if self.e_bit is None or self.l_bit is None:
                raise ValidationError(f"{self.kind} entry must define e_bit and l_bit")


@dataclass(frozen=True)
class UnitCostLibrary:
    """Immutable map from (impl key, technology tag) to IpCostParams."""

    entries: dict[tuple[str, str], IpCostParams]
    mul_per_decode: int = 0
    host_energy: float = 0.0
    host_latency: float = 0.0
    provenance: str = ""

    def __post_init__(self):
        if self.mul_per_decode < 0:
            raise ValidationError("mul_per_decode must be >= 0")
        if self.host_energy < 0 or self.host_latency < 0:
            raise ValidationError("host overheads must be >= 0")

    def technologies(self) -> list[str]:
        return sorted({tech for _, tech in self.entries})

    def resolve(self, impl: str) -> IpCostParams:
        """Look up an impl key when the technology is implied by the library.

        Errs if the key is absent or ambiguous across technologies.
        """
        hits = [(k, p) for k, p in self.entries.items() if k[0] == impl]
        if not hits:
            raise ValidationError(f"unknown implementation '{impl}'")
        if len(hits) > 1:
            techs = sorted(k[1] for k, _ in hits)
            raise ValidationError(
                f"implementation '{impl}' is ambiguous across technologies {techs}"
            )
        return hits[0][1]

    def has_impl(self, impl: str) -> bool:
        return any(k[0] == impl for k in self.entries)


def lookup(lib: UnitCostLibrary, impl: str, tech: str) -> IpCostParams:
    """Exact-match lookup; keys are case-sensitive and never fuzzy-matched."""
    try:
        return lib.entries[(impl, tech)]
    except KeyError:
        raise ValidationError(
            f"unknown implementation '{impl}' (technology '{tech}')"
        ) from None


_ENTRY_FIELDS = {"impl", "kind", "e_warmup", "l_warmup", "e_control", "l_control",
                 "e_mac", "l_mac", "e_bit", "l_bit"}


def load_library(document: str) -> UnitCostLibrary:
    """Parse and validate a cost-library document (strict: unknown fields rejected)."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"cost library is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("cost library must be a JSON object")
    if "version" not in doc:
        raise SchemaError("cost library: missing required field 'version'")
    if str(doc["version"]) != COST_LIBRARY_VERSION:
        raise SchemaError(f"cost library: unsupported version {doc['version']!r}")
    allowed = {"version", "technology", "provenance", "mul_per_decode", "host", "entries"}
    unknown = set(doc) - allowed
    if unknown:
        raise SchemaError(f"cost library: unknown fields {sorted(unknown)}")
    for f in ("technology", "provenance", "entries"):
        if f not in doc:
            raise SchemaError(f"cost library: missing required field '{f}'")
    tech = str(doc["technology"])

    host = doc.get("host", {})
    unknown = set(host) - {"energy_j", "latency_s"}
    if unknown:
        raise SchemaError(f"cost library host: unknown fields {sorted(unknown)}")

    entries: dict[tuple[str, str], IpCostParams] = {}
    for i, edoc in enumerate(doc["entries"]):
        ctx = f"cost library entries[{i}]"
        if not isinstance(edoc, dict):
            raise SchemaError(f"{ctx}: entry must be an object")
        unknown = set(edoc) - _ENTRY_FIELDS
        if unknown:
            raise SchemaError(f"{ctx}: unknown fields {sorted(unknown)}")
        for f in ("impl", "kind"):
            if f not in edoc:
                raise SchemaError(f"{ctx}: missing required field '{f}'")
        key = (str(edoc["impl"]), tech)
        if key in entries:
            raise SchemaError(f"{ctx}: duplicate key {key}")
        kwargs = {k: float(v) for k, v in edoc.items() if k not in ("impl", "kind")}
        entries[key] = IpCostParams(kind=str(edoc["kind"]), **kwargs)

    return UnitCostLibrary(
        entries=entries,
        mul_per_decode=int(doc.get("mul_per_decode", 0)),
        host_energy=float(host.get("energy_j", 0.0)),
        host_latency=float(host.get("latency_s", 0.0)),
        provenance=str(doc["provenance"]),
    )


def serialize_library(lib: UnitCostLibrary) -> str:
    """Emit the cost-library document (inverse of load_library).

    Requires a single-technology library, matching the one-file-per-technology
    schema.
    """
    techs = lib.technologies()
    if len(techs) != 1:
        raise ValidationError(f"cannot serialize multi-technology library {techs}")
    tech = techs[0]
    entries = []
    for (impl, _), p in sorted(lib.entries.items()):
        edoc = {"impl": impl, "kind": p.kind, "e_warmup": p.e_warmup,
                "l_warmup": p.l_warmup, "e_control": p.e_control,
                "l_control": p.l_control}
        for f in ("e_mac", "l_mac", "e_bit", "l_bit"):
            v = getattr(p, f)
            if v is not None:
                edoc[f] = v
        entries.append(edoc)
    doc = {
        "version": COST_LIBRARY_VERSION,
        "technology": tech,
        "provenance": lib.provenance,
        "mul_per_decode": lib.mul_per_decode,
        "host": {"energy_j": lib.host_energy, "latency_s": lib.host_latency},
        "entries": entries,
    }
    return json.dumps(doc, indent=2) + "\n"
