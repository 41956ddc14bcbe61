"""Two-stage design-space exploration.

Stage 1 enumerates template/parameter/schedule combinations, statically
drops variants whose resource floor already exceeds the budget, then prunes
with the analytical predictor against the hard budgets and the throughput
requirement. Stage 2 co-optimizes each survivor's inter-IP pipelining and
resource allocation against the cycle-level simulator: the bottleneck IP is
either given a pipeline toward its successor or, once pipelined, more
resources, until the simulated latency converges.

Every optimization step is applied tentatively and rolled back if the
simulated latency worsens, so the recorded best latency is non-increasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

from .binding import DataSchedule, bind_mapping, _split, _with_stm
from .coarse import PredictionReport, predict_coarse, resource_usage
from .costs import UnitCostLibrary
from .dnn import DnnModel
from .errors import ValidationError
from .fine import SimLimits, SimResult, simulate
from .graph import (
    AccelGraph,
    ComputeAttrs,
    DataPathAttrs,
    IpKind,
    IpNode,
    IpState,
    StateMachine,
    build_graph,
)
from .templates import (
    ArchTemplate,
    SUPPORTED_LAYER_KINDS,
    TemplateKind,
    instantiate_template,
)

MAX_PORT_WIDTH = 1 << 20


class Objective(str, Enum):
    MIN_ENERGY = "min_energy"
    MIN_LATENCY = "min_latency"
    MIN_EDP = "min_edp"


@dataclass(frozen=True)
class ResourceBudget:
    mul_count: int
    mem_bits: int
    lut: int | None = None
    ff: int | None = None

    def __post_init__(self):
        if self.mul_count <= 0 or self.mem_bits <= 0:
            raise ValidationError("resource budgets must be > 0")


@dataclass(frozen=True)
class AppSpec:
    objective: Objective
    throughput_fps_min: float
    power_budget_w: float
    resource_budget: ResourceBudget

    def __post_init__(self):
        if self.throughput_fps_min <= 0 or self.power_budget_w <= 0:
            raise ValidationError("throughput and power budgets must be > 0")


@dataclass(frozen=True)
class ConvergenceRule:
    rel_tol: float = 0.01
    patience: int = 2
    max_iters: int = 50

    def __post_init__(self):
        if not (0 <= self.rel_tol < 1) or self.patience < 1 or self.max_iters < 1:
            raise ValidationError("invalid convergence rule")


@dataclass
class DesignPoint:
    template: TemplateKind
    params: dict
    schedule: DataSchedule
    graph: AccelGraph | None = None  # lazily bound
    coarse: PredictionReport | None = None
    fine: SimResult | None = None
    optimization_log: list = field(default_factory=list)

    def sort_key(self) -> tuple:
        return (self.template.value, tuple(sorted(self.params.items())),
                self.schedule.key())

    def materialize(self, model: DnnModel, lib: UnitCostLibrary) -> AccelGraph:
        if self.graph is None:
            arch = instantiate_template(self.template, self.params)
            self.graph = bind_mapping(build_graph(arch, lib), model, self.schedule)
        return self.graph


@dataclass
class DesignSpace:
    model: DnnModel
    points: list[DesignPoint]
    n1: int = 0
    n2: int = 0
    n3: int = 0
    n_opt: int = 0

    def __post_init__(self):
        if self.n1 == 0:
            self.n1 = len(self.points)


def point_mul_floor(kind: TemplateKind, params: dict) -> int:
    """Static multiplier floor of one concrete point, without building it."""
    unroll = int(params.get("unroll", 1))
    if kind is TemplateKind.SYSTOLIC_ARRAY:
        n = int(params.get("dims", 4))
        return n * n * unroll
    if kind is TemplateKind.ROW_STATIONARY_NOC:
        rows = int(params.get("dims", 4))
        cols = int(params.get("cols", rows))
        return rows * cols * unroll
    if kind is TemplateKind.HETERO_DW_CONV:
        unroll = int(params.get("unroll", 16))
        dw = int(params.get("dw_unroll", max(1, unroll // 2)))
        return unroll + dw
    return int(params.get("unroll", 16))


def enumerate_stage1(model: DnnModel, spec: AppSpec, pool: list[ArchTemplate],
                     schedules: list[DataSchedule] | None = None) -> DesignSpace:
    """Cartesian enumeration of the template pool, statically filtered.

    Dropped up front: templates that cannot execute one of the model's layer
    kinds, and points whose minimum multiplier floor exceeds the budget
    (folded variants are preferred under tight budgets by construction).
    """
    if not pool:
        raise ValidationError("empty template pool")
    if schedules is None:
        schedules = [DataSchedule()]
    model_kinds = {l.kind.value for l in model.layers if l.mac_count() > 0}
    points: list[DesignPoint] = []
    for template in pool:
        if not model_kinds <= SUPPORTED_LAYER_KINDS[template.kind]:
            continue
        for params in template.assignments():
            if point_mul_floor(template.kind, params) > spec.resource_budget.mul_count:
                continue
            for schedule in schedules:
                points.append(DesignPoint(template.kind, dict(params), schedule))
    points.sort(key=DesignPoint.sort_key)
    if not points:
        raise ValidationError("no feasible template for the given budgets and model")
    return DesignSpace(model=model, points=points)


def objective_value(objective: Objective, energy: float, latency_s: float) -> float:
    if objective is Objective.MIN_ENERGY:
        return energy
    if objective is Objective.MIN_LATENCY:
        return latency_s
    return energy * latency_s


def point_feasible(point: DesignPoint, spec: AppSpec, lib: UnitCostLibrary) -> bool:
    """Hard-budget and throughput check against the coarse prediction."""
    report = point.coarse
    res = report.resources
    if res.mul_count > spec.resource_budget.mul_count:
        return False
    if res.total_mem_bits > spec.resource_budget.mem_bits:
        return False
    if report.latency_seconds > 1.0 / spec.throughput_fps_min:
        return False
    if report.latency_seconds > 0:
        if report.energy_total / report.latency_seconds > spec.power_budget_w:
            return False
    return True


def prune_stage1(space: DesignSpace, spec: AppSpec, lib: UnitCostLibrary,
                 keep: int) -> DesignSpace:
    """Coarse-predictor pruning: drop budget/throughput violators, rank the
    rest by the objective, keep at most `keep`. An empty survivor set is a
    valid outcome."""
    survivors: list[DesignPoint] = []
    for point in space.points:
        try:
            graph = point.materialize(space.model, lib)
            point.coarse = predict_coarse(graph, lib)
        except ValidationError:
            continue  # unbindable point (e.g. tile exceeds memory volume)
        if point_feasible(point, spec, lib):
            survivors.append(point)
    survivors.sort(key=lambda p: (
        objective_value(spec.objective, p.coarse.energy_total, p.coarse.latency_seconds),
        p.sort_key(),
    ))
    survivors = survivors[:keep]
    return DesignSpace(model=space.model, points=survivors, n1=space.n1,
                       n2=len(survivors))


# --------------------------------------------------------------------------
# Stage 2: IP-pipeline co-optimization


def _token_consumers(graph: AccelGraph) -> dict[str, set[str]]:
    out: dict[str, set[str]] = {}
    for n in graph.nodes:
        for s in n.state_machine:
            for tok in s.needed_inputs:
                out.setdefault(tok, set()).add(n.id)
    return out


def pipeline_successor(graph: AccelGraph, ip: str) -> str | None:
    """The dependency successor to pipeline toward: heaviest by total state
    work, ties toward the smallest id."""
    succs = sorted({b for a, b in graph.dependency_edges if a == ip})
    if not succs:
        return None
    return min(succs, key=lambda s: (-graph.node(s).state_machine.total_work(), s))


def insert_pipeline(graph: AccelGraph, ip: str,
                    factor: int = 2) -> tuple[AccelGraph, str | None]:
    """Split the bottleneck IP's states (and its successor's) into finer
    states with proportionally divided work and tokens.

    Returns (new graph, diagnostic). With a diagnostic the graph is returned
    unchanged (no splittable state). factor=1 is the identity.
    """
    if factor < 1:
        raise ValidationError("split factor must be >= 1")
    if factor == 1:
        return graph, None
    node = graph.node(ip)
    succ_id = pipeline_successor(graph, ip)
    if succ_id is None:
        return graph, f"node '{ip}' has no successor to pipeline toward"
    succ = graph.node(succ_id)
    consumers = _token_consumers(graph)

    def splittable_tokens(state: IpState) -> frozenset[str]:
        return frozenset(
            t for t in state.produced_outputs
            if consumers.get(t) == {succ_id} and t not in graph.final_output_tokens
        )

    split_plan: dict[str, tuple[str, ...]] = {}  # token -> sub-token names
    new_ip_states: list[IpState] = []
    any_split = False
    for s in node.state_machine:
        toks = splittable_tokens(s)
        if not toks or s.work < factor:
            new_ip_states.append(s)
            continue
        any_split = True
        chunks = _split(s.work, factor)
        for t in toks:
            split_plan[t] = tuple(f"{t}#{k}" for k in range(factor))
        keep = s.produced_outputs - toks
        for k in range(factor):
            produced = frozenset(split_plan[t][k] for t in toks)
            if k == factor - 1:
                produced |= keep
            new_ip_states.append(
                IpState(
                    needed_inputs=s.needed_inputs if k == 0 else frozenset(),
                    produced_outputs=produced,
                    work=chunks[k],
                    layer=s.layer,
                )
            )
    if not any_split:
        return graph, (
            f"node '{ip}': no splittable state toward '{succ_id}' "
            f"(single-token or sub-{factor} work)"
        )

    # Rewrite the successor: states consuming a split token are themselves
    # split so the first piece can start early; states that cannot split
    # (too little work) simply require all pieces.
    new_succ_states: list[IpState] = []
    for m, s in enumerate(succ.state_machine):
        hit = sorted(t for t in s.needed_inputs if t in split_plan)
        if not hit:
            new_succ_states.append(s)
            continue
        other_needs = frozenset(t for t in s.needed_inputs if t not in split_plan)
        if s.work < factor:
            all_pieces = frozenset(p for t in hit for p in split_plan[t])
            new_succ_states.append(replace(s, needed_inputs=other_needs | all_pieces))
            continue
        chunks = _split(s.work, factor)
        for k in range(factor):
            pieces = frozenset(split_plan[t][k] for t in hit)
            needed = pieces | (other_needs if k == 0 else frozenset())
            if k == factor - 1:
                produced = s.produced_outputs
            else:
                produced = frozenset({f"pipe.{succ_id}.{m}.{k}"})
            new_succ_states.append(
                IpState(needed_inputs=needed, produced_outputs=produced,
                        work=chunks[k], layer=s.layer)
            )

    return graph.with_nodes({
        ip: _with_stm(node, StateMachine(tuple(new_ip_states))),
        succ_id: _with_stm(succ, StateMachine(tuple(new_succ_states))),
    }), None


def reallocate_resource(graph: AccelGraph, ip: str, spec: AppSpec,
                        lib: UnitCostLibrary) -> tuple[AccelGraph, str | None]:
    """Double the bottleneck IP's parallelism (compute unrolling or data-path
    port width) within the resource budget. No-op with a diagnostic when the
    budget is saturated or the node kind holds no tunable resource."""
    node = graph.node(ip)
    if isinstance(node.attrs, ComputeAttrs):
        headroom = spec.resource_budget.mul_count - resource_usage(graph, lib).mul_count
        if headroom <= 0:
            return graph, f"node '{ip}': multiplier budget saturated"
        new_u = min(2 * node.attrs.unroll_u, node.attrs.unroll_u + headroom)
        if new_u == node.attrs.unroll_u:
            return graph, f"node '{ip}': multiplier budget saturated"
        attrs = replace(node.attrs, unroll_u=new_u)
    elif isinstance(node.attrs, DataPathAttrs):
        if node.attrs.port_width_bits >= MAX_PORT_WIDTH:
            return graph, f"node '{ip}': port width at cap"
        attrs = replace(node.attrs,
                        port_width_bits=min(2 * node.attrs.port_width_bits,
                                            MAX_PORT_WIDTH))
    else:
        return graph, f"node '{ip}': memory IPs hold no reallocatable resource"

    new_node = IpNode(id=node.id, kind=node.kind, impl=node.impl,
                      freq_mhz=node.freq_mhz, precision=node.precision,
                      attrs=attrs, state_machine=node.state_machine)
    return graph.with_nodes({ip: new_node}), None


def optimize_candidate(graph: AccelGraph, lib: UnitCostLibrary, spec: AppSpec,
                       conv: ConvergenceRule,
                       limits: SimLimits = SimLimits()) -> tuple[AccelGraph, SimResult, list, int]:
    """Algorithm-2-style greedy loop on one candidate.

    Returns (best graph, its simulation, log, number of variants simulated).
    The best simulated latency is non-increasing: worsening steps roll back.
    """
    best_graph = graph
    best_sim = simulate(graph, lib, limits)
    log: list[dict] = [{"iter": 0, "action": "initial",
                        "latency_cycles": best_sim.total_cycles}]
    adopted: set[tuple[str, str]] = set()
    variants = 0
    stall = 0
    for it in range(1, conv.max_iters + 1):
        ip = best_sim.bottleneck
        succ = pipeline_successor(best_graph, ip)
        entry: dict = {"iter": it, "bottleneck": ip}
        if succ is not None and (ip, succ) not in adopted:
            cand, diag = insert_pipeline(best_graph, ip)
            adopted.add((ip, succ))
            entry["action"] = "pipeline"
            entry["successor"] = succ
        else:
            cand, diag = reallocate_resource(best_graph, ip, spec, lib)
            entry["action"] = "reallocate"
        if diag is not None:
            entry["result"] = f"no-op: {diag}"
            log.append(entry)
            if entry["action"] == "reallocate":
                break  # budget saturated: frozen at current best
            continue
        sim = simulate(cand, lib, limits)
        variants += 1
        entry["latency_cycles"] = sim.total_cycles
        if sim.total_cycles <= best_sim.total_cycles:
            improvement = (best_sim.total_cycles - sim.total_cycles) / max(
                1, best_sim.total_cycles)
            best_graph, best_sim = cand, sim
            entry["result"] = "accepted"
        else:
            improvement = 0.0
            entry["result"] = "rolled back"
        log.append(entry)
        stall = stall + 1 if improvement < conv.rel_tol else 0
        if stall >= conv.patience:
            break
    return best_graph, best_sim, log, variants


def optimize_stage2(space: DesignSpace, lib: UnitCostLibrary, spec: AppSpec,
                    conv: ConvergenceRule, n_opt: int,
                    limits: SimLimits = SimLimits()) -> DesignSpace:
    """Run the co-optimization on every Stage-1 survivor and rank the results
    by the fine-grained objective."""
    total_variants = 0
    for point in space.points:
        graph, sim, log, variants = optimize_candidate(
            point.graph, lib, spec, conv, limits)
        point.graph = graph
        point.fine = sim
        point.optimization_log = log
        total_variants += variants
    ranked = sorted(space.points, key=lambda p: (
        objective_value(spec.objective, p.fine.energy, p.fine.latency_seconds),
        p.sort_key(),
    ))[:n_opt]
    return DesignSpace(model=space.model, points=ranked, n1=space.n1,
                       n2=space.n2, n3=space.n2 + total_variants,
                       n_opt=len(ranked))


# --------------------------------------------------------------------------
# File-facing exploration driver

import json

from .errors import SchemaError

EXPLORE_CONFIG_VERSION = "1"


def parse_app_config(document: str) -> dict:
    """Parse and validate an exploration config into its working pieces."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"exploration config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("exploration config must be a JSON object")
    if "version" not in doc:
        raise SchemaError("exploration config: missing required field 'version'")
    if str(doc["version"]) != EXPLORE_CONFIG_VERSION:
        raise SchemaError(
            f"exploration config: unsupported version {doc['version']!r}")
    allowed = {"version", "objective", "throughput_fps_min", "power_budget_w",
               "resource_budget", "templates", "schedules", "keep", "n_opt",
               "convergence"}
    unknown = set(doc) - allowed
    if unknown:
        raise SchemaError(f"exploration config: unknown fields {sorted(unknown)}")
    for f in ("objective", "throughput_fps_min", "power_budget_w",
              "resource_budget", "templates"):
        if f not in doc:
            raise SchemaError(f"exploration config: missing required field '{f}'")
    try:
        objective = Objective(doc["objective"])
    except ValueError:
        raise SchemaError(
            f"exploration config: unknown objective {doc['objective']!r}") from None
    rb = doc["resource_budget"]
    unknown = set(rb) - {"mul_count", "mem_bits", "lut", "ff"}
    if unknown:
        raise SchemaError(
            f"exploration config resource_budget: unknown fields {sorted(unknown)}")
    try:
        spec = AppSpec(
            objective=objective,
            throughput_fps_min=float(doc["throughput_fps_min"]),
            power_budget_w=float(doc["power_budget_w"]),
            resource_budget=ResourceBudget(
                mul_count=int(rb["mul_count"]),
                mem_bits=int(rb["mem_bits"]),
                lut=int(rb["lut"]) if "lut" in rb else None,
                ff=int(rb["ff"]) if "ff" in rb else None,
            ),
        )
    except KeyError as exc:
        raise SchemaError(
            f"exploration config resource_budget: missing field {exc}") from None

    pool = []
    for i, td in enumerate(doc["templates"]):
        ctx = f"exploration config templates[{i}]"
        unknown = set(td) - {"kind", "grid"}
        if unknown:
            raise SchemaError(f"{ctx}: unknown fields {sorted(unknown)}")
        try:
            kind = TemplateKind(td["kind"])
        except (KeyError, ValueError):
            raise SchemaError(
                f"{ctx}: unknown template kind {td.get('kind')!r}") from None
        grid = {str(k): tuple(v) for k, v in td.get("grid", {}).items()}
        if not grid:
            grid = {"unroll": (16,)}
        pool.append(ArchTemplate(kind, grid))

    schedules = []
    for i, sd in enumerate(doc.get("schedules", [{}])):
        ctx = f"exploration config schedules[{i}]"
        unknown = set(sd) - {"default_tiles", "tiles"}
        if unknown:
            raise SchemaError(f"{ctx}: unknown fields {sorted(unknown)}")
        schedules.append(DataSchedule(
            tiles={str(k): int(v) for k, v in sd.get("tiles", {}).items()},
            default_tiles=int(sd.get("default_tiles", 1)),
        ))

    cv = doc.get("convergence", {})
    unknown = set(cv) - {"rel_tol", "patience", "max_iters"}
    if unknown:
        raise SchemaError(
            f"exploration config convergence: unknown fields {sorted(unknown)}")
    conv = ConvergenceRule(
        rel_tol=float(cv.get("rel_tol", 0.01)),
        patience=int(cv.get("patience", 2)),
        max_iters=int(cv.get("max_iters", 50)),
    )
    return {
        "spec": spec,
        "pool": pool,
        "schedules": schedules,
        "keep": int(doc.get("keep", 10)),
        "n_opt": int(doc.get("n_opt", 3)),
        "convergence": conv,
    }


def run_exploration(model: DnnModel, config: dict, lib: UnitCostLibrary,
                    seed: int = 0, threads: int = 1) -> dict:
    """Run both stages and emit a deterministic manifest document.

    Candidates are evaluated sequentially in a fixed order, so two runs with
    identical inputs produce byte-identical manifests. seed and threads are
    recorded for provenance; no step is randomized and evaluation is
    single-threaded regardless of the requested thread count.
    """
    spec: AppSpec = config["spec"]
    try:
        space = enumerate_stage1(model, spec, config["pool"], config["schedules"])
    except ValidationError as exc:
        if "no feasible template" not in str(exc):
            raise
        return {
            "version": "1",
            "model": model.name,
            "objective": spec.objective.value,
            "seed": seed,
            "threads": threads,
            "counters": {"n1": 0, "n2": 0, "n3": 0, "n_opt": 0},
            "feasible": False,
            "reason": str(exc),
            "candidates": [],
        }
    space = prune_stage1(space, spec, lib, config["keep"])
    space = optimize_stage2(space, lib, spec, config["convergence"],
                            config["n_opt"])
    candidates = []
    for rank, p in enumerate(space.points, start=1):
        candidates.append({
            "rank": rank,
            "template": p.template.value,
            "params": {k: p.params[k] for k in sorted(p.params)},
            "schedule": {
                "default_tiles": p.schedule.default_tiles,
                "tiles": dict(sorted(p.schedule.tiles.items())),
            },
            "coarse": {
                "energy_j": p.coarse.energy_total,
                "latency_seconds": p.coarse.latency_seconds,
                "latency_cycles": p.coarse.latency_cycles,
                "mul_count": p.coarse.resources.mul_count,
                "mem_bits": p.coarse.resources.total_mem_bits,
            },
            "fine": {
                "energy_j": p.fine.energy,
                "latency_seconds": p.fine.latency_seconds,
                "latency_cycles": p.fine.total_cycles,
                "bottleneck": p.fine.bottleneck,
            },
            "objective_value": objective_value(
                spec.objective, p.fine.energy, p.fine.latency_seconds),
            "optimization_log": p.optimization_log,
        })
    return {
        "version": "1",
        "model": model.name,
        "objective": spec.objective.value,
        "seed": seed,
        "threads": threads,
        "counters": {"n1": space.n1, "n2": space.n2, "n3": space.n3,
                     "n_opt": space.n_opt},
        "feasible": True,
        "candidates": candidates,
    }


def manifest_to_csv(manifest: dict) -> str:
    """Tabular energy/latency trade-off view of an exploration manifest."""
    lines = ["rank,template,stage,energy_j,latency_seconds,objective_value"]
    for c in manifest.get("candidates", []):
        lines.append(
            f"{c['rank']},{c['template']},coarse,"
            f"{c['coarse']['energy_j']!r},{c['coarse']['latency_seconds']!r},"
        )
        lines.append(
            f"{c['rank']},{c['template']},fine,"
            f"{c['fine']['energy_j']!r},{c['fine']['latency_seconds']!r},"
            f"{c['objective_value']!r}"
        )
    return "\n".join(lines) + "\n"
