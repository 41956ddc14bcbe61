"""Graph-based accelerator performance modeling and design-space exploration.

The package models an accelerator as a directed graph of IP blocks (memory,
computation, data path), binds DNN workloads onto it as per-IP state
machines, and predicts energy/latency/resources two ways: a fast analytical
estimate and a cycle-level simulation. A two-stage explorer searches a
template pool against application budgets.
"""

from .binding import DataSchedule, bind_mapping
from .coarse import (
    IpEstimate,
    PredictionReport,
    ResourceReport,
    ip_estimate,
    predict_coarse,
    report_to_csv,
    resource_usage,
)
from .costs import (
    IpCostParams,
    UnitCostLibrary,
    load_library,
    lookup,
    serialize_library,
)
from .dnn import (
    DnnModel,
    LayerKind,
    LayerSpec,
    Precision,
    TensorShape,
    Workload,
    layer_workload,
    parse_model,
    serialize_model,
)
from .errors import (
    AccelModelError,
    CycleLimitError,
    DeadlockError,
    SchemaError,
    SimulationError,
    ValidationError,
)
from .explore import (
    AppSpec,
    ArchTemplate,
    ConvergenceRule,
    DesignPoint,
    DesignSpace,
    Objective,
    ResourceBudget,
    enumerate_stage1,
    insert_pipeline,
    manifest_to_csv,
    optimize_candidate,
    optimize_stage2,
    parse_app_config,
    prune_stage1,
    reallocate_resource,
    run_exploration,
)
from .fine import (
    SimLimits,
    SimResult,
    TraceRecord,
    bottleneck,
    export_trace,
    replay_trace,
    simulate,
)
from .graph import (
    AccelGraph,
    ArchDescription,
    ComputeAttrs,
    DataPathAttrs,
    Edge,
    IpKind,
    IpNode,
    IpState,
    MemoryAttrs,
    NodeDesc,
    StateMachine,
    build_graph,
    critical_path,
    critical_paths,
    export_dot,
    graph_to_arch,
    parse_arch,
    serialize_arch,
    validate_graph,
)
from .templates import TemplateKind, instantiate_template, template_min_mul_floor

__version__ = "0.1.0"
