"""aitrail: verifiable AI-entity identities and interaction audit trails.

A tamper-evident, signature-verified ledger records every identity event and
interaction between AI services; graphs restored from it answer provenance
questions, and a deterministic risk-diffusion pass warns the neighborhood of
a node found responsible for an incident.
"""

from .capacity import LoadEstimate, load_estimate
from .errors import AitrailError
from .graph import (
    TrajectoryGraph,
    detect_forks,
    export,
    propagation,
    restore,
    restore_interval,
    trace_source,
)
from .harness import (
    Metrics,
    ScenarioSpec,
    build_network,
    compute_metrics,
    preset,
    preset_names,
    run_flow,
    run_scenario,
    run_standard_batch,
)
from .identity import (
    DidDocument,
    IdentityRegistry,
    Presentation,
    SystemConfig,
    VerifiableCredential,
    make_presentation,
)
from .keys import SigningKey, derive_address
from .ledger import Ledger, LedgerRecord, LogicalClock
from .records import NodeType, RecordKind
from .risk import (
    AuditFinding,
    DiffusionResult,
    RiskReport,
    apply_updates,
    audit_suspects,
    diffuse_risk_levels,
    mark_suspects,
)
from .trajectory import InteractionEvent, Receipt, ReconcileReport, TrajectoryLog

__version__ = "0.1.0"

__all__ = [
    "AitrailError",
    "AuditFinding",
    "DidDocument",
    "DiffusionResult",
    "IdentityRegistry",
    "InteractionEvent",
    "Ledger",
    "LedgerRecord",
    "LoadEstimate",
    "LogicalClock",
    "Metrics",
    "NodeType",
    "Presentation",
    "Receipt",
    "ReconcileReport",
    "RecordKind",
    "RiskReport",
    "ScenarioSpec",
    "SigningKey",
    "SystemConfig",
    "TrajectoryGraph",
    "TrajectoryLog",
    "VerifiableCredential",
    "apply_updates",
    "audit_suspects",
    "build_network",
    "compute_metrics",
    "derive_address",
    "detect_forks",
    "diffuse_risk_levels",
    "export",
    "load_estimate",
    "make_presentation",
    "mark_suspects",
    "preset",
    "preset_names",
    "propagation",
    "restore",
    "restore_interval",
    "run_flow",
    "run_scenario",
    "run_standard_batch",
    "trace_source",
]
