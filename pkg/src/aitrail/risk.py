"""Risk model, responsibility audit, and outward risk-level diffusion.

Risk levels are integers in [0, 10]; each entity's attenuation factor is a
per-mille integer so diffusion stays integer-exact and reproducible. Starting
from the nodes found responsible, each neighbor is offered
``floor(attenuation_of(neighbor) * level_of(source) / 1000)``; an offer only
sticks when it raises the neighbor's level, and a node whose offer decays to
zero stops that branch. Neighborhood ignores call direction: callers of a
risky callee are exposed too.
"""

from __future__ import annotations

import heapq
import json
from collections import deque
from dataclasses import dataclass, field

from .errors import BadInterval, NotAuthorized, UnknownNode
from .graph import TrajectoryGraph, restore_interval
from .identity import IdentityRegistry
from .keys import SigningKey, address_to_did, did_to_address
from .ledger import Ledger
from .records import (
    ATTENUATION_SCALE,
    ErlUpdatedBody,
    RecordKind,
    RiskReportFiledBody,
    RISK_LEVEL_MAX,
)
from .trajectory import TrajectoryLog


@dataclass(frozen=True)
class RiskLevel:
    level: int

    def __post_init__(self) -> None:
        if not (0 <= self.level <= RISK_LEVEL_MAX):
            raise ValueError(f"risk level {self.level} outside [0, {RISK_LEVEL_MAX}]")


@dataclass(frozen=True)
class Attenuation:
    per_mille: int

    def __post_init__(self) -> None:
        if not (0 <= self.per_mille <= ATTENUATION_SCALE):
            raise ValueError(f"attenuation {self.per_mille} outside [0, {ATTENUATION_SCALE}]")


@dataclass(frozen=True)
class RiskReport:
    """An auditor's pointer into the ledger: a time interval, optionally
    narrowed to trajectories and suspected entities."""

    interval: tuple[int, int]
    trajectory_ids: frozenset[bytes] | None = None
    suspected: frozenset[str] | None = None
    description: str = ""

    def to_body(self) -> RiskReportFiledBody:
        return RiskReportFiledBody(
            interval_start=self.interval[0],
            interval_end=self.interval[1],
            trajectory_ids=tuple(sorted(self.trajectory_ids)) if self.trajectory_ids else (),
            suspected=tuple(sorted(did_to_address(d) for d in self.suspected)) if self.suspected else (),
            description=self.description,
        )

    @classmethod
    def from_body(cls, body: RiskReportFiledBody) -> "RiskReport":
        return cls(
            interval=(body.interval_start, body.interval_end),
            trajectory_ids=frozenset(body.trajectory_ids) or None,
            suspected=frozenset(address_to_did(a) for a in body.suspected) or None,
            description=body.description,
        )


class EvidenceReason:
    INVALID_CREDENTIAL = "InvalidCredential"
    REVOKED_CREDENTIAL = "RevokedCredential"
    MISSING_RECEIPT = "MissingReceipt"
    HASH_MISMATCH = "HashMismatch"


@dataclass(frozen=True)
class Evidence:
    reason: str
    ledger_indices: tuple[int, ...]

    def to_json_obj(self) -> dict:
        return {"reason": self.reason, "ledgerIndices": list(self.ledger_indices)}


@dataclass
class AuditFinding:
    responsible: dict[str, list[Evidence]] = field(default_factory=dict)

    @property
    def risk_nodes(self) -> set[str]:
        return set(self.responsible)

    def add(self, did: str, reason: str, indices: tuple[int, ...]) -> None:
        self.responsible.setdefault(did, []).append(Evidence(reason, indices))

    def to_json_obj(self) -> dict:
        return {
            "vRisk": sorted(self.responsible),
            "evidence": {did: [e.to_json_obj() for e in items]
                         for did, items in sorted(self.responsible.items())},
        }


@dataclass(frozen=True)
class RiskUpdate:
    did: str
    old_level: int
    new_level: int
    hops: int


@dataclass
class DiffusionResult:
    updates: dict[str, RiskUpdate] = field(default_factory=dict)
    visited_order: list[str] = field(default_factory=list)

    def to_json_obj(self) -> dict:
        return {
            "updates": [
                {"did": u.did, "oldErl": u.old_level, "newErl": u.new_level, "hops": u.hops}
                for u in (self.updates[d] for d in sorted(self.updates))
            ],
            "visitedOrder": list(self.visited_order),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2, sort_keys=True)


def file_report(ledger: Ledger, author: SigningKey, report: RiskReport) -> int:
    """Persist a risk report; returns its ledger index."""
    if report.interval[0] > report.interval[1]:
        raise BadInterval(f"{report.interval[0]} > {report.interval[1]}")
    index, _ = ledger.append(author, RecordKind.RISK_REPORT_FILED, report.to_body().encode())
    return index


def load_report(ledger: Ledger, index: int) -> RiskReport:
    rec = ledger.records[index]
    if rec.kind != RecordKind.RISK_REPORT_FILED:
        raise ValueError(f"record {index} is not a risk report")
    return RiskReport.from_body(rec.body())


def mark_suspects(ledger: Ledger, report: RiskReport) -> tuple[TrajectoryGraph, set[str]]:
    """Merged graph for the report's interval, narrowed to its trajectories,
    plus the suspect set (explicit, or every node seen)."""
    t0, t1 = report.interval
    merged = restore_interval(ledger, t0, t1)
    if report.trajectory_ids is not None:
        kept = [e for e in merged.edges if e.trajectory_id in report.trajectory_ids]
        merged = TrajectoryGraph(
            nodes={n for e in kept for n in (e.caller, e.callee)},
            edges=kept,
            trajectory_ids={e.trajectory_id for e in kept},
        )
    suspects = set(report.suspected) if report.suspected is not None else set(merged.nodes)
    return merged, suspects


def audit_suspects(merged: TrajectoryGraph, suspects: set[str],
                   interval: tuple[int, int], identity: IdentityRegistry,
                   trajectories: TrajectoryLog) -> AuditFinding:
    """Review the evidence for each suspect and keep those with findings.

    A suspect is responsible when, within the interval, it (a) interacted
    while holding no approved unrevoked credential, or had one revoked,
    (b) failed to acknowledge a call it received, or (c) acknowledged with a
    hash that contradicts the caller's record. Mismatches are charged to the
    receipt author: the caller's record was committed at call time, the
    conflicting acknowledgment came after.
    """
    t0, t1 = interval
    finding = AuditFinding()
    ledger = trajectories.ledger

    participation: dict[str, list[int]] = {}
    for e in merged.edges:
        participation.setdefault(e.caller, []).append(e.ledger_index)
        participation.setdefault(e.callee, []).append(e.ledger_index)

    # (a) credential evidence
    revoked_in_interval: dict[str, list[int]] = {}
    for rec in ledger.query(kind=RecordKind.VC_REVOKED, time_interval=(t0, t1)):
        cred = identity.credential_of(rec.body().vc_hash)
        if cred is not None:
            revoked_in_interval.setdefault(cred.subject, []).append(rec.index)
    for did in sorted(suspects):
        if did in revoked_in_interval:
            finding.add(did, EvidenceReason.REVOKED_CREDENTIAL,
                        tuple(sorted(revoked_in_interval[did])))
        elif did in participation and not identity.has_valid_credential(did_to_address(did)):
            finding.add(did, EvidenceReason.INVALID_CREDENTIAL,
                        tuple(sorted(participation[did])))

    # (b)+(c) reconciliation evidence per involved trajectory
    for trajectory_id in sorted(merged.trajectory_ids):
        report = trajectories.reconcile(trajectory_id)
        for event in report.missing_receipt:
            if not (t0 <= event.timestamp <= t1):
                continue
            callee = address_to_did(event.callee)
            if callee in suspects:
                finding.add(callee, EvidenceReason.MISSING_RECEIPT, (event.ledger_index,))
        for event, receipt in report.hash_mismatch:
            if not (t0 <= event.timestamp <= t1):
                continue
            callee = address_to_did(receipt.callee)
            if callee in suspects:
                finding.add(callee, EvidenceReason.HASH_MISMATCH,
                            (event.ledger_index, receipt.ledger_index))
    return finding


def diffuse_risk_levels(merged: TrajectoryGraph, risk_nodes: set[str],
                        level_of, attenuation_of) -> DiffusionResult:
    """Spread risk outward from the responsible nodes until offers decay to 0.

    The worklist is a max-priority queue keyed on (level, did) so the result
    never depends on insertion order. Sources propagate their current level;
    a node is re-enqueued whenever its level rises, and levels never
    decrease. Terminates because levels are bounded and strictly increase on
    every update.
    """
    for node in risk_nodes:
        if node not in merged.nodes:
            raise UnknownNode(node)
    result = DiffusionResult()
    if not risk_nodes:
        return result

    current: dict[str, int] = {}
    original: dict[str, int] = {}

    def level(node: str) -> int:
        if node not in current:
            value = int(level_of(node))
            current[node] = value
            original[node] = value
        return current[node]

    hops = _hop_distance(merged, risk_nodes)

    # heapq is a min-heap: negate levels for max-priority behaviour
    heap: list[tuple[int, str]] = [(-level(n), n) for n in sorted(risk_nodes)]
    heapq.heapify(heap)
    while heap:
        neg, source = heapq.heappop(heap)
        if -neg < level(source):
            continue  # superseded entry
        result.visited_order.append(source)
        for neighbor in sorted(merged.neighbors(source)):
            offer = (int(attenuation_of(neighbor)) * level(source)) // ATTENUATION_SCALE
            if offer == 0 or offer <= level(neighbor):
                continue
            current[neighbor] = offer
            result.updates[neighbor] = RiskUpdate(
                did=neighbor, old_level=original[neighbor], new_level=offer,
                hops=hops[neighbor])
            heapq.heappush(heap, (-offer, neighbor))
    return result


def _hop_distance(g: TrajectoryGraph, seeds: set[str]) -> dict[str, int]:
    distance = {node: 0 for node in seeds}
    queue = deque(sorted(seeds))
    while queue:
        node = queue.popleft()
        for neighbor in sorted(g.neighbors(node)):
            if neighbor not in distance:
                distance[neighbor] = distance[node] + 1
                queue.append(neighbor)
    return distance


def apply_updates(authority: SigningKey, identity: IdentityRegistry,
                  result: DiffusionResult) -> list[int]:
    """Write diffusion results back: one risk-update record plus one profile
    update per changed entity. CA only."""
    if authority.address != identity.ca_address:
        raise NotAuthorized("risk write-back requires the CA")
    indices = []
    for did in sorted(result.updates):
        update = result.updates[did]
        body = ErlUpdatedBody(
            subject=did_to_address(did),
            old_level=update.old_level,
            new_level=update.new_level,
            hops=update.hops,
        )
        index, _ = identity.ledger.append(authority, RecordKind.ERL_UPDATED, body.encode())
        indices.append(index)
        identity.update_profile(authority, did, risk_level=update.new_level)
    return indices
