"""Record kinds and their canonical payload bodies.

Every state transition in the system is persisted as one ledger record whose
payload is the canonical encoding of one of the body types below. Keeping all
codecs in one module lets the ledger decode payloads for querying and JSON
export without importing the higher-level modules.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .encoding import Reader, Writer

TRAJECTORY_ID_SIZE = 16
HASH_SIZE = 32

# Risk-model value ranges; wire encodings below (u8 / u16) assume them.
RISK_LEVEL_MAX = 10
ATTENUATION_SCALE = 1000


class RecordKind(enum.IntEnum):
    METADATA_REGISTERED = 0
    VC_APPLIED = 1
    VC_APPROVED = 2
    VC_REJECTED = 3
    VC_REVOKED = 4
    TRAJECTORY_ISSUED = 5
    INTERACTION_LOGGED = 6
    RECEIPT_LOGGED = 7
    PROFILE_UPDATED = 8
    RISK_REPORT_FILED = 9
    ERL_UPDATED = 10

    @property
    def label(self) -> str:
        return _KIND_LABELS[self]


_KIND_LABELS = {
    RecordKind.METADATA_REGISTERED: "MetadataRegistered",
    RecordKind.VC_APPLIED: "VcApplied",
    RecordKind.VC_APPROVED: "VcApproved",
    RecordKind.VC_REJECTED: "VcRejected",
    RecordKind.VC_REVOKED: "VcRevoked",
    RecordKind.TRAJECTORY_ISSUED: "TrajectoryIssued",
    RecordKind.INTERACTION_LOGGED: "InteractionLogged",
    RecordKind.RECEIPT_LOGGED: "ReceiptLogged",
    RecordKind.PROFILE_UPDATED: "ProfileUpdated",
    RecordKind.RISK_REPORT_FILED: "RiskReportFiled",
    RecordKind.ERL_UPDATED: "ErlUpdated",
}

KIND_BY_LABEL = {label: kind for kind, label in _KIND_LABELS.items()}


class NodeType(enum.IntEnum):
    AI_AGENT = 0
    LARGE_LANGUAGE_MODEL = 1
    MCP_SERVER = 2
    DATA_PROCESSING_MODULE = 3
    DECISION_SUPPORT_SYSTEM = 4
    SENSOR_INTERFACE = 5

    @property
    def label(self) -> str:
        return _NODE_TYPE_LABELS[self]


_NODE_TYPE_LABELS = {
    NodeType.AI_AGENT: "AiAgent",
    NodeType.LARGE_LANGUAGE_MODEL: "LargeLanguageModel",
    NodeType.MCP_SERVER: "McpServer",
    NodeType.DATA_PROCESSING_MODULE: "DataProcessingModule",
    NodeType.DECISION_SUPPORT_SYSTEM: "DecisionSupportSystem",
    NodeType.SENSOR_INTERFACE: "SensorInterface",
}

NODE_TYPE_BY_LABEL = {label: t for t, label in _NODE_TYPE_LABELS.items()}


@dataclass(frozen=True)
class MetadataRegisteredBody:
    """Registration of a new entity; the record author is the new DID."""

    node_type: NodeType
    functionality: str
    owner: bytes  # address of the responsible party
    metadata_uri: str
    risk_level: int  # initial assessment issued at registration
    attenuation: int  # per-mille

    def encode(self) -> bytes:
        w = Writer()
        w.u8(int(self.node_type))
        w.text(self.functionality)
        w.blob(self.owner)
        w.text(self.metadata_uri)
        w.u8(self.risk_level)
        w.u16(self.attenuation)
        return w.getvalue()

    @classmethod
    def decode(cls, data: bytes) -> "MetadataRegisteredBody":
        r = Reader(data)
        body = cls(
            node_type=NodeType(r.u8()),
            functionality=r.text(),
            owner=r.blob(),
            metadata_uri=r.text(),
            risk_level=r.u8(),
            attenuation=r.u16(),
        )
        r.expect_end()
        return body

    def to_json_obj(self) -> dict:
        return {
            "nodeType": self.node_type.label,
            "functionality": self.functionality,
            "owner": self.owner.hex(),
            "metadataUri": self.metadata_uri,
            "erl": self.risk_level,
            "beta": self.attenuation,
        }


@dataclass(frozen=True)
class VcAppliedBody:
    vc_hash: bytes  # hash of the claims document submitted by the applicant
    vc_uri: str

    def encode(self) -> bytes:
        return Writer().blob(self.vc_hash).text(self.vc_uri).getvalue()

    @classmethod
    def decode(cls, data: bytes) -> "VcAppliedBody":
        r = Reader(data)
        body = cls(vc_hash=r.blob(), vc_uri=r.text())
        r.expect_end()
        return body

    def to_json_obj(self) -> dict:
        return {"vcHash": self.vc_hash.hex(), "vcUri": self.vc_uri}


@dataclass(frozen=True)
class VcApprovedBody:
    """Issued credential: hash and locator on ledger, claims body off ledger."""

    subject: bytes
    vc_hash: bytes
    vc_uri: str
    issued_at: int
    expires_at: int | None
    issuer_signature: bytes

    def encode(self) -> bytes:
        w = Writer()
        w.blob(self.subject)
        w.blob(self.vc_hash)
        w.text(self.vc_uri)
        w.u64(self.issued_at)
        w.u8(1 if self.expires_at is not None else 0)
        w.u64(self.expires_at if self.expires_at is not None else 0)
        w.blob(self.issuer_signature)
        return w.getvalue()

    @classmethod
    def decode(cls, data: bytes) -> "VcApprovedBody":
        r = Reader(data)
        subject = r.blob()
        vc_hash = r.blob()
        vc_uri = r.text()
        issued_at = r.u64()
        has_expiry = r.u8()
        expires_at = r.u64()
        signature = r.blob()
        r.expect_end()
        return cls(
            subject=subject,
            vc_hash=vc_hash,
            vc_uri=vc_uri,
            issued_at=issued_at,
            expires_at=expires_at if has_expiry else None,
            issuer_signature=signature,
        )

    def to_json_obj(self) -> dict:
        return {
            "subject": self.subject.hex(),
            "vcHash": self.vc_hash.hex(),
            "vcUri": self.vc_uri,
            "issuedAt": self.issued_at,
            "expiresAt": self.expires_at,
            "issuerSignature": self.issuer_signature.hex(),
        }


@dataclass(frozen=True)
class VcRejectedBody:
    subject: bytes
    vc_hash: bytes

    def encode(self) -> bytes:
        return Writer().blob(self.subject).blob(self.vc_hash).getvalue()

    @classmethod
    def decode(cls, data: bytes) -> "VcRejectedBody":
        r = Reader(data)
        body = cls(subject=r.blob(), vc_hash=r.blob())
        r.expect_end()
        return body

    def to_json_obj(self) -> dict:
        return {"subject": self.subject.hex(), "vcHash": self.vc_hash.hex()}


@dataclass(frozen=True)
class VcRevokedBody:
    vc_hash: bytes

    def encode(self) -> bytes:
        return Writer().blob(self.vc_hash).getvalue()

    @classmethod
    def decode(cls, data: bytes) -> "VcRevokedBody":
        r = Reader(data)
        body = cls(vc_hash=r.blob())
        r.expect_end()
        return body

    def to_json_obj(self) -> dict:
        return {"vcHash": self.vc_hash.hex()}


@dataclass(frozen=True)
class TrajectoryIssuedBody:
    trajectory_id: bytes
    requester: bytes

    def encode(self) -> bytes:
        return Writer().blob(self.trajectory_id).blob(self.requester).getvalue()

    @classmethod
    def decode(cls, data: bytes) -> "TrajectoryIssuedBody":
        r = Reader(data)
        body = cls(trajectory_id=r.blob(), requester=r.blob())
        r.expect_end()
        return body

    def to_json_obj(self) -> dict:
        return {"trajectoryId": self.trajectory_id.hex(), "requester": self.requester.hex()}


@dataclass(frozen=True)
class InteractionLoggedBody:
    """One directed interaction edge; the record author is the caller."""

    callee: bytes
    trajectory_id: bytes
    action_type: str
    interaction_hash: bytes

    def encode(self) -> bytes:
        w = Writer()
        w.blob(self.callee)
        w.blob(self.trajectory_id)
        w.text(self.action_type)
        w.blob(self.interaction_hash)
        return w.getvalue()

    @classmethod
    def decode(cls, data: bytes) -> "InteractionLoggedBody":
        r = Reader(data)
        body = cls(
            callee=r.blob(),
            trajectory_id=r.blob(),
            action_type=r.text(),
            interaction_hash=r.blob(),
        )
        r.expect_end()
        return body

    def to_json_obj(self) -> dict:
        return {
            "callee": self.callee.hex(),
            "trajectoryId": self.trajectory_id.hex(),
            "actionType": self.action_type,
            "interactionHash": self.interaction_hash.hex(),
        }


@dataclass(frozen=True)
class ReceiptLoggedBody:
    """Callee-side acknowledgment; the record author is the callee."""

    caller: bytes
    trajectory_id: bytes
    interaction_hash: bytes

    def encode(self) -> bytes:
        w = Writer()
        w.blob(self.caller)
        w.blob(self.trajectory_id)
        w.blob(self.interaction_hash)
        return w.getvalue()

    @classmethod
    def decode(cls, data: bytes) -> "ReceiptLoggedBody":
        r = Reader(data)
        body = cls(caller=r.blob(), trajectory_id=r.blob(), interaction_hash=r.blob())
        r.expect_end()
        return body

    def to_json_obj(self) -> dict:
        return {
            "caller": self.caller.hex(),
            "trajectoryId": self.trajectory_id.hex(),
            "interactionHash": self.interaction_hash.hex(),
        }


@dataclass(frozen=True)
class ProfileUpdatedBody:
    subject: bytes
    new_version: int
    risk_level: int | None = None
    attenuation: int | None = None
    functionality: str | None = None

    def encode(self) -> bytes:
        w = Writer()
        w.blob(self.subject)
        w.u64(self.new_version)
        w.u8(1 if self.risk_level is not None else 0)
        w.u8(self.risk_level if self.risk_level is not None else 0)
        w.u8(1 if self.attenuation is not None else 0)
        w.u16(self.attenuation if self.attenuation is not None else 0)
        w.u8(1 if self.functionality is not None else 0)
        w.text(self.functionality if self.functionality is not None else "")
        return w.getvalue()

    @classmethod
    def decode(cls, data: bytes) -> "ProfileUpdatedBody":
        r = Reader(data)
        subject = r.blob()
        new_version = r.u64()
        has_level = r.u8()
        level = r.u8()
        has_att = r.u8()
        att = r.u16()
        has_fn = r.u8()
        fn = r.text()
        r.expect_end()
        return cls(
            subject=subject,
            new_version=new_version,
            risk_level=level if has_level else None,
            attenuation=att if has_att else None,
            functionality=fn if has_fn else None,
        )

    def to_json_obj(self) -> dict:
        return {
            "subject": self.subject.hex(),
            "newVersion": self.new_version,
            "erl": self.risk_level,
            "beta": self.attenuation,
            "functionality": self.functionality,
        }


@dataclass(frozen=True)
class RiskReportFiledBody:
    interval_start: int
    interval_end: int
    trajectory_ids: tuple[bytes, ...] = ()
    suspected: tuple[bytes, ...] = ()
    description: str = ""

    def encode(self) -> bytes:
        w = Writer()
        w.u64(self.interval_start)
        w.u64(self.interval_end)
        w.u32(len(self.trajectory_ids))
        for tid in self.trajectory_ids:
            w.blob(tid)
        w.u32(len(self.suspected))
        for addr in self.suspected:
            w.blob(addr)
        w.text(self.description)
        return w.getvalue()

    @classmethod
    def decode(cls, data: bytes) -> "RiskReportFiledBody":
        r = Reader(data)
        t0 = r.u64()
        t1 = r.u64()
        ids = tuple(r.blob() for _ in range(r.u32()))
        suspects = tuple(r.blob() for _ in range(r.u32()))
        description = r.text()
        r.expect_end()
        return cls(t0, t1, ids, suspects, description)

    def to_json_obj(self) -> dict:
        return {
            "interval": [self.interval_start, self.interval_end],
            "trajectoryIds": [tid.hex() for tid in self.trajectory_ids],
            "suspected": [s.hex() for s in self.suspected],
            "description": self.description,
        }


@dataclass(frozen=True)
class ErlUpdatedBody:
    subject: bytes
    old_level: int
    new_level: int
    hops: int

    def encode(self) -> bytes:
        w = Writer()
        w.blob(self.subject)
        w.u8(self.old_level)
        w.u8(self.new_level)
        w.u32(self.hops)
        return w.getvalue()

    @classmethod
    def decode(cls, data: bytes) -> "ErlUpdatedBody":
        r = Reader(data)
        body = cls(subject=r.blob(), old_level=r.u8(), new_level=r.u8(), hops=r.u32())
        r.expect_end()
        return body

    def to_json_obj(self) -> dict:
        return {
            "subject": self.subject.hex(),
            "oldErl": self.old_level,
            "newErl": self.new_level,
            "hops": self.hops,
        }


_BODY_CODECS = {
    RecordKind.METADATA_REGISTERED: MetadataRegisteredBody,
    RecordKind.VC_APPLIED: VcAppliedBody,
    RecordKind.VC_APPROVED: VcApprovedBody,
    RecordKind.VC_REJECTED: VcRejectedBody,
    RecordKind.VC_REVOKED: VcRevokedBody,
    RecordKind.TRAJECTORY_ISSUED: TrajectoryIssuedBody,
    RecordKind.INTERACTION_LOGGED: InteractionLoggedBody,
    RecordKind.RECEIPT_LOGGED: ReceiptLoggedBody,
    RecordKind.PROFILE_UPDATED: ProfileUpdatedBody,
    RecordKind.RISK_REPORT_FILED: RiskReportFiledBody,
    RecordKind.ERL_UPDATED: ErlUpdatedBody,
}


def decode_body(kind: RecordKind, payload: bytes):
    return _BODY_CODECS[kind].decode(payload)


def payload_trajectory_id(kind: RecordKind, payload: bytes) -> bytes | None:
    """Trajectory identifier carried by a payload, for the kinds that have one."""
    if kind in (RecordKind.TRAJECTORY_ISSUED, RecordKind.INTERACTION_LOGGED, RecordKind.RECEIPT_LOGGED):
        return decode_body(kind, payload).trajectory_id
    return None
