"""Trajectory-ID issuance and on-ledger interaction recording.

A task's interactions all share one 16-byte trajectory identifier, issued by
the authority after checking the requester's credentials. A call with several
receivers fans out into one record per callee, all stamped with the same
tick, and each callee is expected to acknowledge with a receipt. Reconciling
events against receipts is what exposes interrupted, tampered, or silently
dropped interactions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    BadInput,
    EmptyCallees,
    IdentityUnverified,
    NotAuthorized,
    UnknownDid,
    UnknownTrajectory,
)
from .identity import IdentityRegistry
from .keys import SigningKey, address_to_did, did_to_address
from .ledger import Ledger, LedgerRecord
from .records import (
    InteractionLoggedBody,
    ReceiptLoggedBody,
    RecordKind,
    TrajectoryIssuedBody,
)

NAMESPACE_SIZE = 8


def make_trajectory_id(ca_address: bytes, sequence: int) -> bytes:
    """16 bytes: the authority's 8-byte namespace plus a big-endian sequence."""
    return ca_address[:NAMESPACE_SIZE] + sequence.to_bytes(8, "big")


def trajectory_sequence(trajectory_id: bytes) -> int:
    return int.from_bytes(trajectory_id[NAMESPACE_SIZE:], "big")


@dataclass(frozen=True)
class InteractionEvent:
    """The six-field interaction record restored from one ledger entry."""

    caller: bytes
    callee: bytes
    trajectory_id: bytes
    action_type: str
    interaction_hash: bytes
    timestamp: int
    ledger_index: int = -1

    def to_json_obj(self) -> dict:
        return {
            "caller": address_to_did(self.caller),
            "callee": address_to_did(self.callee),
            "trajectoryId": self.trajectory_id.hex(),
            "actionType": self.action_type,
            "interactionHash": self.interaction_hash.hex(),
            "timestamp": self.timestamp,
        }


@dataclass(frozen=True)
class Receipt:
    caller: bytes
    callee: bytes
    trajectory_id: bytes
    interaction_hash: bytes
    timestamp: int
    ledger_index: int = -1

    def to_json_obj(self) -> dict:
        return {
            "caller": address_to_did(self.caller),
            "callee": address_to_did(self.callee),
            "trajectoryId": self.trajectory_id.hex(),
            "interactionHash": self.interaction_hash.hex(),
            "timestamp": self.timestamp,
        }


@dataclass
class ReconcileReport:
    """Exhaustive, disjoint classification of a trajectory's records."""

    trajectory_id: bytes
    matched: int = 0
    missing_receipt: list[InteractionEvent] = field(default_factory=list)
    orphan_receipt: list[Receipt] = field(default_factory=list)
    hash_mismatch: list[tuple[InteractionEvent, Receipt]] = field(default_factory=list)

    def to_json_obj(self) -> dict:
        return {
            "trajectoryId": self.trajectory_id.hex(),
            "matched": self.matched,
            "missingReceipt": [e.to_json_obj() for e in self.missing_receipt],
            "orphanReceipt": [r.to_json_obj() for r in self.orphan_receipt],
            "hashMismatch": [
                {"event": e.to_json_obj(), "receipt": r.to_json_obj()}
                for e, r in self.hash_mismatch
            ],
        }


def event_from_record(rec: LedgerRecord) -> InteractionEvent:
    body = rec.body()
    return InteractionEvent(
        caller=rec.author,
        callee=body.callee,
        trajectory_id=body.trajectory_id,
        action_type=body.action_type,
        interaction_hash=body.interaction_hash,
        timestamp=rec.timestamp,
        ledger_index=rec.index,
    )


def receipt_from_record(rec: LedgerRecord) -> Receipt:
    body = rec.body()
    return Receipt(
        caller=body.caller,
        callee=rec.author,
        trajectory_id=body.trajectory_id,
        interaction_hash=body.interaction_hash,
        timestamp=rec.timestamp,
        ledger_index=rec.index,
    )


class TrajectoryLog:
    """Issues trajectory identifiers and records interaction traffic."""

    def __init__(self, ledger: Ledger, identity: IdentityRegistry) -> None:
        self.ledger = ledger
        self.identity = identity

    @property
    def ca_address(self) -> bytes:
        return self.identity.ca_address

    def _issued_ids(self) -> set[bytes]:
        return {rec.body().trajectory_id
                for rec in self.ledger.query(kind=RecordKind.TRAJECTORY_ISSUED)}

    def is_issued(self, trajectory_id: bytes) -> bool:
        return trajectory_id in self._issued_ids()

    def issue_trajectory_id(self, ca: SigningKey, requester: str) -> bytes:
        """Hand out the next trajectory identifier after verifying the
        requester's registration and credential status."""
        if ca.address != self.ca_address:
            raise NotAuthorized("trajectory identifiers are issued by the CA")
        requester_addr = did_to_address(requester)
        if not self.identity.is_registered(requester_addr):
            raise UnknownDid(requester)
        if not self.identity.has_valid_credential(requester_addr):
            raise IdentityUnverified(requester)
        sequence = len(self.ledger.query(kind=RecordKind.TRAJECTORY_ISSUED)) + 1
        trajectory_id = make_trajectory_id(self.ca_address, sequence)
        body = TrajectoryIssuedBody(trajectory_id=trajectory_id, requester=requester_addr)
        self.ledger.append(ca, RecordKind.TRAJECTORY_ISSUED, body.encode())
        return trajectory_id

    def log_interaction(self, sender: SigningKey, callees: list[str],
                        trajectory_id: bytes, action_type: str,
                        interaction_hash: bytes) -> list[tuple[int, bytes]]:
        """Record one call; a multi-callee call fans out into one record per
        callee, all sharing the caller's tick."""
        if not callees:
            raise EmptyCallees("a call needs at least one callee")
        if not self.identity.is_registered(sender.address):
            raise UnknownDid(sender.did)
        callee_addrs = []
        for callee in callees:
            addr = did_to_address(callee)
            if not self.identity.is_registered(addr):
                raise UnknownDid(callee)
            if addr == sender.address:
                raise BadInput(f"caller and callee coincide: {callee}")
            callee_addrs.append(addr)
        if not self.is_issued(trajectory_id):
            raise UnknownTrajectory(trajectory_id.hex())
        shared_tick = self.ledger.clock.current + 1  # all siblings share the first tick
        results = []
        for addr in callee_addrs:
            body = InteractionLoggedBody(
                callee=addr,
                trajectory_id=trajectory_id,
                action_type=action_type,
                interaction_hash=interaction_hash,
            )
            results.append(self.ledger.append(
                sender, RecordKind.INTERACTION_LOGGED, body.encode(),
                timestamp=shared_tick))
        return results

    def acknowledge(self, callee: SigningKey, caller: str, trajectory_id: bytes,
                    interaction_hash: bytes) -> tuple[int, bytes]:
        if not self.identity.is_registered(callee.address):
            raise UnknownDid(callee.did)
        body = ReceiptLoggedBody(
            caller=did_to_address(caller),
            trajectory_id=trajectory_id,
            interaction_hash=interaction_hash,
        )
        return self.ledger.append(callee, RecordKind.RECEIPT_LOGGED, body.encode())

    def events_of(self, trajectory_id: bytes) -> list[InteractionEvent]:
        return [event_from_record(rec) for rec in self.ledger.query(
            kind=RecordKind.INTERACTION_LOGGED, trajectory_id=trajectory_id)]

    def receipts_of(self, trajectory_id: bytes) -> list[Receipt]:
        return [receipt_from_record(rec) for rec in self.ledger.query(
            kind=RecordKind.RECEIPT_LOGGED, trajectory_id=trajectory_id)]

    def reconcile(self, trajectory_id: bytes) -> ReconcileReport:
        """Match caller-side events to callee-side receipts.

        Every event lands in exactly one bucket: matched when a receipt
        agrees on (caller, callee, hash); hash_mismatch when a receipt for
        the same pair disagrees on the hash; missing_receipt otherwise.
        Receipts that match no event are orphans.
        """
        if not self.is_issued(trajectory_id):
            raise UnknownTrajectory(trajectory_id.hex())
        events = self.events_of(trajectory_id)
        receipts = self.receipts_of(trajectory_id)
        report = ReconcileReport(trajectory_id=trajectory_id)
        free_receipts = list(receipts)

        unmatched_events = []
        for event in events:
            exact = next((r for r in free_receipts
                          if r.caller == event.caller and r.callee == event.callee
                          and r.interaction_hash == event.interaction_hash), None)
            if exact is not None:
                free_receipts.remove(exact)
                report.matched += 1
            else:
                unmatched_events.append(event)

        for event in unmatched_events:
            partner = next((r for r in free_receipts
                            if r.caller == event.caller and r.callee == event.callee), None)
            if partner is not None:
                free_receipts.remove(partner)
                report.hash_mismatch.append((event, partner))
            else:
                report.missing_receipt.append(event)

        report.orphan_receipt = free_receipts
        return report
