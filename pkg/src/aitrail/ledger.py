"""Append-only, hash-chained, signature-verified record log.

This is the system's single source of truth: every other module persists its
state transitions here and materializes views by replaying records. There are
no blocks and no consensus, just one flat chain, one writer, a logical clock.

Each record's hash covers (index, kind, author, payload, timestamp,
prev_hash); the author signs that hash. The author's public key travels in
the storage envelope next to the record (it is not part of the hashed tuple)
so a chain can be verified from the file alone: the key must hash back to the
author address, and the signature must verify under it.
"""

from __future__ import annotations

import json
import struct
import threading
from dataclasses import dataclass
from pathlib import Path

from .encoding import Reader, Writer
from .errors import LedgerClosed
from .keys import SigningKey, derive_address, sha256, verify_signature
from .records import RecordKind, decode_body, payload_trajectory_id

GENESIS_HASH = bytes(32)
_FILE_MAGIC = b"AITRAIL1"


@dataclass(frozen=True)
class LedgerRecord:
    index: int
    kind: RecordKind
    author: bytes
    author_public_key: bytes
    payload: bytes
    timestamp: int
    prev_hash: bytes
    record_hash: bytes
    signature: bytes

    def body(self):
        return decode_body(self.kind, self.payload)

    def to_json_obj(self) -> dict:
        return {
            "index": self.index,
            "kind": self.kind.label,
            "author": self.author.hex(),
            "authorPublicKey": self.author_public_key.hex(),
            "payload": self.payload.hex(),
            "body": self.body().to_json_obj(),
            "timestamp": self.timestamp,
            "prevHash": self.prev_hash.hex(),
            "recordHash": self.record_hash.hex(),
            "signature": self.signature.hex(),
        }


def record_hash_of(index: int, kind: RecordKind, author: bytes, payload: bytes,
                   timestamp: int, prev_hash: bytes) -> bytes:
    w = Writer()
    w.u64(index)
    w.u8(int(kind))
    w.blob(author)
    w.blob(payload)
    w.u64(timestamp)
    w.blob(prev_hash)
    return sha256(w.getvalue())


@dataclass(frozen=True)
class ChainReport:
    valid: bool
    first_bad_index: int | None = None
    reason: str | None = None
    length: int = 0

    def to_json_obj(self) -> dict:
        return {
            "valid": self.valid,
            "firstBadIndex": self.first_bad_index,
            "reason": self.reason,
            "length": self.length,
        }


class LogicalClock:
    """Strictly increasing tick counter standing in for block time."""

    def __init__(self, current: int = 0) -> None:
        self.current = current

    def tick(self) -> int:
        self.current += 1
        return self.current

    def advance_to(self, tick: int) -> int:
        if tick < self.current:
            raise ValueError(f"clock cannot move backwards ({tick} < {self.current})")
        self.current = tick
        return self.current


def _encode_stored(rec: LedgerRecord) -> bytes:
    w = Writer()
    w.u64(rec.index)
    w.u8(int(rec.kind))
    w.blob(rec.author)
    w.blob(rec.author_public_key)
    w.blob(rec.payload)
    w.u64(rec.timestamp)
    w.blob(rec.prev_hash)
    w.blob(rec.record_hash)
    w.blob(rec.signature)
    return w.getvalue()


def _decode_stored(data: bytes) -> LedgerRecord:
    r = Reader(data)
    rec = LedgerRecord(
        index=r.u64(),
        kind=RecordKind(r.u8()),
        author=r.blob(),
        author_public_key=r.blob(),
        payload=r.blob(),
        timestamp=r.u64(),
        prev_hash=r.blob(),
        record_hash=r.blob(),
        signature=r.blob(),
    )
    r.expect_end()
    return rec


class Ledger:
    """In-memory chain with optional write-through persistence to one file."""

    def __init__(self, path: Path | str | None = None) -> None:
        self.path = Path(path) if path is not None else None
        self.records: list[LedgerRecord] = []
        self.clock = LogicalClock()
        self._closed = False
        self._write_lock = threading.Lock()
        self._fh = None
        if self.path is not None:
            if self.path.exists() and self.path.stat().st_size > 0:
                self._load()
            else:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "wb") as fh:
                    fh.write(_FILE_MAGIC)
            self._fh = open(self.path, "ab")

    # --- persistence ---

    def _load(self) -> None:
        data = self.path.read_bytes()
        if data[: len(_FILE_MAGIC)] != _FILE_MAGIC:
            raise ValueError(f"{self.path} is not a ledger file")
        pos = len(_FILE_MAGIC)
        while pos < len(data):
            (length,) = struct.unpack(">I", data[pos : pos + 4])
            pos += 4
            self.records.append(_decode_stored(data[pos : pos + length]))
            pos += length
        if self.records:
            self.clock = LogicalClock(self.records[-1].timestamp)

    @classmethod
    def open(cls, path: Path | str) -> "Ledger":
        return cls(path)

    def close(self) -> None:
        self._closed = True
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    # --- writes ---

    def append(self, author_key: SigningKey, kind: RecordKind, payload: bytes,
               timestamp: int | None = None) -> tuple[int, bytes]:
        """Persist one signed record; returns (index, record_hash).

        The logical clock advances on every append. An explicit timestamp
        (used by fan-out writes that must share one tick) may not precede the
        previous record's timestamp.
        """
        if self._closed:
            raise LedgerClosed("ledger has been closed")
        with self._write_lock:
            tick = self.clock.tick()
            ts = timestamp if timestamp is not None else tick
            if self.records and ts < self.records[-1].timestamp:
                raise ValueError("timestamp would break ledger time ordering")
            index = len(self.records)
            prev_hash = self.records[-1].record_hash if self.records else GENESIS_HASH
            rhash = record_hash_of(index, kind, author_key.address, payload, ts, prev_hash)
            rec = LedgerRecord(
                index=index,
                kind=kind,
                author=author_key.address,
                author_public_key=author_key.public_key,
                payload=payload,
                timestamp=ts,
                prev_hash=prev_hash,
                record_hash=rhash,
                signature=author_key.sign(rhash),
            )
            self.records.append(rec)
            if self._fh is not None:
                stored = _encode_stored(rec)
                self._fh.write(struct.pack(">I", len(stored)) + stored)
                self._fh.flush()
            return index, rhash

    # --- reads ---

    def __len__(self) -> int:
        return len(self.records)

    def verify_chain(self) -> ChainReport:
        """Check every record invariant; reports the lowest violating index.

        Checks per record, in order: index contiguity, hash linkage to the
        predecessor, record-hash recomputation, public key hashing to the
        author address, and the signature over the record hash. Verification
        stops at the first failure, so a broken chain costs only the prefix.
        """
        prev_hash = GENESIS_HASH
        prev_ts = 0
        for pos, rec in enumerate(self.records):
            if rec.index != pos:
                return ChainReport(False, pos, "index not contiguous", len(self.records))
            if rec.prev_hash != prev_hash:
                return ChainReport(False, pos, "prev_hash mismatch", len(self.records))
            if rec.timestamp < prev_ts:
                return ChainReport(False, pos, "timestamp regression", len(self.records))
            expected = record_hash_of(rec.index, rec.kind, rec.author, rec.payload,
                                      rec.timestamp, rec.prev_hash)
            if expected != rec.record_hash:
                return ChainReport(False, pos, "record_hash mismatch", len(self.records))
            if derive_address(rec.author_public_key) != rec.author:
                return ChainReport(False, pos, "public key does not match author", len(self.records))
            if not verify_signature(rec.author_public_key, rec.record_hash, rec.signature):
                return ChainReport(False, pos, "signature invalid", len(self.records))
            prev_hash = rec.record_hash
            prev_ts = rec.timestamp
        return ChainReport(True, None, None, len(self.records))

    def query(self, kind: RecordKind | None = None, author: bytes | None = None,
              trajectory_id: bytes | None = None,
              time_interval: tuple[int, int] | None = None) -> list[LedgerRecord]:
        """All matching records in index order; empty list when nothing matches.

        The trajectory filter only ever matches kinds that carry a trajectory
        identifier in their payload.
        """
        out = []
        for rec in self.records:
            if kind is not None and rec.kind != kind:
                continue
            if author is not None and rec.author != author:
                continue
            if time_interval is not None:
                t0, t1 = time_interval
                if not (t0 <= rec.timestamp <= t1):
                    continue
            if trajectory_id is not None:
                if payload_trajectory_id(rec.kind, rec.payload) != trajectory_id:
                    continue
            out.append(rec)
        return out

    def export_json(self) -> str:
        """One JSON object per record, hashes hex-encoded, for inspection."""
        return json.dumps([rec.to_json_obj() for rec in self.records],
                          indent=2, sort_keys=True)
