"""DID document management and the verifiable-credential lifecycle.

All state lives on the ledger; this module materializes a view by folding
records and appends new records for every mutation. Credential claim bodies
stay off-ledger in a pluggable store addressed by URI; only their hash and
locator are recorded, so sensitive content never touches the chain.

Two hashes appear in the lifecycle: an application commits to the hash of the
claims document the applicant deposited, and the issued credential gets its
own hash over (issuer, subject, claims, issued_at, expires_at), which is what
presentations reference and revocation targets.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

from .encoding import Writer, encode_claims
from .errors import (
    AlreadyRegistered,
    BadInput,
    DuplicateApplication,
    NoPendingApplication,
    NotAuthorized,
    RangeViolation,
    UnknownDid,
    UnknownVc,
)
from .keys import SigningKey, address_to_did, did_to_address, sha256, verify_signature
from .ledger import Ledger
from .records import (
    ATTENUATION_SCALE,
    RISK_LEVEL_MAX,
    MetadataRegisteredBody,
    NodeType,
    ProfileUpdatedBody,
    RecordKind,
    VcAppliedBody,
    VcApprovedBody,
    VcRejectedBody,
    VcRevokedBody,
)

DEFAULT_REPLAY_WINDOW = 300


@dataclass
class SystemConfig:
    """Genesis-time knobs: the replay window and profile defaults."""

    replay_window: int = DEFAULT_REPLAY_WINDOW
    default_risk_level: int = 0
    default_attenuation: int = 500


class CredentialStore:
    """Off-ledger storage for credential claim documents, keyed by URI."""

    def put(self, uri: str, claims: bytes) -> None:
        raise NotImplementedError

    def get(self, uri: str) -> bytes | None:
        raise NotImplementedError


class InMemoryCredentialStore(CredentialStore):
    def __init__(self) -> None:
        self._docs: dict[str, bytes] = {}

    def put(self, uri: str, claims: bytes) -> None:
        self._docs[uri] = bytes(claims)

    def get(self, uri: str) -> bytes | None:
        return self._docs.get(uri)


class DirectoryCredentialStore(CredentialStore):
    """File-per-document store used by the CLI workspace."""

    def __init__(self, directory: Path | str) -> None:
        self._dir = Path(directory)
        self._dir.mkdir(parents=True, exist_ok=True)

    def _path(self, uri: str) -> Path:
        return self._dir / (sha256(uri.encode("utf-8")).hex() + ".claims")

    def put(self, uri: str, claims: bytes) -> None:
        self._path(uri).write_bytes(claims)

    def get(self, uri: str) -> bytes | None:
        p = self._path(uri)
        return p.read_bytes() if p.exists() else None


class ApplicationStatus(enum.Enum):
    PENDING = "Pending"
    APPROVED = "Approved"
    REJECTED = "Rejected"
    REVOKED = "Revoked"


class RejectReason(enum.Enum):
    NOT_APPROVED = "NotApproved"
    REVOKED = "Revoked"
    EXPIRED = "Expired"
    FORGED_OR_TAMPERED = "ForgedOrTampered"
    HOLDER_MISMATCH = "HolderMismatch"
    BAD_HOLDER_SIGNATURE = "BadHolderSignature"
    STALE = "Stale"
    REPLAY = "Replay"


@dataclass(frozen=True)
class VerifyResult:
    accepted: bool
    reason: RejectReason | None = None

    def to_json_obj(self) -> dict:
        return {"accepted": self.accepted,
                "reason": self.reason.value if self.reason else None}


@dataclass
class DidDocument:
    did: str
    node_type: NodeType
    functionality: str
    owner: str
    version: int
    metadata_uri: str
    capabilities: list[bytes]
    risk_level: int
    attenuation: int

    def to_json_obj(self) -> dict:
        return {
            "did": self.did,
            "nodeType": self.node_type.label,
            "functionality": self.functionality,
            "owner": self.owner,
            "version": self.version,
            "metadataUri": self.metadata_uri,
            "capabilities": [h.hex() for h in self.capabilities],
            "erl": self.risk_level,
            "beta": self.attenuation,
        }


@dataclass(frozen=True)
class VerifiableCredential:
    issuer: str
    subject: str
    claims: bytes
    issued_at: int
    expires_at: int | None
    vc_hash: bytes
    vc_uri: str
    issuer_signature: bytes

    def to_json_obj(self) -> dict:
        return {
            "issuer": self.issuer,
            "subject": self.subject,
            "claims": self.claims.hex(),
            "issuedAt": self.issued_at,
            "expiresAt": self.expires_at,
            "vcHash": self.vc_hash.hex(),
            "vcUri": self.vc_uri,
            "issuerSignature": self.issuer_signature.hex(),
        }


@dataclass(frozen=True)
class Presentation:
    """Holder-bound, nonce-protected showing of one credential."""

    vc_hash: bytes
    holder: bytes
    nonce: bytes
    timestamp: int
    holder_signature: bytes

    def to_json_obj(self) -> dict:
        return {
            "vcHash": self.vc_hash.hex(),
            "holder": address_to_did(self.holder),
            "nonce": self.nonce.hex(),
            "timestamp": self.timestamp,
            "holderSignature": self.holder_signature.hex(),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Presentation":
        return cls(
            vc_hash=bytes.fromhex(obj["vcHash"]),
            holder=did_to_address(obj["holder"]),
            nonce=bytes.fromhex(obj["nonce"]),
            timestamp=int(obj["timestamp"]),
            holder_signature=bytes.fromhex(obj["holderSignature"]),
        )


def credential_hash(issuer: bytes, subject: bytes, claims: bytes,
                    issued_at: int, expires_at: int | None) -> bytes:
    w = Writer()
    w.blob(issuer)
    w.blob(subject)
    w.blob(claims)
    w.u64(issued_at)
    w.u8(1 if expires_at is not None else 0)
    w.u64(expires_at if expires_at is not None else 0)
    return sha256(w.getvalue())


def presentation_signing_bytes(vc_hash: bytes, holder: bytes, nonce: bytes,
                               timestamp: int) -> bytes:
    w = Writer()
    w.blob(vc_hash)
    w.blob(holder)
    w.blob(nonce)
    w.u64(timestamp)
    return w.getvalue()


def make_presentation(holder_key: SigningKey, vc_hash: bytes, nonce: bytes,
                      timestamp: int) -> Presentation:
    signature = holder_key.sign(
        presentation_signing_bytes(vc_hash, holder_key.address, nonce, timestamp))
    return Presentation(vc_hash=vc_hash, holder=holder_key.address, nonce=nonce,
                        timestamp=timestamp, holder_signature=signature)


@dataclass
class _DocState:
    node_type: NodeType
    functionality: str
    owner: bytes
    version: int
    metadata_uri: str
    capabilities: list[bytes]
    risk_level: int
    attenuation: int
    public_key: bytes


@dataclass
class _CredState:
    issuer: bytes
    issuer_public_key: bytes
    subject: bytes
    vc_uri: str
    issued_at: int
    expires_at: int | None
    signature: bytes


@dataclass
class _Application:
    applicant: bytes
    vc_hash: bytes
    vc_uri: str
    status: ApplicationStatus


class IdentityRegistry:
    """Identity view over a ledger plus the write operations that extend it.

    A single authority configured at genesis approves credentials; everything
    else is derivable by replaying the chain, which ``_catch_up`` does
    incrementally so several registries can share one ledger.
    """

    def __init__(self, ledger: Ledger, ca_address: bytes,
                 store: CredentialStore | None = None,
                 config: SystemConfig | None = None) -> None:
        self.ledger = ledger
        self.ca_address = ca_address
        self.store = store if store is not None else InMemoryCredentialStore()
        self.config = config if config is not None else SystemConfig()
        self._docs: dict[bytes, _DocState] = {}
        self._applications: list[_Application] = []
        self._credentials: dict[bytes, _CredState] = {}
        self._revoked: set[bytes] = set()
        self._seen_nonces: dict[bytes, int] = {}
        self._cursor = 0

    # --- materialization ---

    def _catch_up(self) -> None:
        while self._cursor < len(self.ledger.records):
            self._apply(self.ledger.records[self._cursor])
            self._cursor += 1

    def _apply(self, rec) -> None:
        if rec.kind == RecordKind.METADATA_REGISTERED:
            body = rec.body()
            self._docs[rec.author] = _DocState(
                node_type=body.node_type,
                functionality=body.functionality,
                owner=body.owner,
                version=1,
                metadata_uri=body.metadata_uri,
                capabilities=[],
                risk_level=body.risk_level,
                attenuation=body.attenuation,
                public_key=rec.author_public_key,
            )
        elif rec.kind == RecordKind.VC_APPLIED:
            body = rec.body()
            self._applications.append(_Application(
                applicant=rec.author, vc_hash=body.vc_hash, vc_uri=body.vc_uri,
                status=ApplicationStatus.PENDING))
        elif rec.kind == RecordKind.VC_APPROVED:
            body = rec.body()
            app = self._oldest_pending(body.subject)
            if app is not None:
                app.status = ApplicationStatus.APPROVED
            self._credentials[body.vc_hash] = _CredState(
                issuer=rec.author,
                issuer_public_key=rec.author_public_key,
                subject=body.subject,
                vc_uri=body.vc_uri,
                issued_at=body.issued_at,
                expires_at=body.expires_at,
                signature=body.issuer_signature,
            )
            doc = self._docs.get(body.subject)
            if doc is not None and body.vc_hash not in doc.capabilities:
                doc.capabilities.append(body.vc_hash)
        elif rec.kind == RecordKind.VC_REJECTED:
            body = rec.body()
            for app in self._applications:
                if (app.applicant == body.subject and app.vc_hash == body.vc_hash
                        and app.status == ApplicationStatus.PENDING):
                    app.status = ApplicationStatus.REJECTED
                    break
        elif rec.kind == RecordKind.VC_REVOKED:
            body = rec.body()
            self._revoked.add(body.vc_hash)
            cred = self._credentials.get(body.vc_hash)
            if cred is not None:
                doc = self._docs.get(cred.subject)
                if doc is not None and body.vc_hash in doc.capabilities:
                    doc.capabilities.remove(body.vc_hash)
        elif rec.kind == RecordKind.PROFILE_UPDATED:
            body = rec.body()
            doc = self._docs.get(body.subject)
            if doc is None:
                return
            doc.version = body.new_version
            if body.risk_level is not None:
                doc.risk_level = body.risk_level
            if body.attenuation is not None:
                doc.attenuation = body.attenuation
            if body.functionality is not None:
                doc.functionality = body.functionality

    def _oldest_pending(self, applicant: bytes) -> _Application | None:
        for app in self._applications:
            if app.applicant == applicant and app.status == ApplicationStatus.PENDING:
                return app
        return None

    # --- registration and profiles ---

    def register_metadata(self, account: SigningKey, metadata_uri: str, *,
                          node_type: NodeType = NodeType.AI_AGENT,
                          functionality: str = "",
                          owner: str | None = None) -> str:
        self._catch_up()
        if account.address in self._docs:
            raise AlreadyRegistered(account.did)
        owner_addr = did_to_address(owner) if owner is not None else account.address
        body = MetadataRegisteredBody(
            node_type=node_type,
            functionality=functionality,
            owner=owner_addr,
            metadata_uri=metadata_uri,
            risk_level=self.config.default_risk_level,
            attenuation=self.config.default_attenuation,
        )
        self.ledger.append(account, RecordKind.METADATA_REGISTERED, body.encode())
        self._catch_up()
        return account.did

    def resolve_did(self, did: str) -> DidDocument:
        self._catch_up()
        address = did_to_address(did)
        state = self._docs.get(address)
        if state is None:
            raise UnknownDid(did)
        return DidDocument(
            did=did,
            node_type=state.node_type,
            functionality=state.functionality,
            owner=address_to_did(state.owner),
            version=state.version,
            metadata_uri=state.metadata_uri,
            capabilities=list(state.capabilities),
            risk_level=state.risk_level,
            attenuation=state.attenuation,
        )

    def is_registered(self, address: bytes) -> bool:
        self._catch_up()
        return address in self._docs

    def public_key_of(self, address: bytes) -> bytes | None:
        self._catch_up()
        state = self._docs.get(address)
        return state.public_key if state else None

    def update_profile(self, authority: SigningKey, did: str, *,
                       risk_level: int | None = None,
                       attenuation: int | None = None,
                       functionality: str | None = None) -> int:
        self._catch_up()
        address = did_to_address(did)
        state = self._docs.get(address)
        if state is None:
            raise UnknownDid(did)
        if authority.address != self.ca_address and authority.address != state.owner:
            raise NotAuthorized("profile updates require the CA or the document owner")
        if risk_level is not None and not (0 <= risk_level <= RISK_LEVEL_MAX):
            raise RangeViolation(f"risk level {risk_level} outside [0, {RISK_LEVEL_MAX}]")
        if attenuation is not None and not (0 <= attenuation <= ATTENUATION_SCALE):
            raise RangeViolation(f"attenuation {attenuation} outside [0, {ATTENUATION_SCALE}]")
        body = ProfileUpdatedBody(
            subject=address,
            new_version=state.version + 1,
            risk_level=risk_level,
            attenuation=attenuation,
            functionality=functionality,
        )
        self.ledger.append(authority, RecordKind.PROFILE_UPDATED, body.encode())
        self._catch_up()
        return self._docs[address].version

    # --- credential lifecycle ---

    def apply_vc(self, account: SigningKey, vc_hash: bytes, vc_uri: str,
                 claims: dict[str, str] | bytes | None = None) -> int:
        """File a credential application; returns the ledger index of the record."""
        self._catch_up()
        if account.address not in self._docs:
            raise UnknownDid(account.did)
        for app in self._applications:
            if (app.applicant == account.address and app.vc_hash == vc_hash
                    and app.status == ApplicationStatus.PENDING):
                raise DuplicateApplication(vc_hash.hex())
        if claims is not None:
            claim_bytes = encode_claims(claims) if isinstance(claims, dict) else bytes(claims)
            if sha256(claim_bytes) != vc_hash:
                raise BadInput("vc_hash does not match the supplied claims document")
            self.store.put(vc_uri, claim_bytes)
        body = VcAppliedBody(vc_hash=vc_hash, vc_uri=vc_uri)
        index, _ = self.ledger.append(account, RecordKind.VC_APPLIED, body.encode())
        self._catch_up()
        return index

    def application_status(self, applicant: str, vc_hash: bytes) -> ApplicationStatus:
        self._catch_up()
        address = did_to_address(applicant)
        for app in reversed(self._applications):
            if app.applicant == address and app.vc_hash == vc_hash:
                if app.status == ApplicationStatus.APPROVED:
                    issued_hash = self._find_credential_for(address, app.vc_uri)
                    if issued_hash is not None and issued_hash in self._revoked:
                        return ApplicationStatus.REVOKED
                return app.status
        raise UnknownVc(vc_hash.hex())

    def _find_credential_for(self, subject: bytes, vc_uri: str) -> bytes | None:
        for h, cred in self._credentials.items():
            if cred.subject == subject and cred.vc_uri == vc_uri:
                return h
        return None

    def approve_vc(self, issuer: SigningKey, applicant: str,
                   expires_at: int | None = None) -> VerifiableCredential:
        self._catch_up()
        if issuer.address != self.ca_address:
            raise NotAuthorized("only the configured CA may approve applications")
        applicant_addr = did_to_address(applicant)
        app = self._oldest_pending(applicant_addr)
        if app is None:
            raise NoPendingApplication(applicant)
        claims = self.store.get(app.vc_uri)
        if claims is None:
            raise BadInput(f"claims document missing from store: {app.vc_uri}")
        if sha256(claims) != app.vc_hash:
            raise BadInput("claims document does not match the applied hash")
        issued_at = self.ledger.clock.current + 1  # tick the approval record will get
        vc_hash = credential_hash(issuer.address, applicant_addr, claims,
                                  issued_at, expires_at)
        signature = issuer.sign(vc_hash)
        body = VcApprovedBody(
            subject=applicant_addr,
            vc_hash=vc_hash,
            vc_uri=app.vc_uri,
            issued_at=issued_at,
            expires_at=expires_at,
            issuer_signature=signature,
        )
        self.ledger.append(issuer, RecordKind.VC_APPROVED, body.encode())
        self._catch_up()
        return VerifiableCredential(
            issuer=address_to_did(issuer.address),
            subject=applicant,
            claims=claims,
            issued_at=issued_at,
            expires_at=expires_at,
            vc_hash=vc_hash,
            vc_uri=app.vc_uri,
            issuer_signature=signature,
        )

    def reject_vc(self, issuer: SigningKey, applicant: str) -> ApplicationStatus:
        self._catch_up()
        if issuer.address != self.ca_address:
            raise NotAuthorized("only the configured CA may reject applications")
        applicant_addr = did_to_address(applicant)
        app = self._oldest_pending(applicant_addr)
        if app is None:
            raise NoPendingApplication(applicant)
        body = VcRejectedBody(subject=applicant_addr, vc_hash=app.vc_hash)
        self.ledger.append(issuer, RecordKind.VC_REJECTED, body.encode())
        self._catch_up()
        return ApplicationStatus.REJECTED

    def revoke_vc(self, issuer: SigningKey, vc_hash: bytes) -> None:
        self._catch_up()
        if issuer.address != self.ca_address:
            raise NotAuthorized("only the configured CA may revoke credentials")
        if vc_hash not in self._credentials:
            raise UnknownVc(vc_hash.hex())
        if vc_hash in self._revoked:
            return  # revocation is permanent, repeating it is a no-op
        body = VcRevokedBody(vc_hash=vc_hash)
        self.ledger.append(issuer, RecordKind.VC_REVOKED, body.encode())
        self._catch_up()

    def is_revoked(self, vc_hash: bytes) -> bool:
        self._catch_up()
        return vc_hash in self._revoked

    def credential_of(self, vc_hash: bytes) -> VerifiableCredential | None:
        self._catch_up()
        cred = self._credentials.get(vc_hash)
        if cred is None:
            return None
        claims = self.store.get(cred.vc_uri) or b""
        return VerifiableCredential(
            issuer=address_to_did(cred.issuer),
            subject=address_to_did(cred.subject),
            claims=claims,
            issued_at=cred.issued_at,
            expires_at=cred.expires_at,
            vc_hash=vc_hash,
            vc_uri=cred.vc_uri,
            issuer_signature=cred.signature,
        )

    def has_valid_credential(self, address: bytes, now: int | None = None) -> bool:
        """True when the entity holds at least one approved, unrevoked,
        unexpired credential; this is the identity gate for trajectory issuance."""
        self._catch_up()
        if now is None:
            now = self.ledger.clock.current
        doc = self._docs.get(address)
        if doc is None:
            return False
        for vc_hash in doc.capabilities:
            if vc_hash in self._revoked:
                continue
            cred = self._credentials.get(vc_hash)
            if cred is None:
                continue
            if cred.expires_at is not None and now > cred.expires_at:
                continue
            return True
        return False

    # --- presentation verification ---

    def verify_presentation(self, p: Presentation, now: int) -> VerifyResult:
        """Run the full acceptance checklist; the first failing check names
        the rejection reason. Only a fully accepted presentation consumes its
        nonce."""
        self._catch_up()
        cred = self._credentials.get(p.vc_hash)
        if cred is None:
            return VerifyResult(False, RejectReason.NOT_APPROVED)
        if p.vc_hash in self._revoked:
            return VerifyResult(False, RejectReason.REVOKED)
        if cred.expires_at is not None and now > cred.expires_at:
            return VerifyResult(False, RejectReason.EXPIRED)
        if cred.issuer != self.ca_address or not verify_signature(
                cred.issuer_public_key, p.vc_hash, cred.signature):
            return VerifyResult(False, RejectReason.FORGED_OR_TAMPERED)
        claims = self.store.get(cred.vc_uri)
        if claims is None or credential_hash(cred.issuer, cred.subject, claims,
                                             cred.issued_at, cred.expires_at) != p.vc_hash:
            return VerifyResult(False, RejectReason.FORGED_OR_TAMPERED)
        if p.holder != cred.subject:
            return VerifyResult(False, RejectReason.HOLDER_MISMATCH)
        holder_doc = self._docs.get(p.holder)
        if holder_doc is None or not verify_signature(
                holder_doc.public_key,
                presentation_signing_bytes(p.vc_hash, p.holder, p.nonce, p.timestamp),
                p.holder_signature):
            return VerifyResult(False, RejectReason.BAD_HOLDER_SIGNATURE)
        if abs(now - p.timestamp) > self.config.replay_window:
            return VerifyResult(False, RejectReason.STALE)
        if p.nonce in self._seen_nonces:
            return VerifyResult(False, RejectReason.REPLAY)
        self._seen_nonces[p.nonce] = now
        self._prune_nonces(now)
        return VerifyResult(True)

    def _prune_nonces(self, now: int) -> None:
        horizon = now - self.config.replay_window
        if horizon <= 0:
            return
        stale = [n for n, t in self._seen_nonces.items() if t < horizon]
        for n in stale:
            del self._seen_nonces[n]

    # --- nonce persistence for out-of-process verifiers (CLI) ---

    def load_nonces(self, path: Path | str) -> None:
        p = Path(path)
        if p.exists():
            data = json.loads(p.read_text())
            self._seen_nonces = {bytes.fromhex(k): v for k, v in data.items()}

    def save_nonces(self, path: Path | str) -> None:
        Path(path).write_text(json.dumps(
            {k.hex(): v for k, v in self._seen_nonces.items()}, sort_keys=True))
