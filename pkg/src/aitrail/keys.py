"""Ed25519 key handling and address derivation.

An entity's on-ledger address is the SHA-256 hash of its raw 32-byte public
key; the hex form, prefixed ``did:aat:``, doubles as its decentralized
identifier. Ed25519 was chosen because signatures are deterministic, which
keeps ledger bytes reproducible across runs.
"""

from __future__ import annotations

import hashlib
import os
from functools import lru_cache

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .errors import MalformedKey, SigningFailure

ADDRESS_SIZE = 32
PUBLIC_KEY_SIZE = 32
SEED_SIZE = 32
DID_PREFIX = "did:aat:"


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def derive_address(public_key: bytes) -> bytes:
    """32-byte address of an entity: the SHA-256 hash of its public key."""
    if not isinstance(public_key, (bytes, bytearray)) or len(public_key) != PUBLIC_KEY_SIZE:
        raise MalformedKey(f"expected {PUBLIC_KEY_SIZE}-byte Ed25519 public key")
    return sha256(bytes(public_key))


def address_to_did(address: bytes) -> str:
    return DID_PREFIX + address.hex()


def did_to_address(did: str) -> bytes:
    """Parse a ``did:aat:<hex>`` string back into its 32-byte address."""
    if not did.startswith(DID_PREFIX):
        raise MalformedKey(f"not a {DID_PREFIX} identifier: {did!r}")
    hexpart = did[len(DID_PREFIX):]
    if len(hexpart) != 2 * ADDRESS_SIZE:
        raise MalformedKey(f"address part must be {2 * ADDRESS_SIZE} hex chars")
    try:
        return bytes.fromhex(hexpart)
    except ValueError as exc:
        raise MalformedKey(f"bad hex in {did!r}") from exc


class SigningKey:
    """An Ed25519 signing identity bound to its derived address."""

    def __init__(self, private: Ed25519PrivateKey) -> None:
        self._private = private
        self.public_key: bytes = private.public_key().public_bytes_raw()
        self.address: bytes = derive_address(self.public_key)
        self.did: str = address_to_did(self.address)

    @classmethod
    def generate(cls) -> "SigningKey":
        return cls(Ed25519PrivateKey.generate())

    @classmethod
    def from_seed(cls, seed: bytes) -> "SigningKey":
        if len(seed) != SEED_SIZE:
            raise MalformedKey(f"seed must be {SEED_SIZE} bytes")
        return cls(Ed25519PrivateKey.from_private_bytes(seed))

    @classmethod
    def derive(cls, master_seed: int, label: str) -> "SigningKey":
        """Deterministic per-label key for seeded simulations."""
        material = sha256(b"aitrail.key|" + master_seed.to_bytes(8, "big") + b"|" + label.encode("utf-8"))
        return cls.from_private_seed_bytes(material)

    @classmethod
    def from_private_seed_bytes(cls, seed: bytes) -> "SigningKey":
        return cls.from_seed(seed)

    def seed_bytes(self) -> bytes:
        return self._private.private_bytes_raw()

    def sign(self, message: bytes) -> bytes:
        try:
            return self._private.sign(message)
        except Exception as exc:  # pragma: no cover - libcrypto failure
            raise SigningFailure(str(exc)) from exc


@lru_cache(maxsize=65536)
def _verify_cached(public_key: bytes, message: bytes, signature: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
        return True
    except (InvalidSignature, ValueError):
        return False


def verify_signature(public_key: bytes, message: bytes, signature: bytes) -> bool:
    """Check an Ed25519 signature; memoized because verification is pure."""
    if len(public_key) != PUBLIC_KEY_SIZE:
        return False
    return _verify_cached(bytes(public_key), bytes(message), bytes(signature))


def random_nonce() -> bytes:
    return os.urandom(16)


def derived_nonce(master_seed: int, counter: int) -> bytes:
    """Deterministic 16-byte nonce for seeded simulations."""
    return sha256(b"aitrail.nonce|" + master_seed.to_bytes(8, "big") + b"|" + counter.to_bytes(8, "big"))[:16]
