"""Canonical byte encoding used for everything that gets hashed or signed.

The rules are fixed so that two independent builds hash identical bytes:
unsigned integers are big-endian fixed width, byte strings and UTF-8 text
carry a 32-bit big-endian length prefix, and composite bodies are encoded
field by field in declared order.
"""

from __future__ import annotations

import struct

U8_MAX = 0xFF
U16_MAX = 0xFFFF
U32_MAX = 0xFFFF_FFFF
U64_MAX = 0xFFFF_FFFF_FFFF_FFFF


class Writer:
    """Accumulates canonically encoded fields."""

    def __init__(self) -> None:
        self._parts: list[bytes] = []

    def u8(self, value: int) -> "Writer":
        self._parts.append(struct.pack(">B", value))
        return self

    def u16(self, value: int) -> "Writer":
        self._parts.append(struct.pack(">H", value))
        return self

    def u32(self, value: int) -> "Writer":
        self._parts.append(struct.pack(">I", value))
        return self

    def u64(self, value: int) -> "Writer":
        self._parts.append(struct.pack(">Q", value))
        return self

    def blob(self, value: bytes) -> "Writer":
        self._parts.append(struct.pack(">I", len(value)))
        self._parts.append(bytes(value))
        return self

    def text(self, value: str) -> "Writer":
        return self.blob(value.encode("utf-8"))

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Reader:
    """Decodes the output of :class:`Writer` in the same field order."""

    def __init__(self, data: bytes) -> None:
        self._data = data
        self._pos = 0

    def _take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise ValueError("truncated canonical encoding")
        chunk = self._data[self._pos : self._pos + n]
        self._pos += n
        return chunk

    def u8(self) -> int:
        return struct.unpack(">B", self._take(1))[0]

    def u16(self) -> int:
        return struct.unpack(">H", self._take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self._take(8))[0]

    def blob(self) -> bytes:
        length = self.u32()
        return self._take(length)

    def text(self) -> str:
        return self.blob().decode("utf-8")

    def expect_end(self) -> None:
        if self._pos != len(self._data):
            raise ValueError("trailing bytes after canonical encoding")

    @property
    def exhausted(self) -> bool:
        return self._pos == len(self._data)


def encode_claims(claims: dict[str, str]) -> bytes:
    """Canonical bytes for credential claim key/value pairs (sorted by key)."""
    w = Writer()
    w.u32(len(claims))
    for key in sorted(claims):
        w.text(key)
        w.text(claims[key])
    return w.getvalue()


def decode_claims(data: bytes) -> dict[str, str]:
    r = Reader(data)
    count = r.u32()
    claims = {r.text(): r.text() for _ in range(count)}
    r.expect_end()
    return claims
