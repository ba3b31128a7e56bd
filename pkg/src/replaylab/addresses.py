"""Account addresses and deterministic address pools.

Addresses are 20-byte values rendered as 0x-prefixed lowercase hex. All
address generation in the lab is digest-derived so that every run of the
same scenario or replay produces the same addresses.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

ADDRESS_BYTES = 20
MASK160 = (1 << 160) - 1


@dataclass(frozen=True, order=True)
class Address:
    """A 20-byte account identifier."""

    value: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.value, bytes) or len(self.value) != ADDRESS_BYTES:
            raise ValueError("address must be exactly 20 bytes")

    @classmethod
    def from_hex(cls, text: str) -> "Address":
        body = text[2:] if text.lower().startswith("0x") else text
        if len(body) != 2 * ADDRESS_BYTES:
            raise ValueError(f"address hex must have 40 digits, got {len(body)}")
        return cls(bytes.fromhex(body))

    @classmethod
    def from_int(cls, value: int) -> "Address":
        return cls((value & MASK160).to_bytes(ADDRESS_BYTES, "big"))

    def hex(self) -> str:
        return "0x" + self.value.hex()

    def __int__(self) -> int:
        return int.from_bytes(self.value, "big")

    def __str__(self) -> str:
        return self.hex()

    def __repr__(self) -> str:
        return f"Address({self.hex()!r})"


ZERO_ADDRESS = Address(bytes(ADDRESS_BYTES))
ONE_ADDRESS = Address.from_int(1)

# Sender used to force a transaction failure: never funded, never mapped,
# rejected deterministically by the chain as an unknown account.
ILLEGAL_SENDER = Address(bytes([0xDE] * ADDRESS_BYTES))

# Sink for gas fees when a non-zero gas price is configured, so that the
# total supply stays constant even with fees enabled.
FEE_SINK = Address(bytes([0xFE] * ADDRESS_BYTES))


def _digest_address(tag: str) -> Address:
    return Address(hashlib.sha256(tag.encode("utf-8")).digest()[-ADDRESS_BYTES:])


def labeled_address(label: str) -> Address:
    """Deterministic address for a named scenario account."""
    return _digest_address("account:" + label)


def replay_address(index: int) -> Address:
    """The index-th address of the replay environment's account pool."""
    if index < 0:
        raise ValueError("pool index must be non-negative")
    return _digest_address(f"replay:{index}")


def replay_pool(size: int) -> list[Address]:
    return [replay_address(i) for i in range(size)]


def minimal_hex_len(value: int) -> int:
    """Number of hex digits in the shortest rendering of ``value``."""
    if value == 0:
        return 1
    return (value.bit_length() + 3) // 4


def looks_like_address(value: int) -> bool:
    """Heuristic: an integer is address-shaped iff its minimal hex
    rendering is exactly 40 digits (20 bytes, no leading zeros)."""
    return minimal_hex_len(value) == 2 * ADDRESS_BYTES
