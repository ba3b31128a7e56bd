"""Canonical JSON encodings shared by the chain exporter, the explorer
server/client, plans, and run artifacts.

All 256-bit integers travel as decimal strings so documents stay
readable and language-neutral; addresses as 0x + 40 hex digits; hashes
as 0x + 64 hex digits. Typed values are self-describing
``{"type": ..., "value": ...}`` pairs so consumers never need to guess.
"""

from __future__ import annotations

import json
from typing import Optional

from .addresses import Address
from .chain import EventRecord, Transaction
from .mcl.ast import T_ADDRESS, T_BOOL, T_HASH, T_MAP, T_UINT, T_UINT_ARRAY


def encode_value(semtype: str, value) -> object:
    if semtype == T_UINT:
        return str(value)
    if semtype == T_BOOL:
        return bool(value)
    if semtype == T_ADDRESS:
        return value.hex()
    if semtype == T_HASH:
        return "0x" + value.hex()
    if semtype == T_UINT_ARRAY:
        return [str(v) for v in value]
    raise ValueError(f"cannot encode values of type {semtype}")


def decode_value(semtype: str, data) -> object:
    if semtype == T_UINT:
        return int(data)
    if semtype == T_BOOL:
        return bool(data)
    if semtype == T_ADDRESS:
        return Address.from_hex(data)
    if semtype == T_HASH:
        return bytes.fromhex(data[2:])
    if semtype == T_UINT_ARRAY:
        return tuple(int(v) for v in data)
    raise ValueError(f"cannot decode values of type {semtype}")


def type_of_value(value) -> str:
    """Fallback typing when no interface is at hand."""
    if type(value) is bool:
        return T_BOOL
    if type(value) is int:
        return T_UINT
    if isinstance(value, Address):
        return T_ADDRESS
    if isinstance(value, bytes):
        return T_HASH
    if isinstance(value, (list, tuple)):
        return T_UINT_ARRAY
    raise ValueError(f"untypable value {value!r}")


def encode_args(args: list, types: Optional[list[str]] = None) -> list[dict]:
    if types is None:
        types = [type_of_value(a) for a in args]
    return [{"type": t, "value": encode_value(t, a)}
            for t, a in zip(types, args)]


def decode_args(data: list[dict]) -> list:
    return [decode_value(item["type"], item["value"]) for item in data]


def arg_types(data: list[dict]) -> list[str]:
    return [item["type"] for item in data]


def event_to_json(event: EventRecord) -> dict:
    return {
        "emitter": event.emitter.hex(),
        "name": event.name,
        "params": [{"name": n, "type": t, "value": encode_value(t, v)}
                   for n, t, v in event.params],
        "tx_hash": event.tx_hash,
        "log_index": event.log_index,
    }


def event_from_json(data: dict) -> EventRecord:
    return EventRecord(
        emitter=Address.from_hex(data["emitter"]),
        name=data["name"],
        params=[(p["name"], p["type"], decode_value(p["type"], p["value"]))
                for p in data["params"]],
        tx_hash=data["tx_hash"],
        log_index=data["log_index"],
    )


def internal_tx_to_json(tx: Transaction, arg_type_list: list[str]) -> dict:
    return {
        "hash": tx.hash,
        "from": tx.from_.hex(),
        "to": tx.to.hex() if tx.to is not None else "",
        "value": str(tx.value),
        "gas_limit": str(tx.gas_limit),
        "method": tx.method,
        "args": encode_args(tx.args, arg_type_list),
        "origin": tx.origin,
        "parent_tx": tx.parent_tx or "",
        "creates": tx.creates.hex() if tx.creates is not None else "",
        "block_number": tx.block_number,
        "timestamp": tx.timestamp,
    }


def canonical_json(obj) -> str:
    """Single-line canonical rendering, for fixture streams and hashing."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def pretty_json(obj) -> str:
    """Indented canonical rendering, for artifacts people read."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"
