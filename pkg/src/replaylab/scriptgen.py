"""Translate a contract's fetched history into an executable test plan.

Historic addresses cannot act in the replay environment (nobody holds
their keys), so every address seen in the history is mapped to a
generated replay account. The map's first three entries are reserved:
the zero address, the one address, and the contract under test, whose
replay-side address is a placeholder resolved at deploy time.

Addresses hidden inside plain integers (packed fields) are invisible to
this static harvesting; a discovery pass replays the plan once on a
throwaway chain and collects every address the VM decodes at run time,
after which the map and the plan are rebuilt exactly once.
"""

from __future__ import annotations

import hashlib
import io
import zipfile
from dataclasses import dataclass, field
from typing import Optional

from .addresses import (
    Address, ILLEGAL_SENDER, MASK160, ONE_ADDRESS, ZERO_ADDRESS,
    looks_like_address, replay_address,
)
from .chain import EventRecord, STATUS_SUCCESS
from .explorer import HistoricBundle, HistoricTx
from .mcl import parse, static_flags
from .mcl.ast import T_ADDRESS, T_UINT, T_UINT_ARRAY
from .wire import decode_value, encode_value, event_from_json, event_to_json, pretty_json

DEFAULT_ADDRESS_CAP = 1000
RESERVED_SLOTS = 3

# Stands in for the contract under test until the replay deploys it.
CONTRACT_PLACEHOLDER = Address(
    hashlib.sha256(b"replay:contract-under-test").digest()[-20:])

GETTER_UINT_SPAN = 1 << 16


class PlanError(Exception):
    pass


@dataclass
class AddressMap:
    """Ordered bijection between historic and replay-side addresses."""

    historic: list[Address]
    replay: list[Address]
    runtime_decoded: tuple[Address, ...] = ()

    def __post_init__(self) -> None:
        self._forward = dict(zip(self.historic, self.replay))
        self._backward = dict(zip(self.replay, self.historic))

    def __len__(self) -> int:
        return len(self.historic)

    def translate(self, address: Address) -> Address:
        try:
            return self._forward[address]
        except KeyError:
            raise PlanError(f"historic address {address.hex()} is not mapped")

    def translate_or_keep(self, address: Address) -> Address:
        return self._forward.get(address, address)

    def inverse_or_keep(self, address: Address) -> Address:
        return self._backward.get(address, address)

    def covers(self, address: Address) -> bool:
        return address in self._forward

    def is_replay_side(self, address: Address) -> bool:
        return address in self._backward

    def with_contract(self, deployed: Address) -> "AddressMap":
        """Resolve the contract placeholder to the deployed address."""
        replay = [deployed if r == CONTRACT_PLACEHOLDER else r
                  for r in self.replay]
        return AddressMap(list(self.historic), replay, self.runtime_decoded)

    def to_json(self) -> dict:
        def render(addr: Address) -> str:
            return "@contract" if addr == CONTRACT_PLACEHOLDER else addr.hex()

        return {
            "entries": [{"historic": h.hex(), "replay": render(r)}
                        for h, r in zip(self.historic, self.replay)],
            "runtime_decoded": [a.hex() for a in self.runtime_decoded],
        }

    @classmethod
    def from_json(cls, data: dict) -> "AddressMap":
        def read(text: str) -> Address:
            return (CONTRACT_PLACEHOLDER if text == "@contract"
                    else Address.from_hex(text))

        return cls(
            historic=[Address.from_hex(e["historic"]) for e in data["entries"]],
            replay=[read(e["replay"]) for e in data["entries"]],
            runtime_decoded=tuple(Address.from_hex(a)
                                  for a in data["runtime_decoded"]),
        )


@dataclass
class DeployStep:
    contract: str
    from_: Address
    args: list
    arg_types: list[str]
    value: int
    gas_limit: int
    timestamp: int


@dataclass
class TxStep:
    index: int
    method: str
    from_: Address
    to: Address
    args: list
    arg_types: list[str]
    value: int
    gas_limit: int
    timestamp: int
    force_fail: bool
    expected_status: str
    expected_events: list[EventRecord]  # historic values; normalized on compare
    balance_queries: list[Address]


@dataclass
class GetterProbe:
    method: str
    args: list
    arg_types: list[str]


@dataclass
class TestPlan:
    contract_name: str
    source_text: str
    address_map: AddressMap
    seed: int
    truncated: bool
    deploy: DeployStep
    tx_steps: list[TxStep]
    getter_probes: list[GetterProbe]

    @property
    def tx_count(self) -> int:
        return len(self.tx_steps)

    def to_json(self) -> dict:
        def addr(a: Address) -> str:
            return "@contract" if a == CONTRACT_PLACEHOLDER else a.hex()

        return {
            "contract": self.contract_name,
            "source": self.source_text,
            "seed": self.seed,
            "truncated": self.truncated,
            "address_map": self.address_map.to_json(),
            "deploy": {
                "contract": self.deploy.contract,
                "from": addr(self.deploy.from_),
                "args": [{"type": t, "value": encode_value(t, v)}
                         for t, v in zip(self.deploy.arg_types,
                                         self.deploy.args)],
                "value": str(self.deploy.value),
                "gas_limit": str(self.deploy.gas_limit),
                "timestamp": self.deploy.timestamp,
            },
            "tx_steps": [{
                "index": s.index,
                "method": s.method,
                "from": addr(s.from_),
                "to": addr(s.to),
                "args": [{"type": t, "value": encode_value(t, v)}
                         for t, v in zip(s.arg_types, s.args)],
                "value": str(s.value),
                "gas_limit": str(s.gas_limit),
                "timestamp": s.timestamp,
                "force_fail": s.force_fail,
                "expected_status": s.expected_status,
                "expected_events": [event_to_json(e) for e in s.expected_events],
                "balance_queries": [addr(a) for a in s.balance_queries],
            } for s in self.tx_steps],
            "getter_probes": [{
                "method": p.method,
                "args": [{"type": t, "value": encode_value(t, v)}
                         for t, v in zip(p.arg_types, p.args)],
            } for p in self.getter_probes],
        }

    @classmethod
    def from_json(cls, data: dict) -> "TestPlan":
        def addr(text: str) -> Address:
            return (CONTRACT_PLACEHOLDER if text == "@contract"
                    else Address.from_hex(text))

        deploy = data["deploy"]
        return cls(
            contract_name=data["contract"],
            source_text=data["source"],
            address_map=AddressMap.from_json(data["address_map"]),
            seed=data["seed"],
            truncated=data["truncated"],
            deploy=DeployStep(
                contract=deploy["contract"],
                from_=addr(deploy["from"]),
                args=[decode_value(a["type"], a["value"])
                      for a in deploy["args"]],
                arg_types=[a["type"] for a in deploy["args"]],
                value=int(deploy["value"]),
                gas_limit=int(deploy["gas_limit"]),
                timestamp=deploy["timestamp"],
            ),
            tx_steps=[TxStep(
                index=s["index"],
                method=s["method"],
                from_=addr(s["from"]),
                to=addr(s["to"]),
                args=[decode_value(a["type"], a["value"]) for a in s["args"]],
                arg_types=[a["type"] for a in s["args"]],
                value=int(s["value"]),
                gas_limit=int(s["gas_limit"]),
                timestamp=s["timestamp"],
                force_fail=s["force_fail"],
                expected_status=s["expected_status"],
                expected_events=[event_from_json(e)
                                 for e in s["expected_events"]],
                balance_queries=[addr(a) for a in s["balance_queries"]],
            ) for s in data["tx_steps"]],
            getter_probes=[GetterProbe(
                method=p["method"],
                args=[decode_value(a["type"], a["value"]) for a in p["args"]],
                arg_types=[a["type"] for a in p["args"]],
            ) for p in data["getter_probes"]],
        )

    def render(self) -> str:
        return pretty_json(self.to_json())


# ── address harvesting and mapping ───────────────────────────────────────────


def _tx_addresses(tx: HistoricTx) -> list[Address]:
    found = [tx.from_]
    if tx.to is not None:
        found.append(tx.to)
    for semtype, value in zip(tx.arg_types, tx.args):
        if semtype == T_ADDRESS:
            found.append(value)
    return found


def harvest_literals(source_text: str) -> list[Address]:
    flags = static_flags(parse(source_text))
    ordered: list[Address] = []
    seen: set[Address] = set()
    for address, _ in flags.literal_addresses:
        if address not in seen:
            seen.add(address)
            ordered.append(address)
    return ordered


def build_address_map(bundle: HistoricBundle,
                      discovered: Optional[set[Address]] = None,
                      cap: int = DEFAULT_ADDRESS_CAP
                      ) -> tuple[AddressMap, bool, int]:
    """Map every address the retained transactions can touch.

    Returns (map, truncated, retained transaction count): if the full
    history needs more than ``cap`` addresses, the transaction list is
    cut to the longest prefix whose address set fits.
    """
    discovered_list = sorted(discovered or set(), key=int)
    base: list[Address] = [ZERO_ADDRESS, ONE_ADDRESS, bundle.contract_address]
    for address in _tx_addresses(bundle.creation_tx):
        base.append(address)
    base.extend(harvest_literals(bundle.source_text))
    base.extend(discovered_list)

    ordered: list[Address] = []
    seen: set[Address] = set()
    for address in base:
        if address not in seen:
            seen.add(address)
            ordered.append(address)

    truncated = False
    retained = len(bundle.transactions)
    for i, tx in enumerate(bundle.transactions):
        step_addresses = [a for a in _tx_addresses(tx) if a not in seen]
        if len(ordered) + len(step_addresses) > cap:
            truncated = True
            retained = i
            break
        for address in step_addresses:
            seen.add(address)
            ordered.append(address)
    if len(ordered) > cap:
        # even the reserved prefix and static addresses overflow
        truncated = True
        retained = 0
        ordered = ordered[:cap]

    replay: list[Address] = []
    for index, historic in enumerate(ordered):
        if historic == ZERO_ADDRESS:
            replay.append(ZERO_ADDRESS)
        elif historic == ONE_ADDRESS:
            replay.append(ONE_ADDRESS)
        elif historic == bundle.contract_address:
            replay.append(CONTRACT_PLACEHOLDER)
        else:
            replay.append(replay_address(index))
    assert ILLEGAL_SENDER not in replay
    return (AddressMap(ordered, replay, tuple(discovered_list)),
            truncated, retained)


# ── value translation ────────────────────────────────────────────────────────


def _substitute_packed(value: int, address_map: AddressMap) -> int:
    """Replace any runtime-decoded historic address appearing as a
    contiguous 160-bit field inside ``value``."""
    for historic in address_map.runtime_decoded:
        target = int(historic)
        replacement = int(address_map.translate(historic))
        for shift in range(0, 97):
            if (value >> shift) & MASK160 == target:
                value = (value & ~(MASK160 << shift)) | (replacement << shift)
                break
    return value


def translate_args(args: list, arg_types: list[str],
                   address_map: AddressMap) -> list:
    translated = []
    for semtype, value in zip(arg_types, args):
        if semtype == T_ADDRESS:
            translated.append(address_map.translate(value))
        elif semtype == T_UINT and address_map.runtime_decoded:
            translated.append(_substitute_packed(value, address_map))
        elif semtype == T_UINT_ARRAY and address_map.runtime_decoded:
            translated.append(tuple(_substitute_packed(v, address_map)
                                    for v in value))
        else:
            translated.append(value)
    return translated


def normalize_event(event: EventRecord, address_map: AddressMap) -> tuple:
    """Comparison key for an event: address parameters pass through the
    map (unknown ones stay as they are), order-insensitive within a
    transaction."""
    params = []
    for name, semtype, value in event.params:
        if semtype == T_ADDRESS:
            value = address_map.translate_or_keep(value)
        params.append((name, semtype,
                       encode_value(semtype, value)))
    return (event.name, tuple(params))


# ── plan generation ──────────────────────────────────────────────────────────


def _probe_value(seed: int, method: str, position: int, semtype: str,
                 address_map: AddressMap):
    digest = hashlib.sha256(
        f"probe:{seed}:{method}:{position}".encode()).digest()
    number = int.from_bytes(digest, "big")
    if semtype == T_UINT:
        return number % GETTER_UINT_SPAN
    if semtype == "bool":
        return bool(number & 1)
    if semtype == T_ADDRESS:
        return address_map.replay[number % len(address_map.replay)]
    if semtype == T_UINT_ARRAY:
        return (number % GETTER_UINT_SPAN,)
    return number % GETTER_UINT_SPAN


def generate_plan(bundle: HistoricBundle, address_map: AddressMap,
                  seed: int, truncated: bool = False,
                  retained: Optional[int] = None,
                  allow_partial: bool = False) -> TestPlan:
    """Build the replay plan: deploy with translated constructor
    arguments, one step per historic transaction (forced to fail where
    history failed), balance queries, event expectations, and one seeded
    probe per pure function."""
    if bundle.partial and not allow_partial:
        raise PlanError("bundle is partial; pass allow_partial to proceed")

    transactions = bundle.transactions
    if retained is not None:
        transactions = transactions[:retained]

    events_by_tx: dict[str, list[EventRecord]] = {}
    for event in bundle.event_logs:
        events_by_tx.setdefault(event.tx_hash, []).append(event)
    for rows in events_by_tx.values():
        rows.sort(key=lambda e: e.log_index)

    creation = bundle.creation_tx
    deploy = DeployStep(
        contract=bundle.contract_name,
        from_=address_map.translate(creation.from_),
        args=translate_args(creation.args, creation.arg_types, address_map),
        arg_types=list(creation.arg_types),
        value=creation.value,
        gas_limit=creation.gas_limit,
        timestamp=creation.timestamp,
    )

    steps: list[TxStep] = []
    for index, tx in enumerate(transactions):
        force_fail = tx.status != STATUS_SUCCESS
        sender = (ILLEGAL_SENDER if force_fail
                  else address_map.translate(tx.from_))
        steps.append(TxStep(
            index=index,
            method=tx.method,
            from_=sender,
            to=CONTRACT_PLACEHOLDER,
            args=translate_args(tx.args, tx.arg_types, address_map),
            arg_types=list(tx.arg_types),
            value=tx.value,
            gas_limit=tx.gas_limit,
            timestamp=tx.timestamp,
            force_fail=force_fail,
            expected_status=tx.status,
            expected_events=list(events_by_tx.get(tx.hash, [])),
            balance_queries=[address_map.translate(tx.from_),
                             CONTRACT_PLACEHOLDER],
        ))

    probes: list[GetterProbe] = []
    for sig in bundle.interface.methods:
        if not sig.pure:
            continue
        args = [_probe_value(seed, sig.name, i, semtype, address_map)
                for i, (_, semtype) in enumerate(sig.params)]
        probes.append(GetterProbe(
            method=sig.name, args=args,
            arg_types=[t for _, t in sig.params]))

    return TestPlan(
        contract_name=bundle.contract_name,
        source_text=bundle.source_text,
        address_map=address_map,
        seed=seed,
        truncated=truncated,
        deploy=deploy,
        tx_steps=steps,
        getter_probes=probes,
    )


def discovery_pass(plan: TestPlan) -> set[Address]:
    """Replay the plan once on a throwaway chain and report every
    address the VM decoded from an integer at run time that is neither
    a replay account nor noise (its value must fill all 20 bytes).
    Failures during this pass are expected and tolerated."""
    from .replayer import RunConfig, replay

    run = replay(plan, RunConfig(runs=1), 0)
    discovered: set[Address] = set()
    for trace in run.chain.traces.values():
        for _value, decoded in trace.casts:
            if not looks_like_address(int(decoded)):
                continue
            if plan.address_map.is_replay_side(decoded):
                continue
            if decoded == ILLEGAL_SENDER or decoded == CONTRACT_PLACEHOLDER:
                continue
            discovered.add(decoded)
    return discovered


@dataclass
class GenerationResult:
    plan: TestPlan
    initial_plan: TestPlan
    discovered: set[Address] = field(default_factory=set)
    truncated: bool = False


def generate_with_discovery(bundle: HistoricBundle, seed: int,
                            cap: int = DEFAULT_ADDRESS_CAP,
                            allow_partial: bool = False) -> GenerationResult:
    """The full generation flow: build, replay once to discover packed
    addresses, then rebuild exactly once if anything surfaced."""
    address_map, truncated, retained = build_address_map(bundle, set(), cap)
    initial = generate_plan(bundle, address_map, seed, truncated, retained,
                            allow_partial=allow_partial)
    discovered = discovery_pass(initial)
    if not discovered:
        return GenerationResult(initial, initial, set(), truncated)
    address_map, truncated, retained = build_address_map(bundle, discovered,
                                                         cap)
    final = generate_plan(bundle, address_map, seed, truncated, retained,
                          allow_partial=allow_partial)
    return GenerationResult(final, initial, discovered, truncated)


# ── test box export ──────────────────────────────────────────────────────────

_FIXED_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


def export_test_box(plan: TestPlan, endowment: int = 10 ** 24,
                    gas_price: int = 0) -> bytes:
    """A distributable archive: the plan, the contract source, and the
    genesis configuration of the replay chain. Byte-stable for
    identical inputs."""
    genesis_config = {
        "endowment": str(endowment),
        "gas_price": gas_price,
        "accounts": [a.hex() for a in plan.address_map.replay
                     if a not in (CONTRACT_PLACEHOLDER,)],
    }
    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, "w", zipfile.ZIP_DEFLATED) as box:
        for name, payload in (
                ("plan.json", plan.render()),
                (f"{plan.contract_name}.mcl", plan.source_text),
                ("genesis.json", pretty_json(genesis_config))):
            info = zipfile.ZipInfo(name, date_time=_FIXED_ZIP_DATE)
            info.external_attr = 0o644 << 16
            box.writestr(info, payload)
    return buffer.getvalue()
