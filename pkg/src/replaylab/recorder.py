"""Run a recording scenario on a fresh chain and export the result as a
line-delimited fixture stream for the explorer server.

A scenario is a JSON document:

    {
      "name": "minilotto",
      "sources": ["minilotto.mcl"],
      "endowment": "1000000000000000000000000",
      "accounts": ["owner", "player2"],
      "steps": [
        {"kind": "deploy", "id": "lotto", "unit": "minilotto.mcl",
         "contract": "MiniLotto", "from": "owner", "args": [],
         "value": "0", "gas_limit": "3000000", "timestamp": 1516973359,
         "pin_label": null},
        {"kind": "tx", "to": "lotto", "method": "Play", "from": "player2",
         "args": [], "value": "50000000000000000", "gas_limit": "100000",
         "timestamp": 1516974050}
      ]
    }

Account names map to deterministic addresses; "to" refers to a deploy
id, or "@created:<step id>" for a contract created internally by an
earlier step. Argument entries are wire-typed values, plus two
conveniences: {"type": "address", "ref": <id or account>} resolves a
deployment or account, and uint/uint[] entries may use
{"pack": {"account": ..., "amount": ..., "delta": ...}} to pack
((address - delta) << 96) | amount.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .addresses import Address, labeled_address
from .chain import (
    ChainError, Receipt, Transaction, WorldState, genesis, make_call_tx,
    make_create_tx,
)
from .fixtures import fixture_text, scenario_document
from .mcl.compiler import CompiledUnit
from .mcl import compile_unit
from .wire import (
    canonical_json, encode_args, event_to_json, internal_tx_to_json,
    type_of_value,
)

DEFAULT_ENDOWMENT = 10 ** 24
DEFAULT_TX_GAS = 1_000_000
DEFAULT_DEPLOY_GAS = 10_000_000


class ScenarioError(Exception):
    def __init__(self, message: str, step: int | None = None):
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)
        self.step = step


@dataclass
class RecordedChain:
    name: str
    state: WorldState
    units: dict[str, CompiledUnit]  # source name -> compiled unit
    unit_texts: dict[str, str]
    deployments: dict[str, Address]  # deploy id / @created ref -> address
    contract_units: dict[Address, str] = field(default_factory=dict)

    def address_of(self, deploy_id: str) -> Address:
        return self.deployments[deploy_id]


def _pack_note(spec: dict) -> int:
    address = labeled_address(spec["account"])
    delta = int(spec.get("delta", 0))
    amount = int(spec["amount"])
    if amount >= 1 << 96:
        raise ScenarioError("packed amount must fit in 96 bits")
    return ((int(address) - delta) << 96) | amount


def _resolve_arg(entry: dict, recorded: RecordedChain) -> object:
    semtype = entry["type"]
    if "ref" in entry:
        ref = entry["ref"]
        if ref in recorded.deployments:
            return recorded.deployments[ref]
        return labeled_address(ref)
    if "pack" in entry:
        return _pack_note(entry["pack"])
    if "pack_list" in entry:
        return tuple(_pack_note(p) for p in entry["pack_list"])
    from .wire import decode_value

    return decode_value(semtype, entry["value"])


def run_scenario(scenario: dict) -> RecordedChain:
    """Execute a scenario deterministically: one mined block per step."""
    name = scenario.get("name", "scenario")
    endowment = int(scenario.get("endowment", DEFAULT_ENDOWMENT))
    accounts = scenario.get("accounts", [])
    endowments = [(labeled_address(label), endowment) for label in accounts]
    state = genesis(endowments, gas_price=int(scenario.get("gas_price", 0)))

    units: dict[str, CompiledUnit] = {}
    unit_texts: dict[str, str] = {}
    for source_name in scenario.get("sources", []):
        if os.path.exists(source_name):
            text = open(source_name, encoding="utf-8").read()
        else:
            text = fixture_text(source_name)
        unit_texts[source_name] = text
        units[source_name] = compile_unit(text)

    recorded = RecordedChain(name=name, state=state, units=units,
                             unit_texts=unit_texts, deployments={})

    for index, step in enumerate(scenario.get("steps", [])):
        try:
            _run_step(recorded, step, index)
        except (ChainError, KeyError, ValueError) as exc:
            raise ScenarioError(str(exc), step=index) from exc
    return recorded


def _run_step(recorded: RecordedChain, step: dict, index: int) -> None:
    state = recorded.state
    kind = step["kind"]
    sender = labeled_address(step["from"])
    args = [_resolve_arg(a, recorded) for a in step.get("args", [])]
    value = int(step.get("value", "0"))
    timestamp = int(step["timestamp"])

    if kind == "deploy":
        unit_name = step.get("unit") or next(iter(recorded.units))
        unit = recorded.units[unit_name]
        pin = None
        if step.get("pin_label"):
            pin = labeled_address(step["pin_label"])
        tx = make_create_tx(
            sender, unit, step["contract"], args, value=value,
            gas_limit=int(step.get("gas_limit", DEFAULT_DEPLOY_GAS)),
            pin_address=pin)
        state.submit(tx)
        _, receipts = state.mine_block(timestamp)
        receipt = receipts[0]
        if receipt.status != "success":
            raise ScenarioError(
                f"deploy failed: {receipt.failure_reason}", step=index)
        recorded.deployments[step["id"]] = receipt.created
        recorded.contract_units[receipt.created] = unit_name
        _register_internal_creations(recorded, receipt, step, unit_name)
        return

    if kind == "tx":
        to = recorded.deployments[step["to"]]
        tx = make_call_tx(sender, to, step["method"], args, value=value,
                          gas_limit=int(step.get("gas_limit", DEFAULT_TX_GAS)))
        state.submit(tx)
        _, receipts = state.mine_block(timestamp)
        receipt = receipts[0]
        expect = step.get("expect", None)
        if expect is not None and receipt.status != expect:
            raise ScenarioError(
                f"expected status {expect}, got {receipt.status} "
                f"({receipt.failure_reason})", step=index)
        if step.get("id"):
            _register_internal_creations(recorded, receipt, step,
                                         recorded.contract_units[to])
        return

    raise ScenarioError(f"unknown step kind {kind!r}", step=index)


def _register_internal_creations(recorded: RecordedChain, receipt: Receipt,
                                 step: dict, unit_name: str) -> None:
    created = [tx.creates for tx in receipt.internal_txs
               if tx.creates is not None]
    for position, address in enumerate(created):
        key = (f"@created:{step['id']}" if position == 0
               else f"@created:{step['id']}:{position}")
        recorded.deployments[key] = address
        recorded.contract_units[address] = unit_name


# ── fixture stream export ────────────────────────────────────────────────────


def _tx_args_types(state: WorldState, tx: Transaction) -> list[str]:
    if tx.is_create:
        if tx.unit is not None:
            compiled = tx.unit.contracts.get(tx.method)
            if compiled is not None:
                return [t for _, t in compiled.interface.constructor_params]
    else:
        account = state.account(tx.to)
        if account is not None and account.code is not None:
            if tx.method == account.code.name:
                return [t for _, t in account.code.interface.constructor_params]
            sig = account.code.interface.method(tx.method)
            if sig is not None:
                return [t for _, t in sig.params]
    return [type_of_value(a) for a in tx.args]


def _internal_creation_types(state: WorldState, tx: Transaction) -> list[str]:
    if tx.creates is not None:
        account = state.account(tx.creates)
        if account is not None and account.code is not None:
            return [t for _, t in account.code.interface.constructor_params]
    return [type_of_value(a) for a in tx.args]


def export_fixture_lines(recorded: RecordedChain) -> list[str]:
    """Serialize the recorded chain: one JSON object per line."""
    state = recorded.state
    lines: list[dict] = []
    lines.append({
        "kind": "meta",
        "scenario": recorded.name,
        "deployments": {k: v.hex() for k, v in
                        sorted(recorded.deployments.items())},
    })
    lines.append({
        "kind": "genesis",
        "gas_price": state.gas_price,
        "accounts": [{"address": addr.hex(), "balance": str(acct.balance)}
                     for addr, acct in sorted(state.accounts.items())
                     if acct.kind == "external"],
    })

    # contract sources, in creation order
    creation_tx: dict[Address, Transaction] = {}
    for block in state.blocks:
        for tx_hash in block.tx_hashes:
            receipt = state.receipts[tx_hash]
            tx = _find_tx(state, tx_hash)
            if receipt.created is not None:
                creation_tx[receipt.created] = tx
            for internal in receipt.internal_txs:
                if internal.creates is not None and receipt.status == "success":
                    creation_tx[internal.creates] = internal
    for address, tx in creation_tx.items():
        account = state.account(address)
        if account is None or account.code is None:
            continue
        unit_name = recorded.contract_units.get(address)
        source = recorded.unit_texts.get(unit_name, "")
        created_internal = tx.origin == "internal"
        lines.append({
            "kind": "source",
            "address": address.hex(),
            "contract": account.code.name,
            "source": source,
            "interface": account.code.interface.to_json(),
            # for internal creations this is the enclosing external
            # transaction, whose trace reveals the creation itself
            "creation_tx_hash": tx.parent_tx if created_internal else tx.hash,
            "created_internal": created_internal,
        })

    pending_internal: list[dict] = []
    for block in state.blocks:
        lines.append({
            "kind": "block",
            "number": block.number,
            "timestamp": block.timestamp,
            "hash": block.hash,
            "tx_hashes": list(block.tx_hashes),
        })
        for tx_hash in block.tx_hashes:
            tx = _find_tx(state, tx_hash)
            receipt = state.receipts[tx_hash]
            lines.append({
                "kind": "tx",
                "hash": tx.hash,
                "from": tx.from_.hex(),
                "to": tx.to.hex() if tx.to is not None else "",
                "value": str(tx.value),
                "gas_limit": str(tx.gas_limit),
                "method": tx.method,
                "args": encode_args(tx.args, _tx_args_types(state, tx)),
                "block_number": block.number,
                "timestamp": block.timestamp,
                "status": receipt.status,
                "gas_used": str(receipt.gas_used),
                "failure_reason": receipt.failure_reason or "",
                "creates": receipt.created.hex() if receipt.created else "",
            })
            for event in receipt.events:
                lines.append({"kind": "event", **event_to_json(event)})
            for internal in receipt.internal_txs:
                types = (_internal_creation_types(state, internal)
                         if internal.creates is not None
                         else _tx_args_types(state, internal))
                pending_internal.append(
                    {"kind": "internal_tx",
                     **internal_tx_to_json(internal, types)})
    lines.extend(pending_internal)

    for number, snapshot in enumerate(state.balance_history):
        for address, balance in sorted(snapshot.items()):
            lines.append({
                "kind": "balance",
                "address": address.hex(),
                "block": number,
                "value": str(balance),
            })
    return [canonical_json(obj) for obj in lines]


def _find_tx(state: WorldState, tx_hash: str) -> Transaction:
    return state.transactions[tx_hash]


def record_fixture(name_or_path: str) -> tuple[RecordedChain, list[str]]:
    if os.path.exists(name_or_path):
        import json

        scenario = json.loads(open(name_or_path, encoding="utf-8").read())
    else:
        scenario = scenario_document(name_or_path)
    recorded = run_scenario(scenario)
    return recorded, export_fixture_lines(recorded)
