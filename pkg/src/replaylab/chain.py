"""Deterministic mini-blockchain: accounts, explicit block mining with
caller-chosen timestamps, gas metering, events, receipts, and traces.

There is no instamining and no consensus: transactions queue in a FIFO
and execute when a block is mined explicitly with a chosen timestamp.
Block hashes are plain digests of block contents, so the whole chain is
a pure function of (genesis, submitted transactions, timestamps).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

from .addresses import ADDRESS_BYTES, Address, FEE_SINK
from .mcl.compiler import CompiledContract, CompiledUnit

MAX_UINT256 = (1 << 256) - 1
HASH_BYTES = 32
ZERO_HASH = "0x" + "00" * HASH_BYTES

STATUS_SUCCESS = "success"
STATUS_FAILED = "failed"
STATUS_OUT_OF_GAS = "out_of_gas"
STATUSES = (STATUS_FAILED, STATUS_OUT_OF_GAS, STATUS_SUCCESS)

ORIGIN_EXTERNAL = "external"
ORIGIN_INTERNAL = "internal"

# The three VM-level failure messages; require() can add its own.
REASON_REVERTED = "Reverted"
REASON_BAD_INSTRUCTION = "Bad instruction"
REASON_BAD_JUMP = "Bad jump destination"
REASON_UNKNOWN_SENDER = "unknown sender"

# How many trailing blocks blockhash() can see; the block being
# executed is excluded.
BLOCKHASH_WINDOW = 256


class ChainError(Exception):
    pass


def _digest(tag: str, *parts: str) -> str:
    h = hashlib.sha256()
    h.update(tag.encode())
    for part in parts:
        h.update(b"\x00")
        h.update(str(part).encode())
    return "0x" + h.hexdigest()


@dataclass
class Account:
    address: Address
    balance: int
    kind: str  # external | contract
    code: Optional[CompiledContract] = None
    unit: Optional[CompiledUnit] = None
    storage: dict = field(default_factory=dict)

    def clone(self) -> "Account":
        storage = {
            k: (v.copy() if isinstance(v, (dict, list)) else v)
            for k, v in self.storage.items()
        }
        return Account(self.address, self.balance, self.kind, self.code,
                       self.unit, storage)


def initial_storage(code: CompiledContract) -> dict:
    from .mcl.ast import T_ADDRESS, T_BOOL, T_HASH, T_MAP, T_UINT, T_UINT_ARRAY
    from .addresses import ZERO_ADDRESS

    defaults = {
        T_UINT: 0,
        T_BOOL: False,
        T_ADDRESS: ZERO_ADDRESS,
        T_HASH: b"\x00" * HASH_BYTES,
    }
    storage: dict = {}
    for name, typ in code.state_vars:
        if typ == T_MAP:
            storage[name] = {}
        elif typ == T_UINT_ARRAY:
            storage[name] = []
        else:
            storage[name] = defaults[typ]
    return storage


@dataclass
class Transaction:
    from_: Address
    to: Optional[Address]  # None = contract creation
    value: int
    gas_limit: int
    method: str  # contract name for creations
    args: list
    origin: str = ORIGIN_EXTERNAL
    parent_tx: Optional[str] = None
    hash: str = ""
    unit: Optional[CompiledUnit] = None  # carried by external creations
    pin_address: Optional[Address] = None  # fixture recording only
    creates: Optional[Address] = None
    block_number: Optional[int] = None
    timestamp: Optional[int] = None

    @property
    def is_create(self) -> bool:
        return self.to is None


@dataclass
class EventRecord:
    emitter: Address
    name: str
    params: list[tuple[str, str, object]]  # (name, type, value)
    tx_hash: str = ""
    log_index: int = 0


@dataclass
class Receipt:
    tx_hash: str
    status: str
    gas_used: int
    events: list[EventRecord] = field(default_factory=list)
    failure_reason: Optional[str] = None
    block_number: int = 0
    internal_txs: list[Transaction] = field(default_factory=list)
    created: Optional[Address] = None


@dataclass
class Block:
    number: int
    timestamp: int
    hash: str
    tx_hashes: list[str] = field(default_factory=list)


@dataclass
class VmTrace:
    """Debug output of one external transaction."""

    executed: set = field(default_factory=set)  # (contract name, index)
    casts: list = field(default_factory=list)  # (int value, decoded Address)
    call_edges: list = field(default_factory=list)  # (caller, callee, method)

    def executed_for(self, contract_name: str) -> set[int]:
        return {idx for name, idx in self.executed if name == contract_name}


def block_hash(number: int, timestamp: int, parent_hash: str,
               tx_hashes: list[str]) -> str:
    return _digest("block", str(number), str(timestamp), parent_hash,
                   ",".join(tx_hashes))


@dataclass
class WorldState:
    accounts: dict[Address, Account] = field(default_factory=dict)
    blocks: list[Block] = field(default_factory=list)
    pending: list[Transaction] = field(default_factory=list)
    transactions: dict[str, Transaction] = field(default_factory=dict)
    receipts: dict[str, Receipt] = field(default_factory=dict)
    traces: dict[str, VmTrace] = field(default_factory=dict)
    balance_history: list[dict[Address, int]] = field(default_factory=list)
    gas_price: int = 0
    nonce: int = 0

    # ── identifiers ──────────────────────────────────────────────────

    def next_nonce(self) -> int:
        value = self.nonce
        self.nonce += 1
        return value

    def tx_hash(self, tx: Transaction) -> str:
        to_text = tx.to.hex() if tx.to is not None else "create"
        return _digest("tx", str(self.next_nonce()), tx.from_.hex(), to_text,
                       str(tx.value), tx.method, repr(tx.args))

    def new_contract_address(self) -> Address:
        raw = hashlib.sha256(f"contract:{self.next_nonce()}".encode()).digest()
        return Address(raw[-ADDRESS_BYTES:])

    # ── accounts ─────────────────────────────────────────────────────

    def account(self, address: Address) -> Optional[Account]:
        return self.accounts.get(address)

    def ensure_account(self, address: Address) -> Account:
        acct = self.accounts.get(address)
        if acct is None:
            acct = Account(address, 0, "external")
            self.accounts[address] = acct
        return acct

    def balance_of(self, address: Address) -> int:
        acct = self.accounts.get(address)
        return acct.balance if acct else 0

    # ── chain operations ─────────────────────────────────────────────

    def submit(self, tx: Transaction) -> int:
        """Queue a transaction; returns its position in the pending list."""
        if tx.from_ not in self.accounts:
            raise ChainError(f"{REASON_UNKNOWN_SENDER}: {tx.from_.hex()}")
        if tx.is_create and tx.unit is None:
            raise ChainError("creation transaction carries no compiled unit")
        if not tx.hash:
            tx.hash = self.tx_hash(tx)
        self.pending.append(tx)
        return len(self.pending) - 1

    def mine_block(self, timestamp: int) -> tuple[Block, list[Receipt]]:
        """Execute all pending transactions under the given timestamp and
        seal them into the next block."""
        from .vm import execute_transaction

        if self.blocks and timestamp < self.blocks[-1].timestamp:
            raise ChainError(
                f"timestamp {timestamp} is before parent block timestamp "
                f"{self.blocks[-1].timestamp}")
        number = len(self.blocks)
        parent = self.blocks[-1].hash if self.blocks else ZERO_HASH
        queue, self.pending = self.pending, []
        receipts: list[Receipt] = []
        for tx in queue:
            tx.block_number = number
            tx.timestamp = timestamp
            receipt, trace = execute_transaction(self, tx, number, timestamp)
            self.transactions[tx.hash] = tx
            self.receipts[tx.hash] = receipt
            self.traces[tx.hash] = trace
            receipts.append(receipt)
        block = Block(number, timestamp,
                      block_hash(number, timestamp, parent,
                                 [t.hash for t in queue]),
                      [t.hash for t in queue])
        self.blocks.append(block)
        self.balance_history.append(
            {addr: acct.balance for addr, acct in self.accounts.items()})
        return block, receipts

    def call_pure(self, address: Address, method: str, args: list) -> tuple:
        """Run a pure-read method against current state: no gas, no
        state change; returns the method's values."""
        from .vm import run_pure

        acct = self.accounts.get(address)
        if acct is None or acct.code is None:
            raise ChainError(f"no contract at {address.hex()}")
        info = acct.code.methods.get(method)
        if info is None:
            raise ChainError(f"unknown method {method!r}")
        if not info.pure:
            raise ChainError(f"method {method!r} is not pure")
        return run_pure(self, acct, info, args)

    def balance_at(self, address: Address, block_number: int) -> int:
        """Balance as of the end of the given block."""
        if not 0 <= block_number < len(self.balance_history):
            raise ChainError(f"unknown block {block_number}")
        return self.balance_history[block_number].get(address, 0)

    def blockhash(self, n: int, current: Optional[int] = None) -> str:
        """Hash of block n if it lies in the 256-block window before the
        current block; the all-zero value otherwise (the current block
        itself is excluded)."""
        if current is None:
            current = self.blocks[-1].number if self.blocks else 0
        if n < 0 or n >= current or n < current - BLOCKHASH_WINDOW:
            return ZERO_HASH
        return self.blocks[n].hash

    def total_supply(self) -> int:
        return sum(acct.balance for acct in self.accounts.values())


def genesis(endowments: list[tuple[Address, int]],
            gas_price: int = 0) -> WorldState:
    """Create a chain whose block 0 holds only the given endowments."""
    seen: set[Address] = set()
    state = WorldState(gas_price=gas_price)
    for address, balance in endowments:
        if address in seen:
            raise ChainError(f"duplicate genesis address {address.hex()}")
        seen.add(address)
        state.accounts[address] = Account(address, balance, "external")
    state.blocks.append(Block(0, 0, block_hash(0, 0, ZERO_HASH, []), []))
    state.balance_history.append(
        {addr: acct.balance for addr, acct in state.accounts.items()})
    return state


def make_call_tx(from_: Address, to: Address, method: str, args: list,
                 value: int = 0, gas_limit: int = 1_000_000) -> Transaction:
    return Transaction(from_=from_, to=to, value=value, gas_limit=gas_limit,
                       method=method, args=list(args))


def make_create_tx(from_: Address, unit: CompiledUnit, contract: str,
                   args: list, value: int = 0, gas_limit: int = 10_000_000,
                   pin_address: Optional[Address] = None) -> Transaction:
    if contract not in unit.contracts:
        raise ChainError(f"unit has no contract {contract!r}")
    return Transaction(from_=from_, to=None, value=value, gas_limit=gas_limit,
                       method=contract, args=list(args), unit=unit,
                       pin_address=pin_address)


def apply_fee(state: WorldState, sender: Address, gas_used: int) -> None:
    """Charge the configured gas price; fees accrue to a sink account so
    the total supply stays constant."""
    if state.gas_price == 0:
        return
    acct = state.ensure_account(sender)
    fee = min(gas_used * state.gas_price, acct.balance)
    acct.balance -= fee
    state.ensure_account(FEE_SINK).balance += fee
