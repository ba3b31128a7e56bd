"""Instruction interpreter with gas metering.

Gas cost table (normative for this platform):

    intrinsic per transaction      100
    move/arithmetic/jump/check       3
    storage read                    20
    storage write                  100
    emit                            50 + 10 per parameter
    internal call                   40
    transfer                        20
    create                         200 + 10 per stored instruction
    method exit (RET/STOP)           0

Failure semantics: a false require() fails the transaction with the
given message (or "Reverted"); a false assert(), arithmetic overflow,
or runtime type error fails with "Bad instruction"; an out-of-bounds
index fails with "Bad jump destination". Any failure rolls back every
state change of the transaction, including its internal transactions.
Running out of gas is a distinct status that consumes the full limit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .addresses import Address, MASK160
from .chain import (
    Account, EventRecord, MAX_UINT256, ORIGIN_INTERNAL, REASON_BAD_INSTRUCTION,
    REASON_BAD_JUMP, REASON_REVERTED, Receipt, STATUS_FAILED,
    STATUS_OUT_OF_GAS, STATUS_SUCCESS, Transaction, VmTrace, WorldState,
    apply_fee, initial_storage,
)
from .mcl.ast import T_ADDRESS, T_BOOL, T_HASH, T_UINT, T_UINT_ARRAY
from .mcl.compiler import CompiledContract, Instr, MethodInfo

INTRINSIC_GAS = 100
MOVE_GAS = 3
STORAGE_READ_GAS = 20
STORAGE_WRITE_GAS = 100
EMIT_BASE_GAS = 50
EMIT_PARAM_GAS = 10
CALL_GAS = 40
TRANSFER_GAS = 20
CREATE_BASE_GAS = 200
CREATE_INSTR_GAS = 10

_MOVE_OPS = frozenset({
    "ENTER", "MOV", "BIN", "NOT", "LEN", "IDX", "CASTA", "CASTU", "ENV",
    "BHASH", "BAL", "JMP", "JZ", "REQ", "ASSERT",
})
_READ_OPS = frozenset({"SLOAD", "SLOADM", "SLOADI", "SLEN"})
_WRITE_OPS = frozenset({"SSTORE", "SSTOREM", "SSTOREI", "SPUSH"})

MAX_CALL_DEPTH = 64


class VmFailure(Exception):
    """Transaction-level failure; the reason lands in the receipt."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class OutOfGas(Exception):
    pass


def instruction_cost(instr: Instr, create_code_len: int = 0) -> int:
    op = instr.op
    if op in _MOVE_OPS:
        return MOVE_GAS
    if op in _READ_OPS:
        return STORAGE_READ_GAS
    if op in _WRITE_OPS:
        return STORAGE_WRITE_GAS
    if op == "EMIT":
        return EMIT_BASE_GAS + EMIT_PARAM_GAS * len(instr.args[1])
    if op == "CALL":
        return CALL_GAS
    if op == "XFER":
        return TRANSFER_GAS
    if op == "NEW":
        return CREATE_BASE_GAS + CREATE_INSTR_GAS * create_code_len
    if op in ("RET", "STOP"):
        return 0
    raise AssertionError(f"unknown opcode {op}")


class GasMeter:
    def __init__(self, limit: int):
        self.limit = limit
        self.remaining = limit

    def charge(self, amount: int) -> None:
        if amount > self.remaining:
            raise OutOfGas()
        self.remaining -= amount

    @property
    def used(self) -> int:
        return self.limit - self.remaining


class _FreeMeter:
    """Meter for pure calls: pure reads consume no gas."""

    def charge(self, amount: int) -> None:
        pass


@dataclass
class Msg:
    sender: Address
    value: int


def _as_uint(value) -> int:
    if type(value) is not int:
        raise VmFailure(REASON_BAD_INSTRUCTION)
    return value


def _as_bool(value) -> bool:
    if type(value) is not bool:
        raise VmFailure(REASON_BAD_INSTRUCTION)
    return value


def _as_address(value) -> Address:
    if not isinstance(value, Address):
        raise VmFailure(REASON_BAD_INSTRUCTION)
    return value


def value_matches(semtype: str, value) -> bool:
    if semtype == T_UINT:
        return type(value) is int and 0 <= value <= MAX_UINT256
    if semtype == T_BOOL:
        return type(value) is bool
    if semtype == T_ADDRESS:
        return isinstance(value, Address)
    if semtype == T_HASH:
        return isinstance(value, bytes) and len(value) == 32
    if semtype == T_UINT_ARRAY:
        return (isinstance(value, (list, tuple))
                and all(type(v) is int and 0 <= v <= MAX_UINT256 for v in value))
    return False


def _binop(op: str, a, b):
    if op in ("&&", "||"):
        a, b = _as_bool(a), _as_bool(b)
        return (a and b) if op == "&&" else (a or b)
    if op in ("==", "!="):
        if type(a) is not type(b):
            raise VmFailure(REASON_BAD_INSTRUCTION)
        return (a == b) if op == "==" else (a != b)
    a, b = _as_uint(a), _as_uint(b)
    if op == "+":
        result = a + b
        if result > MAX_UINT256:
            raise VmFailure(REASON_BAD_INSTRUCTION)
        return result
    if op == "-":
        if a < b:
            raise VmFailure(REASON_BAD_INSTRUCTION)
        return a - b
    if op == "*":
        result = a * b
        if result > MAX_UINT256:
            raise VmFailure(REASON_BAD_INSTRUCTION)
        return result
    if op == "/":
        if b == 0:
            raise VmFailure(REASON_BAD_INSTRUCTION)
        return a // b
    if op == "%":
        if b == 0:
            raise VmFailure(REASON_BAD_INSTRUCTION)
        return a % b
    if op == "<<":
        if a == 0:
            return 0
        if a.bit_length() + b > 256:
            raise VmFailure(REASON_BAD_INSTRUCTION)
        return a << b
    if op == ">>":
        return a >> b if b < 512 else 0
    if op == "&":
        return a & b
    if op == "|":
        return a | b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    raise AssertionError(f"unknown operator {op}")


class Execution:
    """One transaction's execution context (shared by its internal
    calls): gas meter, trace, event log, and internal transactions."""

    def __init__(self, state: WorldState, meter, trace: VmTrace,
                 block_number: int, timestamp: int, root_tx_hash: str,
                 pure_mode: bool = False):
        self.state = state
        self.meter = meter
        self.trace = trace
        self.block_number = block_number
        self.timestamp = timestamp
        self.root_tx_hash = root_tx_hash
        self.pure_mode = pure_mode
        self.events: list[EventRecord] = []
        self.internal_txs: list[Transaction] = []
        self.depth = 0

    # ── frame execution ──────────────────────────────────────────────

    def run_method(self, account: Account, info: MethodInfo, args: list,
                   msg: Msg) -> tuple:
        if len(args) != len(info.params):
            raise VmFailure(REASON_REVERTED)
        for value, (_, semtype) in zip(args, info.params):
            if not value_matches(semtype, tuple(value) if isinstance(value, list)
                                 else value):
                raise VmFailure(REASON_REVERTED)
        frame: list = [None] * max(info.frame_size, len(args))
        for i, value in enumerate(args):
            frame[i] = tuple(value) if isinstance(value, list) else value
        return self._loop(account, info.entry, frame, msg)

    def _loop(self, account: Account, entry: int, frame: list,
              msg: Msg) -> tuple:
        code = account.code
        instrs = code.instructions
        name = code.name
        pc = entry

        def val(operand):
            kind, payload = operand
            return payload if kind == "imm" else frame[payload]

        while True:
            instr = instrs[pc]
            op = instr.op
            if op == "NEW":
                child = self._resolve_new(account, instr.args[1])
                self.meter.charge(instruction_cost(instr,
                                                   len(child.instructions)))
            else:
                self.meter.charge(instruction_cost(instr))
            self.trace.executed.add((name, pc))
            args = instr.args

            if op == "ENTER":
                pc += 1
            elif op == "MOV":
                frame[args[0]] = val(args[1])
                pc += 1
            elif op == "BIN":
                frame[args[1]] = _binop(args[0], val(args[2]), val(args[3]))
                pc += 1
            elif op == "NOT":
                frame[args[0]] = not _as_bool(val(args[1]))
                pc += 1
            elif op == "LEN":
                seq = val(args[1])
                if not isinstance(seq, tuple):
                    raise VmFailure(REASON_BAD_INSTRUCTION)
                frame[args[0]] = len(seq)
                pc += 1
            elif op == "IDX":
                seq = val(args[1])
                index = _as_uint(val(args[2]))
                if not isinstance(seq, tuple):
                    raise VmFailure(REASON_BAD_INSTRUCTION)
                if index >= len(seq):
                    raise VmFailure(REASON_BAD_JUMP)
                frame[args[0]] = seq[index]
                pc += 1
            elif op == "CASTA":
                operand = val(args[1])
                if isinstance(operand, Address):
                    frame[args[0]] = operand
                else:
                    decoded = Address.from_int(_as_uint(operand) & MASK160)
                    self.trace.casts.append((operand, decoded))
                    frame[args[0]] = decoded
                pc += 1
            elif op == "CASTU":
                operand = val(args[1])
                if isinstance(operand, Address):
                    frame[args[0]] = int(operand)
                elif isinstance(operand, bytes):
                    frame[args[0]] = int.from_bytes(operand, "big")
                elif type(operand) is bool:
                    frame[args[0]] = int(operand)
                else:
                    frame[args[0]] = _as_uint(operand)
                pc += 1
            elif op == "ENV":
                kind = args[1]
                if kind == "now":
                    frame[args[0]] = self.timestamp
                elif kind == "block_number":
                    frame[args[0]] = self.block_number
                elif kind == "msg_sender":
                    frame[args[0]] = msg.sender
                elif kind == "msg_value":
                    frame[args[0]] = msg.value
                else:  # self
                    frame[args[0]] = account.address
                pc += 1
            elif op == "BHASH":
                n = _as_uint(val(args[1]))
                text = self.state.blockhash(n, current=self.block_number)
                frame[args[0]] = bytes.fromhex(text[2:])
                pc += 1
            elif op == "BAL":
                frame[args[0]] = self.state.balance_of(_as_address(val(args[1])))
                pc += 1
            elif op == "JMP":
                pc = args[0]
            elif op == "JZ":
                pc = pc + 1 if _as_bool(val(args[0])) else args[1]
            elif op == "SLOAD":
                frame[args[0]] = account.storage[args[1]]
                pc += 1
            elif op == "SLOADM":
                key = _as_address(val(args[2]))
                frame[args[0]] = account.storage[args[1]].get(key, 0)
                pc += 1
            elif op == "SLOADI":
                arr = account.storage[args[1]]
                index = _as_uint(val(args[2]))
                if index >= len(arr):
                    raise VmFailure(REASON_BAD_JUMP)
                frame[args[0]] = arr[index]
                pc += 1
            elif op == "SLEN":
                frame[args[0]] = len(account.storage[args[1]])
                pc += 1
            elif op == "SSTORE":
                self._check_mutation()
                account.storage[args[0]] = val(args[1])
                pc += 1
            elif op == "SSTOREM":
                self._check_mutation()
                key = _as_address(val(args[1]))
                account.storage[args[0]][key] = _as_uint(val(args[2]))
                pc += 1
            elif op == "SSTOREI":
                self._check_mutation()
                arr = account.storage[args[0]]
                index = _as_uint(val(args[1]))
                if index >= len(arr):
                    raise VmFailure(REASON_BAD_JUMP)
                arr[index] = _as_uint(val(args[2]))
                pc += 1
            elif op == "SPUSH":
                self._check_mutation()
                account.storage[args[0]].append(_as_uint(val(args[1])))
                pc += 1
            elif op == "REQ":
                if not _as_bool(val(args[0])):
                    raise VmFailure(args[1] if args[1] is not None
                                    else REASON_REVERTED)
                pc += 1
            elif op == "ASSERT":
                if not _as_bool(val(args[0])):
                    raise VmFailure(REASON_BAD_INSTRUCTION)
                pc += 1
            elif op == "EMIT":
                self._check_mutation()
                self._emit(account, args[0], [val(a) for a in args[1]])
                pc += 1
            elif op == "XFER":
                self._check_mutation()
                self._transfer(account, _as_address(val(args[0])),
                               _as_uint(val(args[1])))
                pc += 1
            elif op == "CALL":
                result = self._call(account, args[1], _as_address(val(args[2])),
                                    args[3], [val(a) for a in args[4]])
                frame[args[0]] = result
                pc += 1
            elif op == "NEW":
                self._check_mutation()
                frame[args[0]] = self._create_internal(
                    account, args[1], [val(a) for a in args[2]])
                pc += 1
            elif op == "RET":
                return tuple(val(a) for a in args[0])
            elif op == "STOP":
                return ()
            else:
                raise AssertionError(f"unknown opcode {op}")

    # ── effects ──────────────────────────────────────────────────────

    def _check_mutation(self) -> None:
        if self.pure_mode:
            raise VmFailure(REASON_BAD_INSTRUCTION)

    def _emit(self, account: Account, event_name: str, values: list) -> None:
        sig = account.code.interface.event(event_name)
        params: list[tuple[str, str, object]] = []
        for (pname, ptype), value in zip(sig.params, values):
            if not value_matches(ptype, value):
                raise VmFailure(REASON_BAD_INSTRUCTION)
            params.append((pname, ptype, value))
        self.events.append(EventRecord(
            emitter=account.address, name=event_name, params=params,
            tx_hash=self.root_tx_hash, log_index=len(self.events)))

    def _transfer(self, account: Account, to: Address, amount: int) -> None:
        if account.balance < amount:
            raise VmFailure(REASON_REVERTED)
        account.balance -= amount
        self.state.ensure_account(to).balance += amount

    def _call(self, caller: Account, iface: str, target: Address,
              method: str, args: list) -> object:
        if self.depth >= MAX_CALL_DEPTH:
            raise VmFailure(REASON_REVERTED)
        callee = self.state.account(target)
        if callee is None or callee.code is None:
            raise VmFailure(REASON_REVERTED)
        info = callee.code.methods.get(method)
        if info is None or method == "constructor":
            raise VmFailure(REASON_REVERTED)
        if self.pure_mode and not info.pure:
            raise VmFailure(REASON_BAD_INSTRUCTION)
        tx = Transaction(
            from_=caller.address, to=target, value=0,
            gas_limit=getattr(self.meter, "remaining", 0), method=method,
            args=list(args), origin=ORIGIN_INTERNAL,
            parent_tx=self.root_tx_hash,
            block_number=self.block_number, timestamp=self.timestamp)
        tx.hash = self.state.tx_hash(tx)
        self.internal_txs.append(tx)
        self.trace.call_edges.append((caller.address, target, method))
        self.depth += 1
        try:
            values = self.run_method(callee, info, args,
                                     Msg(caller.address, 0))
        finally:
            self.depth -= 1
        if len(values) == 1:
            return values[0]
        return values if values else None

    def _resolve_new(self, account: Account, contract_name: str) -> CompiledContract:
        if account.unit is None or contract_name not in account.unit.contracts:
            raise VmFailure(REASON_REVERTED)
        return account.unit.contracts[contract_name]

    def _create_internal(self, creator: Account, contract_name: str,
                         args: list) -> Address:
        if self.depth >= MAX_CALL_DEPTH:
            raise VmFailure(REASON_REVERTED)
        compiled = self._resolve_new(creator, contract_name)
        address = self.state.new_contract_address()
        tx = Transaction(
            from_=creator.address, to=None, value=0,
            gas_limit=getattr(self.meter, "remaining", 0),
            method=contract_name, args=list(args), origin=ORIGIN_INTERNAL,
            parent_tx=self.root_tx_hash, creates=address,
            block_number=self.block_number, timestamp=self.timestamp)
        tx.hash = self.state.tx_hash(tx)
        self.internal_txs.append(tx)
        self.trace.call_edges.append((creator.address, address, "constructor"))
        account = Account(address, 0, "contract", code=compiled,
                          unit=creator.unit, storage=initial_storage(compiled))
        self.state.accounts[address] = account
        ctor = compiled.methods.get("constructor")
        if ctor is not None:
            self.depth += 1
            try:
                self.run_method(account, ctor, args, Msg(creator.address, 0))
            finally:
                self.depth -= 1
        return address


# ── transaction entry points ─────────────────────────────────────────────────


def _dispatch(state: WorldState, tx: Transaction, execution: Execution) -> None:
    sender = state.account(tx.from_)
    if sender is None:
        raise VmFailure(REASON_REVERTED)
    if tx.is_create:
        compiled = tx.unit.contracts.get(tx.method)
        if compiled is None:
            raise VmFailure(REASON_REVERTED)
        execution.meter.charge(CREATE_BASE_GAS
                               + CREATE_INSTR_GAS * len(compiled.instructions))
        address = tx.pin_address or state.new_contract_address()
        if address in state.accounts:
            raise VmFailure(REASON_REVERTED)
        ctor = compiled.methods.get("constructor")
        if tx.value > 0 and not (ctor is not None and ctor.payable):
            raise VmFailure(REASON_REVERTED)
        if sender.balance < tx.value:
            raise VmFailure(REASON_REVERTED)
        account = Account(address, 0, "contract", code=compiled, unit=tx.unit,
                          storage=initial_storage(compiled))
        state.accounts[address] = account
        sender.balance -= tx.value
        account.balance += tx.value
        tx.creates = address
        if ctor is not None:
            execution.run_method(account, ctor, tx.args,
                                 Msg(tx.from_, tx.value))
        return
    target = state.account(tx.to)
    if target is None or target.code is None:
        raise VmFailure(REASON_REVERTED)
    info = target.code.methods.get(tx.method)
    if info is None or tx.method == "constructor":
        raise VmFailure(REASON_REVERTED)
    if tx.value > 0 and not info.payable:
        raise VmFailure(REASON_REVERTED)
    if sender.balance < tx.value:
        raise VmFailure(REASON_REVERTED)
    sender.balance -= tx.value
    target.balance += tx.value
    execution.run_method(target, info, tx.args, Msg(tx.from_, tx.value))


def execute_transaction(state: WorldState, tx: Transaction, block_number: int,
                        timestamp: int) -> tuple[Receipt, VmTrace]:
    """Execute one external transaction; failures become receipt data,
    never exceptions."""
    trace = VmTrace()
    snapshot = {addr: acct.clone() for addr, acct in state.accounts.items()}
    meter = GasMeter(tx.gas_limit)
    execution = Execution(state, meter, trace, block_number, timestamp,
                          root_tx_hash=tx.hash)
    try:
        meter.charge(INTRINSIC_GAS)
        _dispatch(state, tx, execution)
        if meter.remaining == 0:
            raise OutOfGas()
        receipt = Receipt(tx_hash=tx.hash, status=STATUS_SUCCESS,
                          gas_used=meter.used, events=list(execution.events),
                          block_number=block_number,
                          internal_txs=list(execution.internal_txs),
                          created=tx.creates)
    except VmFailure as failure:
        state.accounts = snapshot
        receipt = Receipt(tx_hash=tx.hash, status=STATUS_FAILED,
                          gas_used=meter.used, events=[],
                          failure_reason=failure.reason,
                          block_number=block_number,
                          internal_txs=list(execution.internal_txs),
                          created=None)
        tx.creates = None
    except OutOfGas:
        state.accounts = snapshot
        receipt = Receipt(tx_hash=tx.hash, status=STATUS_OUT_OF_GAS,
                          gas_used=tx.gas_limit, events=[],
                          failure_reason=None, block_number=block_number,
                          internal_txs=list(execution.internal_txs),
                          created=None)
        tx.creates = None
    apply_fee(state, tx.from_, receipt.gas_used)
    return receipt, trace


def run_pure(state: WorldState, account: Account, info: MethodInfo,
             args: list) -> tuple:
    """Run a pure-read method against the latest block's context."""
    latest = state.blocks[-1] if state.blocks else None
    trace = VmTrace()
    execution = Execution(
        state, _FreeMeter(), trace,
        block_number=latest.number if latest else 0,
        timestamp=latest.timestamp if latest else 0,
        root_tx_hash="0x" + "00" * 32, pure_mode=True)
    return execution.run_method(account, info, args,
                                Msg(account.address, 0))
