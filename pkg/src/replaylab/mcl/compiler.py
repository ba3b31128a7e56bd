"""Compiler from MCL ASTs to a flat, indexed instruction list.

The target is a small register-style IR: each method occupies a
contiguous run of instructions in the contract's single instruction
list, beginning with an ENTER prologue and ending with a STOP epilogue.
Operands are either immediates ("imm", value) or frame slots
("loc", index); frames hold parameters, named locals, and expression
temporaries.

Compilation is a pure function of the AST: equal trees produce
identical instruction lists.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .ast import (
    AddressLit, AssertStmt, AssignStmt, BalanceExpr, BinOp, BlockhashExpr,
    BoolLit, CallExpr, CastAddress, CastUint, ContractDef, EmitStmt, EnvExpr,
    Expr, ExprStmt, ForStmt, IfStmt, IndexExpr, IntLit, LengthExpr,
    MclSemanticError, MethodDef, Name, NewExpr, NotExpr, PushStmt,
    RequireStmt, ReturnStmt, SourceUnit, Stmt, TransferStmt, T_MAP,
    T_UINT_ARRAY,
)
from .checker import check
from .parser import parse

Operand = tuple  # ("imm", value) | ("loc", slot)


def imm(value) -> Operand:
    return ("imm", value)


def loc(slot: int) -> Operand:
    return ("loc", slot)


@dataclass(frozen=True)
class Instr:
    op: str
    args: tuple = ()

    def __repr__(self) -> str:
        return f"{self.op}{list(self.args)}"


@dataclass(frozen=True)
class MethodSig:
    name: str
    params: tuple[tuple[str, str], ...]  # (name, type)
    pure: bool
    payable: bool


@dataclass(frozen=True)
class EventSig:
    name: str
    params: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class InterfaceDesc:
    """Callable surface of a contract: the lab's stand-in for an ABI."""

    name: str
    constructor_params: tuple[tuple[str, str], ...]
    constructor_payable: bool
    methods: tuple[MethodSig, ...]
    events: tuple[EventSig, ...]

    def method(self, name: str) -> Optional[MethodSig]:
        for sig in self.methods:
            if sig.name == name:
                return sig
        return None

    def event(self, name: str) -> Optional[EventSig]:
        for sig in self.events:
            if sig.name == name:
                return sig
        return None

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "constructor": {
                "params": [{"name": n, "type": t} for n, t in self.constructor_params],
                "payable": self.constructor_payable,
            },
            "methods": [
                {"name": m.name,
                 "params": [{"name": n, "type": t} for n, t in m.params],
                 "pure": m.pure, "payable": m.payable}
                for m in self.methods
            ],
            "events": [
                {"name": e.name,
                 "params": [{"name": n, "type": t} for n, t in e.params]}
                for e in self.events
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "InterfaceDesc":
        return cls(
            name=data["name"],
            constructor_params=tuple((p["name"], p["type"])
                                     for p in data["constructor"]["params"]),
            constructor_payable=data["constructor"]["payable"],
            methods=tuple(
                MethodSig(m["name"],
                          tuple((p["name"], p["type"]) for p in m["params"]),
                          m["pure"], m["payable"])
                for m in data["methods"]),
            events=tuple(
                EventSig(e["name"],
                         tuple((p["name"], p["type"]) for p in e["params"]))
                for e in data["events"]),
        )


@dataclass
class MethodInfo:
    name: str
    entry: int
    params: tuple[tuple[str, str], ...]
    pure: bool
    payable: bool
    frame_size: int


@dataclass
class CompiledContract:
    name: str
    instructions: list[Instr]
    interface: InterfaceDesc
    methods: dict[str, MethodInfo]  # includes "constructor" when declared
    state_vars: tuple[tuple[str, str], ...]  # (name, type), declaration order

    @property
    def instruction_count(self) -> int:
        return len(self.instructions)

    def fingerprint(self) -> str:
        return ";".join(repr(i) for i in self.instructions)


@dataclass
class CompiledUnit:
    source_text: str
    contracts: dict[str, CompiledContract] = field(default_factory=dict)

    def as_list(self) -> list[CompiledContract]:
        return list(self.contracts.values())


class _MethodCompiler:
    def __init__(self, contract: ContractDef, method: MethodDef,
                 instrs: list[Instr]):
        self.contract = contract
        self.method = method
        self.instrs = instrs
        self.slots: dict[str, int] = {}
        for p in method.params:
            self.slots[p.name] = len(self.slots)
        self._collect_locals(method.body)
        self.temp_base = len(self.slots)
        self.temp_next = self.temp_base
        self.temp_high = self.temp_base

    def _collect_locals(self, body: list[Stmt]) -> None:
        for stmt in body:
            if isinstance(stmt, AssignStmt):
                if (self.contract.state_var(stmt.target) is None
                        and stmt.target not in self.slots):
                    self.slots[stmt.target] = len(self.slots)
            elif isinstance(stmt, IfStmt):
                self._collect_locals(stmt.then_body)
                self._collect_locals(stmt.else_body)
            elif isinstance(stmt, ForStmt):
                if stmt.var not in self.slots:
                    self.slots[stmt.var] = len(self.slots)
                self._collect_locals(stmt.body)

    # ── emission helpers ─────────────────────────────────────────────

    def emit(self, op: str, *args) -> int:
        self.instrs.append(Instr(op, tuple(args)))
        return len(self.instrs) - 1

    def patch(self, index: int, *args) -> None:
        self.instrs[index] = Instr(self.instrs[index].op, tuple(args))

    def temp(self) -> int:
        slot = self.temp_next
        self.temp_next += 1
        self.temp_high = max(self.temp_high, self.temp_next)
        return slot

    def is_state(self, name: str) -> bool:
        return (self.contract.state_var(name) is not None
                and name not in self.slots)

    # ── expressions ──────────────────────────────────────────────────

    def compile_expr(self, expr: Expr, dst: Optional[int] = None) -> Operand:
        """Compile an expression; returns the operand holding its value.
        If ``dst`` is given the value is left in that slot."""
        if isinstance(expr, IntLit):
            return self._place(imm(expr.value), dst)
        if isinstance(expr, BoolLit):
            return self._place(imm(expr.value), dst)
        if isinstance(expr, AddressLit):
            return self._place(imm(expr.value), dst)
        if isinstance(expr, Name):
            if self.is_state(expr.name):
                out = self.temp() if dst is None else dst
                self.emit("SLOAD", out, expr.name)
                return loc(out)
            return self._place(loc(self.slots[expr.name]), dst)
        if isinstance(expr, IndexExpr):
            return self._compile_index(expr, dst)
        if isinstance(expr, LengthExpr):
            if isinstance(expr.base, Name) and self.is_state(expr.base.name):
                out = self.temp() if dst is None else dst
                self.emit("SLEN", out, expr.base.name)
                return loc(out)
            base = self.compile_expr(expr.base)
            out = self.temp() if dst is None else dst
            self.emit("LEN", out, base)
            return loc(out)
        if isinstance(expr, BinOp):
            left = self.compile_expr(expr.left)
            right = self.compile_expr(expr.right)
            out = self.temp() if dst is None else dst
            self.emit("BIN", expr.op, out, left, right)
            return loc(out)
        if isinstance(expr, NotExpr):
            operand = self.compile_expr(expr.operand)
            out = self.temp() if dst is None else dst
            self.emit("NOT", out, operand)
            return loc(out)
        if isinstance(expr, CastAddress):
            operand = self.compile_expr(expr.operand)
            out = self.temp() if dst is None else dst
            self.emit("CASTA", out, operand)
            return loc(out)
        if isinstance(expr, CastUint):
            operand = self.compile_expr(expr.operand)
            out = self.temp() if dst is None else dst
            self.emit("CASTU", out, operand)
            return loc(out)
        if isinstance(expr, EnvExpr):
            out = self.temp() if dst is None else dst
            self.emit("ENV", out, expr.kind)
            return loc(out)
        if isinstance(expr, BlockhashExpr):
            number = self.compile_expr(expr.number)
            out = self.temp() if dst is None else dst
            self.emit("BHASH", out, number)
            return loc(out)
        if isinstance(expr, BalanceExpr):
            account = self.compile_expr(expr.account)
            out = self.temp() if dst is None else dst
            self.emit("BAL", out, account)
            return loc(out)
        if isinstance(expr, CallExpr):
            target = self.compile_expr(expr.target)
            args = tuple(self.compile_expr(a) for a in expr.args)
            out = self.temp() if dst is None else dst
            self.emit("CALL", out, expr.iface, target, expr.method, args)
            return loc(out)
        if isinstance(expr, NewExpr):
            args = tuple(self.compile_expr(a) for a in expr.args)
            out = self.temp() if dst is None else dst
            self.emit("NEW", out, expr.contract, args)
            return loc(out)
        raise TypeError(f"unknown expression node {expr!r}")

    def _place(self, operand: Operand, dst: Optional[int]) -> Operand:
        if dst is None:
            return operand
        if operand == loc(dst):
            return operand
        self.emit("MOV", dst, operand)
        return loc(dst)

    def _compile_index(self, expr: IndexExpr, dst: Optional[int]) -> Operand:
        if isinstance(expr.base, Name) and self.is_state(expr.base.name):
            var = self.contract.state_var(expr.base.name)
            index = self.compile_expr(expr.index)
            out = self.temp() if dst is None else dst
            if var.type == T_MAP:
                self.emit("SLOADM", out, expr.base.name, index)
            elif var.type == T_UINT_ARRAY:
                self.emit("SLOADI", out, expr.base.name, index)
            else:
                raise MclSemanticError(
                    f"cannot index {var.type} variable", expr.pos)
            return loc(out)
        base = self.compile_expr(expr.base)
        index = self.compile_expr(expr.index)
        out = self.temp() if dst is None else dst
        self.emit("IDX", out, base, index)
        return loc(out)

    # ── statements ───────────────────────────────────────────────────

    def compile_body(self, body: list[Stmt]) -> None:
        mark = self.temp_next
        for stmt in body:
            self.compile_stmt(stmt)
            self.temp_next = mark

    def compile_stmt(self, stmt: Stmt) -> None:
        if isinstance(stmt, AssignStmt):
            if self.is_state(stmt.target):
                var = self.contract.state_var(stmt.target)
                if stmt.index is not None:
                    index = self.compile_expr(stmt.index)
                    value = self.compile_expr(stmt.value)
                    op = "SSTOREM" if var.type == T_MAP else "SSTOREI"
                    self.emit(op, stmt.target, index, value)
                else:
                    value = self.compile_expr(stmt.value)
                    self.emit("SSTORE", stmt.target, value)
            else:
                dst = self.slots[stmt.target]
                self.compile_expr(stmt.value, dst=dst)
        elif isinstance(stmt, PushStmt):
            value = self.compile_expr(stmt.value)
            self.emit("SPUSH", stmt.target, value)
        elif isinstance(stmt, RequireStmt):
            cond = self.compile_expr(stmt.cond)
            self.emit("REQ", cond, stmt.message)
        elif isinstance(stmt, AssertStmt):
            cond = self.compile_expr(stmt.cond)
            self.emit("ASSERT", cond)
        elif isinstance(stmt, EmitStmt):
            args = tuple(self.compile_expr(a) for a in stmt.args)
            self.emit("EMIT", stmt.event, args)
        elif isinstance(stmt, TransferStmt):
            to = self.compile_expr(stmt.to)
            amount = self.compile_expr(stmt.amount)
            self.emit("XFER", to, amount)
        elif isinstance(stmt, IfStmt):
            cond = self.compile_expr(stmt.cond)
            jz_at = self.emit("JZ", cond, None)
            self.compile_body(stmt.then_body)
            if stmt.else_body:
                jmp_at = self.emit("JMP", None)
                self.patch(jz_at, cond, len(self.instrs))
                self.compile_body(stmt.else_body)
                self.patch(jmp_at, len(self.instrs))
            else:
                self.patch(jz_at, cond, len(self.instrs))
        elif isinstance(stmt, ForStmt):
            self._compile_for(stmt)
        elif isinstance(stmt, ReturnStmt):
            values = tuple(self.compile_expr(v) for v in stmt.values)
            self.emit("RET", values)
        elif isinstance(stmt, ExprStmt):
            self.compile_expr(stmt.expr)
        else:
            raise TypeError(f"unknown statement node {stmt!r}")

    def _compile_for(self, stmt: ForStmt) -> None:
        var_slot = self.slots[stmt.var]
        self.compile_expr(stmt.lo, dst=var_slot)
        counter = self.temp()
        self.emit("MOV", counter, imm(0))
        top = len(self.instrs)
        mark = self.temp_next
        hi = self.compile_expr(stmt.hi)
        cond = self.temp()
        self.emit("BIN", "<", cond, loc(var_slot), hi)
        jz_at = self.emit("JZ", loc(cond), None)
        # static iteration bound: overrunning it fails like a bad assert
        guard = self.temp()
        self.emit("BIN", "<", guard, loc(counter), imm(stmt.bound))
        self.emit("ASSERT", loc(guard))
        self.temp_next = mark
        self.compile_body(stmt.body)
        self.emit("BIN", "+", var_slot, loc(var_slot), imm(1))
        self.emit("BIN", "+", counter, loc(counter), imm(1))
        self.emit("JMP", top)
        self.patch(jz_at, loc(cond), len(self.instrs))


def _interface_of(contract: ContractDef) -> InterfaceDesc:
    ctor = contract.constructor
    return InterfaceDesc(
        name=contract.name,
        constructor_params=tuple((p.name, p.type)
                                 for p in (ctor.params if ctor else [])),
        constructor_payable=bool(ctor and ctor.payable),
        methods=tuple(
            MethodSig(m.name, tuple((p.name, p.type) for p in m.params),
                      m.pure, m.payable)
            for m in contract.methods),
        events=tuple(
            EventSig(e.name, tuple((p.name, p.type) for p in e.params))
            for e in contract.events),
    )


def _compile_contract(contract: ContractDef) -> CompiledContract:
    instrs: list[Instr] = []
    methods: dict[str, MethodInfo] = {}
    declared = list(contract.methods)
    if contract.constructor is not None:
        declared.insert(0, contract.constructor)
    for method in declared:
        entry = len(instrs)
        mc = _MethodCompiler(contract, method, instrs)
        mc.emit("ENTER")
        mc.compile_body(method.body)
        mc.emit("STOP")
        methods[method.name] = MethodInfo(
            name=method.name,
            entry=entry,
            params=tuple((p.name, p.type) for p in method.params),
            pure=method.pure,
            payable=method.payable,
            frame_size=mc.temp_high,
        )
    compiled = CompiledContract(
        name=contract.name,
        instructions=instrs,
        interface=_interface_of(contract),
        methods=methods,
        state_vars=tuple((v.name, v.type) for v in contract.state_vars),
    )
    for i, instr in enumerate(instrs):
        if instr.op in ("JMP", "JZ"):
            target = instr.args[-1]
            if not isinstance(target, int) or not 0 <= target < len(instrs):
                raise AssertionError(f"bad jump target at {i}: {instr}")
    return compiled


def compile_unit(source: Union[str, SourceUnit]) -> CompiledUnit:
    """Parse (if needed), check, and compile every contract in a unit."""
    unit = parse(source) if isinstance(source, str) else source
    check(unit)
    result = CompiledUnit(source_text=unit.raw_text)
    for contract in unit.contracts:
        result.contracts[contract.name] = _compile_contract(contract)
    return result
