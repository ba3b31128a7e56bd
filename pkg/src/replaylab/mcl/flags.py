"""Static analysis over MCL source: environment reads, interface casts,
pure methods, and literal address harvesting.

A literal counts as an address when it is written in address form
(0x + 40 hex digits) or when its value's minimal hex rendering is
exactly 40 digits, i.e. the value fills all 20 bytes. The latter rule
catches addresses smuggled through plain integer literals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..addresses import Address, looks_like_address
from .ast import (
    AddressLit, AssertStmt, AssignStmt, BalanceExpr, BinOp, BlockhashExpr,
    BoolLit, CallExpr, CastAddress, CastUint, ContractDef, EmitStmt, EnvExpr,
    Expr, ExprStmt, ForStmt, IfStmt, IndexExpr, IntLit, LengthExpr,
    MethodDef, Name, NewExpr, NotExpr, Pos, PushStmt, RequireStmt,
    ReturnStmt, SourceUnit, Stmt, TransferStmt,
)

SPECIAL_ENV_KINDS = ("now", "block_number")


@dataclass(frozen=True)
class PureFunctionDesc:
    contract: str
    name: str
    param_types: tuple[str, ...]


@dataclass
class StaticFlags:
    uses_special_vars: bool = False
    has_contract_casts: bool = False
    pure_functions: list[PureFunctionDesc] = field(default_factory=list)
    literal_addresses: list[tuple[Address, Pos]] = field(default_factory=list)

    def literal_address_set(self) -> set[Address]:
        return {addr for addr, _ in self.literal_addresses}


class _Walker:
    def __init__(self, flags: StaticFlags):
        self.flags = flags

    def walk_expr(self, expr: Expr) -> None:
        if isinstance(expr, AddressLit):
            self.flags.literal_addresses.append((expr.value, expr.pos))
        elif isinstance(expr, IntLit):
            if looks_like_address(expr.value):
                self.flags.literal_addresses.append(
                    (Address.from_int(expr.value), expr.pos))
        elif isinstance(expr, EnvExpr):
            if expr.kind in SPECIAL_ENV_KINDS:
                self.flags.uses_special_vars = True
        elif isinstance(expr, BlockhashExpr):
            self.flags.uses_special_vars = True
            self.walk_expr(expr.number)
        elif isinstance(expr, CallExpr):
            self.flags.has_contract_casts = True
            self.walk_expr(expr.target)
            for arg in expr.args:
                self.walk_expr(arg)
        elif isinstance(expr, NewExpr):
            for arg in expr.args:
                self.walk_expr(arg)
        elif isinstance(expr, (IndexExpr,)):
            self.walk_expr(expr.base)
            self.walk_expr(expr.index)
        elif isinstance(expr, LengthExpr):
            self.walk_expr(expr.base)
        elif isinstance(expr, BinOp):
            self.walk_expr(expr.left)
            self.walk_expr(expr.right)
        elif isinstance(expr, NotExpr):
            self.walk_expr(expr.operand)
        elif isinstance(expr, (CastAddress, CastUint)):
            self.walk_expr(expr.operand)
        elif isinstance(expr, BalanceExpr):
            self.walk_expr(expr.account)
        elif isinstance(expr, (BoolLit, Name)):
            pass
        else:
            raise TypeError(f"unknown expression node {expr!r}")

    def walk_stmt(self, stmt: Stmt) -> None:
        if isinstance(stmt, AssignStmt):
            if stmt.index is not None:
                self.walk_expr(stmt.index)
            self.walk_expr(stmt.value)
        elif isinstance(stmt, PushStmt):
            self.walk_expr(stmt.value)
        elif isinstance(stmt, (RequireStmt, AssertStmt)):
            self.walk_expr(stmt.cond)
        elif isinstance(stmt, EmitStmt):
            for arg in stmt.args:
                self.walk_expr(arg)
        elif isinstance(stmt, TransferStmt):
            self.walk_expr(stmt.to)
            self.walk_expr(stmt.amount)
        elif isinstance(stmt, IfStmt):
            self.walk_expr(stmt.cond)
            for s in stmt.then_body:
                self.walk_stmt(s)
            for s in stmt.else_body:
                self.walk_stmt(s)
        elif isinstance(stmt, ForStmt):
            self.walk_expr(stmt.lo)
            self.walk_expr(stmt.hi)
            for s in stmt.body:
                self.walk_stmt(s)
        elif isinstance(stmt, ReturnStmt):
            for value in stmt.values:
                self.walk_expr(value)
        elif isinstance(stmt, ExprStmt):
            self.walk_expr(stmt.expr)
        else:
            raise TypeError(f"unknown statement node {stmt!r}")


def _walk_contract(contract: ContractDef, walker: _Walker) -> None:
    methods: list[MethodDef] = []
    if contract.constructor is not None:
        methods.append(contract.constructor)
    methods.extend(contract.methods)
    for method in methods:
        if method.pure:
            walker.flags.pure_functions.append(PureFunctionDesc(
                contract.name, method.name,
                tuple(p.type for p in method.params)))
        for stmt in method.body:
            walker.walk_stmt(stmt)


def static_flags(unit: SourceUnit) -> StaticFlags:
    flags = StaticFlags()
    walker = _Walker(flags)
    for contract in unit.contracts:
        _walk_contract(contract, walker)
    return flags
