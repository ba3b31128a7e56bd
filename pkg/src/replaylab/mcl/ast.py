"""AST for the Minimal Contract Language (MCL).

MCL is a small curly-brace contract language: state variables, events,
an optional constructor, and methods that are either mutating or
pure-read. All integers are 256-bit unsigned with checked arithmetic;
loops carry a static iteration bound.

Node equality ignores source positions, so a parse/print/parse round
trip yields structurally equal trees.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from ..addresses import Address

# Semantic types, kept as plain strings for easy serialization.
T_UINT = "uint"
T_BOOL = "bool"
T_ADDRESS = "address"
T_HASH = "hash"
T_MAP = "map(address=>uint)"
T_UINT_ARRAY = "uint[]"

SCALAR_TYPES = (T_UINT, T_BOOL, T_ADDRESS, T_HASH)
ALL_TYPES = SCALAR_TYPES + (T_MAP, T_UINT_ARRAY)


@dataclass(frozen=True)
class Pos:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


NO_POS = Pos(0, 0)


class MclError(Exception):
    """Base for all MCL front-end errors; carries a source position."""

    def __init__(self, message: str, pos: Pos = NO_POS):
        super().__init__(f"{pos}: {message}" if pos != NO_POS else message)
        self.message = message
        self.pos = pos


class MclSyntaxError(MclError):
    pass


class MclSemanticError(MclError):
    pass


# ── Expressions ──────────────────────────────────────────────────────────────

@dataclass
class IntLit:
    value: int
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class BoolLit:
    value: bool
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class AddressLit:
    """A literal written as 0x + exactly 40 hex digits."""

    value: Address
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class Name:
    name: str
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class IndexExpr:
    base: "Expr"
    index: "Expr"
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class LengthExpr:
    base: "Expr"
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class BinOp:
    op: str  # + - * / % << >> & | == != < <= > >= && ||
    left: "Expr"
    right: "Expr"
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class NotExpr:
    operand: "Expr"
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class CastAddress:
    """address(e): narrow to the low 160 bits. Traced at runtime."""

    operand: "Expr"
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class CastUint:
    operand: "Expr"
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class EnvExpr:
    kind: str  # now | block_number | msg_sender | msg_value | self
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class BlockhashExpr:
    number: "Expr"
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class BalanceExpr:
    account: "Expr"
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class CallExpr:
    """call Iface(addr).method(args): cast an address to a contract
    interface and invoke a method on it (an internal transaction)."""

    iface: str
    target: "Expr"
    method: str
    args: list["Expr"]
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class NewExpr:
    """new Contract(args): deploy a sibling contract from the same unit
    and evaluate to its address (an internal creation)."""

    contract: str
    args: list["Expr"]
    pos: Pos = field(default=NO_POS, compare=False)


Expr = Union[
    IntLit, BoolLit, AddressLit, Name, IndexExpr, LengthExpr, BinOp, NotExpr,
    CastAddress, CastUint, EnvExpr, BlockhashExpr, BalanceExpr, CallExpr, NewExpr,
]


# ── Statements ───────────────────────────────────────────────────────────────

@dataclass
class AssignStmt:
    target: str
    index: Optional[Expr]  # for map/array element assignment
    value: Expr
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class PushStmt:
    target: str
    value: Expr
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class RequireStmt:
    cond: Expr
    message: Optional[str]
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class AssertStmt:
    cond: Expr
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class EmitStmt:
    event: str
    args: list[Expr]
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class TransferStmt:
    to: Expr
    amount: Expr
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class IfStmt:
    cond: Expr
    then_body: list["Stmt"]
    else_body: list["Stmt"]
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class ForStmt:
    """for VAR in LO .. HI bound N { ... } — iterates VAR over [LO, HI);
    exceeding the static bound N aborts like a failed assert."""

    var: str
    lo: Expr
    hi: Expr
    bound: int
    body: list["Stmt"]
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class ReturnStmt:
    values: list[Expr]
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class ExprStmt:
    expr: Expr  # a call or new used for effect only
    pos: Pos = field(default=NO_POS, compare=False)


Stmt = Union[
    AssignStmt, PushStmt, RequireStmt, AssertStmt, EmitStmt, TransferStmt,
    IfStmt, ForStmt, ReturnStmt, ExprStmt,
]


# ── Declarations ─────────────────────────────────────────────────────────────

@dataclass
class Param:
    name: str
    type: str


@dataclass
class StateVar:
    name: str
    type: str
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class EventDef:
    name: str
    params: list[Param]
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class MethodDef:
    name: str
    params: list[Param]
    pure: bool
    payable: bool
    body: list[Stmt]
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass
class ContractDef:
    name: str
    state_vars: list[StateVar]
    events: list[EventDef]
    constructor: Optional[MethodDef]
    methods: list[MethodDef]
    pos: Pos = field(default=NO_POS, compare=False)

    def state_var(self, name: str) -> Optional[StateVar]:
        for var in self.state_vars:
            if var.name == name:
                return var
        return None

    def event(self, name: str) -> Optional[EventDef]:
        for ev in self.events:
            if ev.name == name:
                return ev
        return None

    def method(self, name: str) -> Optional[MethodDef]:
        for m in self.methods:
            if m.name == name:
                return m
        return None


@dataclass
class SourceUnit:
    contracts: list[ContractDef]
    raw_text: str = field(default="", compare=False)

    def contract(self, name: str) -> Optional[ContractDef]:
        for c in self.contracts:
            if c.name == name:
                return c
        return None
