"""Semantic checks for MCL units: name resolution, light type checking,
and purity enforcement for pure-read methods."""

from __future__ import annotations

from typing import Optional

from .ast import (
    AddressLit, AssertStmt, AssignStmt, BalanceExpr, BinOp, BlockhashExpr,
    BoolLit, CallExpr, CastAddress, CastUint, ContractDef, EmitStmt, EnvExpr,
    Expr, ExprStmt, ForStmt, IfStmt, IndexExpr, IntLit, LengthExpr,
    MclSemanticError, MethodDef, Name, NewExpr, NotExpr, Pos, PushStmt,
    RequireStmt, ReturnStmt, SourceUnit, Stmt, TransferStmt, T_ADDRESS,
    T_BOOL, T_HASH, T_MAP, T_UINT, T_UINT_ARRAY,
)

_ARITH_OPS = {"+", "-", "*", "/", "%", "<<", ">>", "&", "|"}
_ORDER_OPS = {"<", "<=", ">", ">="}
_EQ_OPS = {"==", "!="}
_BOOL_OPS = {"&&", "||"}

_ENV_TYPES = {
    "now": T_UINT,
    "block_number": T_UINT,
    "msg_sender": T_ADDRESS,
    "msg_value": T_UINT,
    "self": T_ADDRESS,
}

# "unknown" means the checker could not infer a type; such expressions are
# accepted here and validated at run time instead.
UNKNOWN = "unknown"


class _MethodChecker:
    def __init__(self, unit: SourceUnit, contract: ContractDef, method: MethodDef):
        self.unit = unit
        self.contract = contract
        self.method = method
        self.locals: dict[str, str] = {p.name: p.type for p in method.params}

    def fail(self, message: str, pos: Pos) -> None:
        raise MclSemanticError(
            f"{self.contract.name}.{self.method.name}: {message}", pos)

    # ── expression typing ────────────────────────────────────────────

    def type_of(self, expr: Expr) -> str:
        if isinstance(expr, IntLit):
            return T_UINT
        if isinstance(expr, BoolLit):
            return T_BOOL
        if isinstance(expr, AddressLit):
            return T_ADDRESS
        if isinstance(expr, Name):
            if expr.name in self.locals:
                return self.locals[expr.name]
            var = self.contract.state_var(expr.name)
            if var is not None:
                return var.type
            self.fail(f"unknown name {expr.name!r}", expr.pos)
        if isinstance(expr, IndexExpr):
            base = self.type_of(expr.base)
            index = self.type_of(expr.index)
            if base == T_MAP:
                self.expect_type(index, T_ADDRESS, "map key", expr.pos)
                return T_UINT
            if base == T_UINT_ARRAY:
                self.expect_type(index, T_UINT, "array index", expr.pos)
                return T_UINT
            if base == UNKNOWN:
                return UNKNOWN
            self.fail(f"cannot index a value of type {base}", expr.pos)
        if isinstance(expr, LengthExpr):
            base = self.type_of(expr.base)
            if base not in (T_UINT_ARRAY, UNKNOWN):
                self.fail(f".length needs an array, got {base}", expr.pos)
            return T_UINT
        if isinstance(expr, BinOp):
            left = self.type_of(expr.left)
            right = self.type_of(expr.right)
            if expr.op in _ARITH_OPS or expr.op in _ORDER_OPS:
                self.expect_type(left, T_UINT, f"left operand of {expr.op}", expr.pos)
                self.expect_type(right, T_UINT, f"right operand of {expr.op}", expr.pos)
                return T_UINT if expr.op in _ARITH_OPS else T_BOOL
            if expr.op in _BOOL_OPS:
                self.expect_type(left, T_BOOL, f"left operand of {expr.op}", expr.pos)
                self.expect_type(right, T_BOOL, f"right operand of {expr.op}", expr.pos)
                return T_BOOL
            if expr.op in _EQ_OPS:
                if UNKNOWN not in (left, right) and left != right:
                    self.fail(f"cannot compare {left} with {right}", expr.pos)
                return T_BOOL
            self.fail(f"unknown operator {expr.op}", expr.pos)
        if isinstance(expr, NotExpr):
            self.expect_type(self.type_of(expr.operand), T_BOOL, "operand of !",
                             expr.pos)
            return T_BOOL
        if isinstance(expr, CastAddress):
            operand = self.type_of(expr.operand)
            if operand not in (T_UINT, T_ADDRESS, UNKNOWN):
                self.fail(f"address(...) needs a uint, got {operand}", expr.pos)
            return T_ADDRESS
        if isinstance(expr, CastUint):
            operand = self.type_of(expr.operand)
            if operand == T_MAP or operand == T_UINT_ARRAY:
                self.fail(f"uint(...) needs a scalar, got {operand}", expr.pos)
            return T_UINT
        if isinstance(expr, EnvExpr):
            return _ENV_TYPES[expr.kind]
        if isinstance(expr, BlockhashExpr):
            self.expect_type(self.type_of(expr.number), T_UINT, "blockhash argument",
                             expr.pos)
            return T_HASH
        if isinstance(expr, BalanceExpr):
            self.expect_type(self.type_of(expr.account), T_ADDRESS,
                             "balance argument", expr.pos)
            return T_UINT
        if isinstance(expr, CallExpr):
            return self.check_call(expr)
        if isinstance(expr, NewExpr):
            return self.check_new(expr)
        raise TypeError(f"unknown expression node {expr!r}")

    def expect_type(self, actual: str, expected: str, what: str, pos: Pos) -> None:
        if actual not in (expected, UNKNOWN):
            self.fail(f"{what} must be {expected}, got {actual}", pos)

    def resolve_iface_method(self, expr: CallExpr) -> MethodDef:
        iface = self.unit.contract(expr.iface)
        if iface is None:
            self.fail(f"unknown contract interface {expr.iface!r}", expr.pos)
        target = iface.method(expr.method)
        if target is None:
            self.fail(f"interface {expr.iface} has no method {expr.method!r}",
                      expr.pos)
        return target

    def check_call(self, expr: CallExpr) -> str:
        target = self.resolve_iface_method(expr)
        self.expect_type(self.type_of(expr.target), T_ADDRESS, "call target",
                         expr.pos)
        if len(expr.args) != len(target.params):
            self.fail(f"{expr.iface}.{expr.method} expects {len(target.params)} "
                      f"arguments, got {len(expr.args)}", expr.pos)
        for arg, param in zip(expr.args, target.params):
            self.expect_type(self.type_of(arg), param.type,
                             f"argument {param.name!r}", expr.pos)
        if self.method.pure and not target.pure:
            self.fail("pure method calls mutating method "
                      f"{expr.iface}.{expr.method}", expr.pos)
        return UNKNOWN

    def check_new(self, expr: NewExpr) -> str:
        if self.method.pure:
            self.fail("pure method creates a contract", expr.pos)
        target = self.unit.contract(expr.contract)
        if target is None:
            self.fail(f"unknown contract {expr.contract!r}", expr.pos)
        ctor_params = target.constructor.params if target.constructor else []
        if len(expr.args) != len(ctor_params):
            self.fail(f"constructor of {expr.contract} expects "
                      f"{len(ctor_params)} arguments, got {len(expr.args)}",
                      expr.pos)
        for arg, param in zip(expr.args, ctor_params):
            self.expect_type(self.type_of(arg), param.type,
                             f"constructor argument {param.name!r}", expr.pos)
        return T_ADDRESS

    # ── statements ───────────────────────────────────────────────────

    def check_body(self, body: list[Stmt]) -> None:
        for stmt in body:
            self.check_stmt(stmt)

    def check_stmt(self, stmt: Stmt) -> None:
        pure = self.method.pure
        if isinstance(stmt, AssignStmt):
            value_type = self.type_of(stmt.value)
            state = self.contract.state_var(stmt.target)
            if state is not None and stmt.target not in self.locals:
                if pure:
                    self.fail(f"pure method writes state variable "
                              f"{stmt.target!r}", stmt.pos)
                if stmt.index is not None:
                    index_type = self.type_of(stmt.index)
                    if state.type == T_MAP:
                        self.expect_type(index_type, T_ADDRESS, "map key", stmt.pos)
                        self.expect_type(value_type, T_UINT, "map value", stmt.pos)
                    elif state.type == T_UINT_ARRAY:
                        self.expect_type(index_type, T_UINT, "array index", stmt.pos)
                        self.expect_type(value_type, T_UINT, "array element", stmt.pos)
                    else:
                        self.fail(f"cannot index {state.type} variable", stmt.pos)
                else:
                    if state.type in (T_MAP, T_UINT_ARRAY):
                        self.fail(f"cannot assign whole {state.type} variable",
                                  stmt.pos)
                    self.expect_type(value_type, state.type,
                                     f"value for {stmt.target!r}", stmt.pos)
                return
            # local (created on first assignment) or parameter
            if stmt.index is not None:
                self.fail("cannot index-assign a local", stmt.pos)
            if stmt.target in self.locals:
                existing = self.locals[stmt.target]
                if UNKNOWN not in (existing, value_type) and existing != value_type:
                    self.locals[stmt.target] = UNKNOWN
            else:
                self.locals[stmt.target] = value_type
        elif isinstance(stmt, PushStmt):
            if pure:
                self.fail(f"pure method writes state array {stmt.target!r}",
                          stmt.pos)
            state = self.contract.state_var(stmt.target)
            if state is None or state.type != T_UINT_ARRAY:
                self.fail(f"push target {stmt.target!r} must be a uint[] state "
                          "variable", stmt.pos)
            self.expect_type(self.type_of(stmt.value), T_UINT, "pushed value",
                             stmt.pos)
        elif isinstance(stmt, RequireStmt):
            self.expect_type(self.type_of(stmt.cond), T_BOOL, "require condition",
                             stmt.pos)
        elif isinstance(stmt, AssertStmt):
            self.expect_type(self.type_of(stmt.cond), T_BOOL, "assert condition",
                             stmt.pos)
        elif isinstance(stmt, EmitStmt):
            if pure:
                self.fail("pure method emits an event", stmt.pos)
            event = self.contract.event(stmt.event)
            if event is None:
                self.fail(f"unknown event {stmt.event!r}", stmt.pos)
            if len(stmt.args) != len(event.params):
                self.fail(f"event {stmt.event} expects {len(event.params)} "
                          f"arguments, got {len(stmt.args)}", stmt.pos)
            for arg, param in zip(stmt.args, event.params):
                self.expect_type(self.type_of(arg), param.type,
                                 f"event parameter {param.name!r}", stmt.pos)
        elif isinstance(stmt, TransferStmt):
            if pure:
                self.fail("pure method transfers value", stmt.pos)
            self.expect_type(self.type_of(stmt.to), T_ADDRESS, "transfer target",
                             stmt.pos)
            self.expect_type(self.type_of(stmt.amount), T_UINT, "transfer amount",
                             stmt.pos)
        elif isinstance(stmt, IfStmt):
            self.expect_type(self.type_of(stmt.cond), T_BOOL, "if condition",
                             stmt.pos)
            self.check_body(stmt.then_body)
            self.check_body(stmt.else_body)
        elif isinstance(stmt, ForStmt):
            self.expect_type(self.type_of(stmt.lo), T_UINT, "loop start", stmt.pos)
            self.expect_type(self.type_of(stmt.hi), T_UINT, "loop end", stmt.pos)
            outer = self.locals.get(stmt.var)
            self.locals[stmt.var] = T_UINT
            self.check_body(stmt.body)
            if outer is None:
                del self.locals[stmt.var]
            else:
                self.locals[stmt.var] = outer
        elif isinstance(stmt, ReturnStmt):
            for value in stmt.values:
                self.type_of(value)
        elif isinstance(stmt, ExprStmt):
            self.type_of(stmt.expr)
        else:
            raise TypeError(f"unknown statement node {stmt!r}")


def check(unit: SourceUnit) -> None:
    """Validate a parsed unit; raises MclSemanticError on the first issue."""
    for contract in unit.contracts:
        methods = list(contract.methods)
        if contract.constructor is not None:
            if contract.constructor.pure:
                raise MclSemanticError(
                    f"{contract.name}: constructor cannot be pure",
                    contract.constructor.pos)
            methods.insert(0, contract.constructor)
        names = {v.name for v in contract.state_vars}
        for method in methods:
            for param in method.params:
                if param.name in names:
                    raise MclSemanticError(
                        f"{contract.name}.{method.name}: parameter "
                        f"{param.name!r} shadows a state variable", method.pos)
            _MethodChecker(unit, contract, method).check_body(method.body)
