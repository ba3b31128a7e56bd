"""Recursive-descent parser for MCL.

Grammar sketch:

    unit      := contract+
    contract  := "contract" IDENT "{" decl* "}"
    decl      := statevar | event | method
    statevar  := type IDENT ";"
    event     := "event" IDENT "(" [type IDENT ("," type IDENT)*] ")" ";"
    method    := ["pure"] ["payable"] "fn" IDENT "(" params ")" block
    stmt      := assign | push | require | assert | emit | transfer
               | if | for | return | call/new expression statement
    for       := "for" IDENT "in" expr ".." expr "bound" INT block

A hex literal written with exactly 40 digits is an address literal;
any other numeric literal is a uint.
"""

from __future__ import annotations

from ..addresses import Address
from .ast import (
    ALL_TYPES, AddressLit, AssertStmt, AssignStmt, BalanceExpr, BinOp,
    BlockhashExpr, BoolLit, CallExpr, CastAddress, CastUint, ContractDef,
    EmitStmt, EnvExpr, EventDef, Expr, ExprStmt, ForStmt, IfStmt, IndexExpr,
    IntLit, LengthExpr, MclSemanticError, MclSyntaxError, MethodDef, Name,
    NewExpr, NotExpr, Param, PushStmt, RequireStmt, ReturnStmt, SourceUnit,
    StateVar, Stmt, TransferStmt, T_BOOL, T_ADDRESS, T_HASH, T_MAP,
    T_UINT, T_UINT_ARRAY,
)
from .lexer import Token, hex_digit_count, tokenize

CONSTRUCTOR_NAME = "constructor"

_BINARY_LEVELS = [
    ["||"],
    ["&&"],
    ["==", "!=", "<", "<=", ">", ">="],
    ["|"],
    ["&"],
    ["<<", ">>"],
    ["+", "-"],
    ["*", "/", "%"],
]


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    # ── token helpers ────────────────────────────────────────────────

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.i + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def at(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind in ("punct", "keyword")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if not self.at(text):
            raise MclSyntaxError(f"expected {text!r}, found {tok.text!r}", tok.pos)
        return self.next()

    def expect_ident(self) -> Token:
        tok = self.peek()
        if tok.kind != "ident":
            raise MclSyntaxError(f"expected identifier, found {tok.text!r}", tok.pos)
        return self.next()

    # ── unit / declarations ──────────────────────────────────────────

    def parse_unit(self) -> SourceUnit:
        contracts: list[ContractDef] = []
        while not self.peek().kind == "eof":
            contracts.append(self.parse_contract())
        if not contracts:
            raise MclSyntaxError("a unit must declare at least one contract",
                                 self.peek().pos)
        seen: set[str] = set()
        for c in contracts:
            if c.name in seen:
                raise MclSemanticError(f"duplicate contract {c.name!r}", c.pos)
            seen.add(c.name)
        return SourceUnit(contracts, raw_text=self.text)

    def parse_contract(self) -> ContractDef:
        pos = self.expect("contract").pos
        name = self.expect_ident().text
        self.expect("{")
        state_vars: list[StateVar] = []
        events: list[EventDef] = []
        constructor: MethodDef | None = None
        methods: list[MethodDef] = []
        while not self.accept("}"):
            tok = self.peek()
            if tok.text == "event":
                events.append(self.parse_event())
            elif tok.text in ("fn", "pure", "payable"):
                method = self.parse_method()
                if method.name == CONSTRUCTOR_NAME:
                    if constructor is not None:
                        raise MclSemanticError("duplicate constructor", method.pos)
                    constructor = method
                else:
                    methods.append(method)
            else:
                state_vars.append(self.parse_state_var())
        for coll, what in ((state_vars, "state variable"), (events, "event"),
                           (methods, "method")):
            seen = set()
            for item in coll:
                if item.name in seen:
                    raise MclSemanticError(
                        f"duplicate {what} {item.name!r} in contract {name}", item.pos)
                seen.add(item.name)
        return ContractDef(name, state_vars, events, constructor, methods, pos)

    def parse_type(self) -> str:
        tok = self.peek()
        if tok.text == "map":
            self.next()
            self.expect("(")
            self.expect("address")
            self.expect("=>")
            self.expect("uint")
            self.expect(")")
            return T_MAP
        if tok.text == "uint":
            self.next()
            if self.accept("["):
                self.expect("]")
                return T_UINT_ARRAY
            return T_UINT
        if tok.text in ("bool", "address", "hash"):
            self.next()
            return {"bool": T_BOOL, "address": T_ADDRESS, "hash": T_HASH}[tok.text]
        raise MclSyntaxError(f"expected a type, found {tok.text!r}", tok.pos)

    def parse_state_var(self) -> StateVar:
        pos = self.peek().pos
        typ = self.parse_type()
        name = self.expect_ident().text
        self.expect(";")
        return StateVar(name, typ, pos)

    def parse_event(self) -> EventDef:
        pos = self.expect("event").pos
        name = self.expect_ident().text
        self.expect("(")
        params = self.parse_params()
        self.expect(")")
        self.expect(";")
        return EventDef(name, params, pos)

    def parse_params(self) -> list[Param]:
        params: list[Param] = []
        if self.at(")"):
            return params
        while True:
            typ = self.parse_type()
            name = self.expect_ident().text
            params.append(Param(name, typ))
            if not self.accept(","):
                return params

    def parse_method(self) -> MethodDef:
        pos = self.peek().pos
        pure = self.accept("pure")
        payable = self.accept("payable")
        self.expect("fn")
        name = self.expect_ident().text
        self.expect("(")
        params = self.parse_params()
        self.expect(")")
        body = self.parse_block()
        return MethodDef(name, params, pure, payable, body, pos)

    # ── statements ───────────────────────────────────────────────────

    def parse_block(self) -> list[Stmt]:
        self.expect("{")
        body: list[Stmt] = []
        while not self.accept("}"):
            body.append(self.parse_stmt())
        return body

    def parse_stmt(self) -> Stmt:
        tok = self.peek()
        if tok.text == "require":
            self.next()
            self.expect("(")
            cond = self.parse_expr()
            message = None
            if self.accept(","):
                msg_tok = self.peek()
                if msg_tok.kind != "string":
                    raise MclSyntaxError("require message must be a string literal",
                                         msg_tok.pos)
                message = self.next().value
            self.expect(")")
            self.expect(";")
            return RequireStmt(cond, message, tok.pos)
        if tok.text == "assert":
            self.next()
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            self.expect(";")
            return AssertStmt(cond, tok.pos)
        if tok.text == "emit":
            self.next()
            name = self.expect_ident().text
            self.expect("(")
            args = self.parse_args()
            self.expect(")")
            self.expect(";")
            return EmitStmt(name, args, tok.pos)
        if tok.text == "transfer":
            self.next()
            self.expect("(")
            to = self.parse_expr()
            self.expect(",")
            amount = self.parse_expr()
            self.expect(")")
            self.expect(";")
            return TransferStmt(to, amount, tok.pos)
        if tok.text == "if":
            self.next()
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            then_body = self.parse_block()
            else_body: list[Stmt] = []
            if self.accept("else"):
                else_body = self.parse_block()
            return IfStmt(cond, then_body, else_body, tok.pos)
        if tok.text == "for":
            self.next()
            var = self.expect_ident().text
            self.expect("in")
            lo = self.parse_expr()
            self.expect("..")
            hi = self.parse_expr()
            self.expect("bound")
            bound_tok = self.peek()
            if bound_tok.kind not in ("int", "hexint"):
                raise MclSyntaxError("loop bound must be an integer literal",
                                     bound_tok.pos)
            self.next()
            if bound_tok.value <= 0:
                raise MclSemanticError("loop bound must be positive", bound_tok.pos)
            body = self.parse_block()
            return ForStmt(var, lo, hi, bound_tok.value, body, tok.pos)
        if tok.text == "return":
            self.next()
            values: list[Expr] = []
            if not self.at(";"):
                values.append(self.parse_expr())
                while self.accept(","):
                    values.append(self.parse_expr())
            self.expect(";")
            return ReturnStmt(values, tok.pos)
        if tok.text in ("call", "new"):
            expr = self.parse_expr()
            self.expect(";")
            return ExprStmt(expr, tok.pos)
        if tok.kind == "ident":
            name = self.next().text
            if self.accept("."):
                method = self.expect_ident()
                if method.text != "push":
                    raise MclSyntaxError(
                        f"only .push(...) is allowed as a statement, found "
                        f".{method.text}", method.pos)
                self.expect("(")
                value = self.parse_expr()
                self.expect(")")
                self.expect(";")
                return PushStmt(name, value, tok.pos)
            index = None
            if self.accept("["):
                index = self.parse_expr()
                self.expect("]")
            self.expect("=")
            value = self.parse_expr()
            self.expect(";")
            return AssignStmt(name, index, value, tok.pos)
        raise MclSyntaxError(f"unexpected token {tok.text!r} in statement", tok.pos)

    # ── expressions ──────────────────────────────────────────────────

    def parse_args(self) -> list[Expr]:
        args: list[Expr] = []
        if self.at(")"):
            return args
        while True:
            args.append(self.parse_expr())
            if not self.accept(","):
                return args

    def parse_expr(self) -> Expr:
        return self.parse_binary(0)

    def parse_binary(self, level: int) -> Expr:
        if level >= len(_BINARY_LEVELS):
            return self.parse_unary()
        ops = _BINARY_LEVELS[level]
        left = self.parse_binary(level + 1)
        while self.peek().kind == "punct" and self.peek().text in ops:
            tok = self.next()
            right = self.parse_binary(level + 1)
            left = BinOp(tok.text, left, right, tok.pos)
        return left

    def parse_unary(self) -> Expr:
        tok = self.peek()
        if tok.text == "!" and tok.kind == "punct":
            self.next()
            return NotExpr(self.parse_unary(), tok.pos)
        return self.parse_postfix()

    def parse_postfix(self) -> Expr:
        expr = self.parse_primary()
        while True:
            if self.at("["):
                pos = self.next().pos
                index = self.parse_expr()
                self.expect("]")
                expr = IndexExpr(expr, index, pos)
            elif self.peek().text == "." and self.peek(1).text == "length":
                pos = self.next().pos
                self.next()
                expr = LengthExpr(expr, pos)
            else:
                return expr

    def parse_primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.next()
            return IntLit(tok.value, tok.pos)
        if tok.kind == "hexint":
            self.next()
            if hex_digit_count(tok) == 40:
                return AddressLit(Address.from_int(tok.value), tok.pos)
            return IntLit(tok.value, tok.pos)
        if tok.text == "true":
            self.next()
            return BoolLit(True, tok.pos)
        if tok.text == "false":
            self.next()
            return BoolLit(False, tok.pos)
        if tok.text == "now":
            self.next()
            return EnvExpr("now", tok.pos)
        if tok.text == "this":
            self.next()
            return EnvExpr("self", tok.pos)
        if tok.text == "block":
            self.next()
            self.expect(".")
            member = self.expect_ident()
            if member.text != "number":
                raise MclSyntaxError("only block.number is supported", member.pos)
            return EnvExpr("block_number", tok.pos)
        if tok.text == "msg":
            self.next()
            self.expect(".")
            member = self.expect_ident()
            if member.text not in ("sender", "value"):
                raise MclSyntaxError("only msg.sender / msg.value are supported",
                                     member.pos)
            return EnvExpr("msg_" + member.text, tok.pos)
        if tok.text == "blockhash":
            self.next()
            self.expect("(")
            number = self.parse_expr()
            self.expect(")")
            return BlockhashExpr(number, tok.pos)
        if tok.text == "balance":
            self.next()
            self.expect("(")
            account = self.parse_expr()
            self.expect(")")
            return BalanceExpr(account, tok.pos)
        if tok.text == "address":
            self.next()
            self.expect("(")
            operand = self.parse_expr()
            self.expect(")")
            return CastAddress(operand, tok.pos)
        if tok.text == "uint":
            self.next()
            self.expect("(")
            operand = self.parse_expr()
            self.expect(")")
            return CastUint(operand, tok.pos)
        if tok.text == "call":
            self.next()
            iface = self.expect_ident().text
            self.expect("(")
            target = self.parse_expr()
            self.expect(")")
            self.expect(".")
            method = self.expect_ident().text
            self.expect("(")
            args = self.parse_args()
            self.expect(")")
            return CallExpr(iface, target, method, args, tok.pos)
        if tok.text == "new":
            self.next()
            contract = self.expect_ident().text
            self.expect("(")
            args = self.parse_args()
            self.expect(")")
            return NewExpr(contract, args, tok.pos)
        if tok.kind == "ident":
            self.next()
            return Name(tok.text, tok.pos)
        if self.accept("("):
            expr = self.parse_expr()
            self.expect(")")
            return expr
        raise MclSyntaxError(f"unexpected token {tok.text!r} in expression", tok.pos)


def parse(text: str) -> SourceUnit:
    """Parse MCL source text into a SourceUnit, retaining positions."""
    return _Parser(text).parse_unit()
