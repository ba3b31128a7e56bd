"""Canonical pretty-printer for MCL ASTs.

Printing a unit and re-parsing the result yields a structurally equal
tree (positions excluded from equality). Parenthesization is explicit,
so no precedence knowledge is required to read the output back.
"""

from __future__ import annotations

from .ast import (
    AddressLit, AssertStmt, AssignStmt, BalanceExpr, BinOp, BlockhashExpr,
    BoolLit, CallExpr, CastAddress, CastUint, ContractDef, EmitStmt, EnvExpr,
    EventDef, Expr, ExprStmt, ForStmt, IfStmt, IndexExpr, IntLit, LengthExpr,
    MethodDef, Name, NewExpr, NotExpr, PushStmt, RequireStmt, ReturnStmt,
    SourceUnit, Stmt, TransferStmt,
)

_ENV_TEXT = {
    "now": "now",
    "block_number": "block.number",
    "msg_sender": "msg.sender",
    "msg_value": "msg.value",
    "self": "this",
}


def print_expr(expr: Expr) -> str:
    if isinstance(expr, IntLit):
        return str(expr.value)
    if isinstance(expr, BoolLit):
        return "true" if expr.value else "false"
    if isinstance(expr, AddressLit):
        return expr.value.hex()
    if isinstance(expr, Name):
        return expr.name
    if isinstance(expr, IndexExpr):
        return f"{print_expr(expr.base)}[{print_expr(expr.index)}]"
    if isinstance(expr, LengthExpr):
        return f"{print_expr(expr.base)}.length"
    if isinstance(expr, BinOp):
        return f"({print_expr(expr.left)} {expr.op} {print_expr(expr.right)})"
    if isinstance(expr, NotExpr):
        return f"!({print_expr(expr.operand)})"
    if isinstance(expr, CastAddress):
        return f"address({print_expr(expr.operand)})"
    if isinstance(expr, CastUint):
        return f"uint({print_expr(expr.operand)})"
    if isinstance(expr, EnvExpr):
        return _ENV_TEXT[expr.kind]
    if isinstance(expr, BlockhashExpr):
        return f"blockhash({print_expr(expr.number)})"
    if isinstance(expr, BalanceExpr):
        return f"balance({print_expr(expr.account)})"
    if isinstance(expr, CallExpr):
        args = ", ".join(print_expr(a) for a in expr.args)
        return f"call {expr.iface}({print_expr(expr.target)}).{expr.method}({args})"
    if isinstance(expr, NewExpr):
        args = ", ".join(print_expr(a) for a in expr.args)
        return f"new {expr.contract}({args})"
    raise TypeError(f"unknown expression node {expr!r}")


def _print_stmt(stmt: Stmt, indent: str, out: list[str]) -> None:
    if isinstance(stmt, AssignStmt):
        target = stmt.target
        if stmt.index is not None:
            target += f"[{print_expr(stmt.index)}]"
        out.append(f"{indent}{target} = {print_expr(stmt.value)};")
    elif isinstance(stmt, PushStmt):
        out.append(f"{indent}{stmt.target}.push({print_expr(stmt.value)});")
    elif isinstance(stmt, RequireStmt):
        if stmt.message is None:
            out.append(f"{indent}require({print_expr(stmt.cond)});")
        else:
            out.append(f'{indent}require({print_expr(stmt.cond)}, "{stmt.message}");')
    elif isinstance(stmt, AssertStmt):
        out.append(f"{indent}assert({print_expr(stmt.cond)});")
    elif isinstance(stmt, EmitStmt):
        args = ", ".join(print_expr(a) for a in stmt.args)
        out.append(f"{indent}emit {stmt.event}({args});")
    elif isinstance(stmt, TransferStmt):
        out.append(f"{indent}transfer({print_expr(stmt.to)}, "
                   f"{print_expr(stmt.amount)});")
    elif isinstance(stmt, IfStmt):
        out.append(f"{indent}if ({print_expr(stmt.cond)}) {{")
        for s in stmt.then_body:
            _print_stmt(s, indent + "    ", out)
        if stmt.else_body:
            out.append(f"{indent}}} else {{")
            for s in stmt.else_body:
                _print_stmt(s, indent + "    ", out)
        out.append(f"{indent}}}")
    elif isinstance(stmt, ForStmt):
        out.append(f"{indent}for {stmt.var} in {print_expr(stmt.lo)} .. "
                   f"{print_expr(stmt.hi)} bound {stmt.bound} {{")
        for s in stmt.body:
            _print_stmt(s, indent + "    ", out)
        out.append(f"{indent}}}")
    elif isinstance(stmt, ReturnStmt):
        if stmt.values:
            out.append(f"{indent}return "
                       f"{', '.join(print_expr(v) for v in stmt.values)};")
        else:
            out.append(f"{indent}return;")
    elif isinstance(stmt, ExprStmt):
        out.append(f"{indent}{print_expr(stmt.expr)};")
    else:
        raise TypeError(f"unknown statement node {stmt!r}")


def _print_method(method: MethodDef, out: list[str]) -> None:
    qualifiers = ""
    if method.pure:
        qualifiers += "pure "
    if method.payable:
        qualifiers += "payable "
    params = ", ".join(f"{p.type} {p.name}" for p in method.params)
    out.append(f"    {qualifiers}fn {method.name}({params}) {{")
    for stmt in method.body:
        _print_stmt(stmt, "        ", out)
    out.append("    }")


def _print_contract(contract: ContractDef, out: list[str]) -> None:
    out.append(f"contract {contract.name} {{")
    for var in contract.state_vars:
        out.append(f"    {var.type} {var.name};")
    for event in contract.events:
        params = ", ".join(f"{p.type} {p.name}" for p in event.params)
        out.append(f"    event {event.name}({params});")
    if contract.constructor is not None:
        _print_method(contract.constructor, out)
    for method in contract.methods:
        _print_method(method, out)
    out.append("}")


def to_source(unit: SourceUnit) -> str:
    out: list[str] = []
    for contract in unit.contracts:
        _print_contract(contract, out)
        out.append("")
    return "\n".join(out)
