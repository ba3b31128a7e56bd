"""Minimal Contract Language: parsing, checking, compilation, analysis."""

from .ast import (
    MclError, MclSemanticError, MclSyntaxError, SourceUnit,
)
from .checker import check
from .compiler import (
    CompiledContract, CompiledUnit, InterfaceDesc, Instr, compile_unit,
)
from .flags import StaticFlags, static_flags
from .parser import parse
from .printer import to_source

__all__ = [
    "CompiledContract", "CompiledUnit", "InterfaceDesc", "Instr",
    "MclError", "MclSemanticError", "MclSyntaxError", "SourceUnit",
    "StaticFlags", "check", "compile_unit", "parse", "static_flags",
    "to_source",
]
