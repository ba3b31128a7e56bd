"""Tokenizer for MCL source text."""

from __future__ import annotations

from dataclasses import dataclass

from .ast import MclSyntaxError, Pos

KEYWORDS = {
    "contract", "event", "fn", "pure", "payable",
    "require", "assert", "emit", "transfer", "if", "else", "for", "in",
    "bound", "return", "true", "false",
    "now", "block", "msg", "this", "balance", "blockhash", "call", "new",
    "uint", "bool", "address", "hash", "map",
}

# Longest first so that e.g. "<<" wins over "<".
PUNCT = [
    "=>", "==", "!=", "<=", ">=", "<<", ">>", "&&", "||", "..",
    "{", "}", "(", ")", "[", "]", ",", ";", ".",
    "=", "<", ">", "+", "-", "*", "/", "%", "&", "|", "!",
]

HEX_DIGITS = set("0123456789abcdefABCDEF")


@dataclass(frozen=True)
class Token:
    kind: str  # ident | keyword | int | hexint | string | punct | eof
    text: str
    value: object
    pos: Pos


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(text)

    def pos() -> Pos:
        return Pos(line, col)

    def advance(k: int) -> None:
        nonlocal i, line, col
        for _ in range(k):
            if text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            advance(1)
            continue
        if text.startswith("//", i):
            j = text.find("\n", i)
            advance((j if j != -1 else n) - i)
            continue
        start = pos()
        if ch == '"':
            j = i + 1
            while j < n and text[j] != '"':
                if text[j] == "\n":
                    raise MclSyntaxError("unterminated string", start)
                j += 1
            if j >= n:
                raise MclSyntaxError("unterminated string", start)
            raw = text[i + 1:j]
            tokens.append(Token("string", text[i:j + 1], raw, start))
            advance(j + 1 - i)
            continue
        if text.startswith("0x", i) or text.startswith("0X", i):
            j = i + 2
            while j < n and text[j] in HEX_DIGITS:
                j += 1
            digits = text[i + 2:j]
            if not digits:
                raise MclSyntaxError("hex literal needs at least one digit", start)
            tokens.append(Token("hexint", text[i:j], int(digits, 16), start))
            advance(j - i)
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token("int", text[i:j], int(text[i:j]), start))
            advance(j - i)
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "keyword" if word in KEYWORDS else "ident"
            tokens.append(Token(kind, word, word, start))
            advance(j - i)
            continue
        for p in PUNCT:
            if text.startswith(p, i):
                tokens.append(Token("punct", p, p, start))
                advance(len(p))
                break
        else:
            raise MclSyntaxError(f"unexpected character {ch!r}", start)
    tokens.append(Token("eof", "", None, pos()))
    return tokens


def hex_digit_count(token: Token) -> int:
    """Number of hex digits as written in the source (0x excluded)."""
    if token.kind != "hexint":
        raise ValueError("not a hex literal")
    return len(token.text) - 2
