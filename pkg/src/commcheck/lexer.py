"""Tokenizer shared by the protocol and program parsers."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .exprs import Pos


class ParseError(Exception):
    """Positioned syntax error, optionally carrying the expected tokens."""

    def __init__(self, pos: Pos, message: str, expected: tuple[str, ...] = ()):
        detail = message
        if expected:
            detail += " (expected " + " or ".join(expected) + ")"
        super().__init__(f"{pos}: {detail}")
        self.pos = pos
        self.expected = expected
        self.bare_message = message


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "int", "punct", or "eof"
    text: str
    pos: Pos


# Multi-character operators must come before their single-char prefixes.
_TOKEN = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<comment>//[^\n]*)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<int>\d+)"
    r"|(?P<punct>==|!=|<=|>=|&&|\|\||[(){}\[\],.:|<>!=+\-*/%])"
)


def tokenize(text: str) -> list[Token]:
    """Split `text` into tokens, ending with a single eof token.

    Raises ParseError on any character outside the language's alphabet.
    """
    toks: list[Token] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        m = _TOKEN.match(text, i)
        if m is None:
            raise ParseError(Pos(line, col), f"unexpected character {text[i]!r}")
        lexeme = m.group(0)
        group = m.lastgroup
        if group not in ("ws", "comment"):
            kind = "punct" if group == "punct" else group
            toks.append(Token(kind, lexeme, Pos(line, col)))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        i = m.end()
    toks.append(Token("eof", "", Pos(line, col)))
    return toks
