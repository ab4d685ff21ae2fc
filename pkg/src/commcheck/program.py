"""SPMD program model: a small imperative language with explicit buffers.

One program text runs on every rank. Communication statements name a
declared buffer; collective loops and choices are written as explicit
blocks (`collloop`, `collchoice`) because their decisions are taken by
all ranks together, while `rankif` branches on rank-locally computable
guards. The identifiers `me` and `np` are predefined (own rank and
ensemble size) and cannot be redeclared.

Structural rules enforced at parse time: exactly one `init`, preceding
all communication; exactly one `finalize`, the last statement; both only
at top level; `param` declarations first; no duplicate names.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .exprs import Expr, Pos, Pred
from .lexer import ParseError
from .parser import BaseParser
from .terms import DataKind, ReduceOp

RESERVED_NAMES = frozenset({"me", "np"})

_STMT_KEYWORDS = frozenset(
    {
        "param",
        "buffer",
        "let",
        "init",
        "commsize",
        "commrank",
        "compute",
        "finalize",
        "send",
        "recv",
        "scatter",
        "gather",
        "bcast",
        "allreduce",
        "collloop",
        "collchoice",
        "rankif",
        "else",
        "int",
        "float",
    }
)

_BUFFER_KINDS = {"int": DataKind.INT, "float": DataKind.FLOAT}
_OP_NAMES = {"MAX": ReduceOp.MAX, "MIN": ReduceOp.MIN, "SUM": ReduceOp.SUM}


# ---------------------------------------------------------------------------
# statements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Init:
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class CommSize:
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class CommRank:
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Compute:
    """Local computation; irrelevant to communication checking."""

    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Finalize:
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Let:
    name: str
    value: Expr
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class BufferDecl:
    name: str
    elem: DataKind
    capacity: Expr
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SendStmt:
    peer: Expr
    buf: str
    length: Expr
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class RecvStmt:
    peer: Expr
    buf: str
    length: Expr
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ScatterStmt:
    root: Expr
    buf: str
    length: Expr
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class GatherStmt:
    root: Expr
    buf: str
    length: Expr
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class BcastStmt:
    root: Expr
    buf: str
    length: Expr
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class AllreduceStmt:
    buf: str
    length: Expr
    op: ReduceOp
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class CollLoop:
    body: tuple[Stmt, ...]
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class CollChoice:
    then_body: tuple[Stmt, ...]
    else_body: tuple[Stmt, ...]
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class RankIf:
    """Rank-local branch; the guard must evaluate concretely per rank."""

    guard: Pred
    then_body: tuple[Stmt, ...]
    else_body: tuple[Stmt, ...]
    pos: Pos | None = field(default=None, compare=False, repr=False)


Stmt = Union[
    Init,
    CommSize,
    CommRank,
    Compute,
    Finalize,
    Let,
    BufferDecl,
    SendStmt,
    RecvStmt,
    ScatterStmt,
    GatherStmt,
    BcastStmt,
    AllreduceStmt,
    CollLoop,
    CollChoice,
    RankIf,
]


@dataclass(frozen=True)
class Program:
    params: tuple[str, ...]
    body: tuple[Stmt, ...]

    @property
    def buffers(self) -> tuple[BufferDecl, ...]:
        found: list[BufferDecl] = []

        def scan(stmts):
            for s in stmts:
                match s:
                    case BufferDecl():
                        found.append(s)
                    case CollLoop(body):
                        scan(body)
                    case CollChoice(tb, fb) | RankIf(_, tb, fb):
                        scan(tb)
                        scan(fb)

        scan(self.body)
        return tuple(found)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


class _ProgramParser(BaseParser):
    expr_keywords = _STMT_KEYWORDS

    def program(self) -> Program:
        params: list[str] = []
        body: list[Stmt] = []
        while self.at_ident("param"):
            pos = self.bump().pos
            name = self._decl_name()
            if name in params:
                raise ParseError(pos, f"duplicate parameter '{name}'")
            params.append(name)
        while self.peek().kind != "eof":
            body.append(self.statement(top=True))
        prog = Program(tuple(params), tuple(body))
        self._validate(prog)
        return prog

    def _decl_name(self) -> str:
        tok = self.expect_ident()
        if tok.text in RESERVED_NAMES:
            raise ParseError(tok.pos, f"'{tok.text}' is predefined and cannot be declared")
        if tok.text in _STMT_KEYWORDS:
            raise ParseError(tok.pos, f"'{tok.text}' is reserved")
        return tok.text

    def statement(self, top: bool) -> Stmt:
        tok = self.peek()
        if tok.kind != "ident":
            self.fail("a statement")
        word = tok.text
        if word in ("param", "init", "finalize") and not top:
            raise ParseError(tok.pos, f"'{word}' is only allowed at top level")
        if word == "param":
            raise ParseError(tok.pos, "'param' declarations must precede all statements")
        self.bump()
        if word == "init":
            return Init(pos=tok.pos)
        if word == "commsize":
            return CommSize(pos=tok.pos)
        if word == "commrank":
            return CommRank(pos=tok.pos)
        if word == "compute":
            return Compute(pos=tok.pos)
        if word == "finalize":
            return Finalize(pos=tok.pos)
        if word == "let":
            name = self._decl_name()
            self.expect_punct("=")
            return Let(name, self.parse_expr(), pos=tok.pos)
        if word == "buffer":
            name = self._decl_name()
            kind_tok = self.expect_ident()
            if kind_tok.text not in _BUFFER_KINDS:
                raise ParseError(kind_tok.pos, "buffer kind must be 'int' or 'float'")
            self.expect_punct("[")
            capacity = self.parse_expr()
            self.expect_punct("]")
            return BufferDecl(name, _BUFFER_KINDS[kind_tok.text], capacity, pos=tok.pos)
        if word in ("send", "recv"):
            peer = self._kv_expr("peer")
            buf = self._kv_name("buf")
            length = self._kv_expr("len")
            cls = SendStmt if word == "send" else RecvStmt
            return cls(peer, buf, length, pos=tok.pos)
        if word in ("scatter", "gather", "bcast"):
            root = self._kv_expr("root")
            buf = self._kv_name("buf")
            length = self._kv_expr("len")
            cls = {"scatter": ScatterStmt, "gather": GatherStmt, "bcast": BcastStmt}[word]
            return cls(root, buf, length, pos=tok.pos)
        if word == "allreduce":
            buf = self._kv_name("buf")
            length = self._kv_expr("len")
            op = self._kv_op()
            return AllreduceStmt(buf, length, op, pos=tok.pos)
        if word == "collloop":
            return CollLoop(self.block(), pos=tok.pos)
        if word == "collchoice":
            then_body = self.block()
            self.expect_keyword("else")
            return CollChoice(then_body, self.block(), pos=tok.pos)
        if word == "rankif":
            self.expect_punct("(")
            guard = self.parse_pred()
            self.expect_punct(")")
            then_body = self.block()
            else_body: tuple[Stmt, ...] = ()
            if self.at_ident("else"):
                self.bump()
                else_body = self.block()
            return RankIf(guard, then_body, else_body, pos=tok.pos)
        raise ParseError(tok.pos, f"unknown statement '{word}'")

    def block(self) -> tuple[Stmt, ...]:
        self._enter()
        try:
            self.expect_punct("{")
            stmts: list[Stmt] = []
            while not self.at_punct("}"):
                if self.peek().kind == "eof":
                    self.fail("'}'")
                stmts.append(self.statement(top=False))
            self.bump()
            return tuple(stmts)
        finally:
            self._exit()

    def _kv_expr(self, key: str) -> Expr:
        self.expect_keyword(key)
        self.expect_punct("=")
        return self.parse_expr()

    def _kv_name(self, key: str) -> str:
        self.expect_keyword(key)
        self.expect_punct("=")
        return self.expect_ident().text

    def _kv_op(self) -> ReduceOp:
        self.expect_keyword("op")
        self.expect_punct("=")
        tok = self.expect_ident()
        if tok.text not in _OP_NAMES:
            raise ParseError(tok.pos, "reduce op must be MAX, MIN, or SUM")
        return _OP_NAMES[tok.text]

    # -- structural rules --

    def _validate(self, prog: Program) -> None:
        inits = [s for s in prog.body if isinstance(s, Init)]
        finals = [s for s in prog.body if isinstance(s, Finalize)]
        if not inits:
            raise ParseError(Pos(1, 1), "program must contain 'init'")
        if len(inits) > 1:
            raise ParseError(inits[1].pos or Pos(1, 1), "duplicate 'init'")
        if not finals:
            raise ParseError(Pos(1, 1), "program must contain 'finalize'")
        if len(finals) > 1:
            raise ParseError(finals[1].pos or Pos(1, 1), "duplicate 'finalize'")
        if not isinstance(prog.body[-1], Finalize):
            raise ParseError(
                finals[0].pos or Pos(1, 1), "'finalize' must be the last statement"
            )
        init_at = prog.body.index(inits[0])
        for s in prog.body[:init_at]:
            if not isinstance(s, (Let, BufferDecl, Compute)):
                raise ParseError(
                    s.pos or Pos(1, 1), "communication before 'init'"
                )
        seen: set[str] = set(prog.params)
        for decl in prog.buffers:
            if decl.name in seen:
                raise ParseError(
                    decl.pos or Pos(1, 1), f"duplicate declaration of '{decl.name}'"
                )
            seen.add(decl.name)


def parse_program(text: str) -> Program:
    """Parse and structurally validate a program text."""
    parser = _ProgramParser(text)
    return parser.program()
