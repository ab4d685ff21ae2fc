"""Typestate over local types: head accessors and the stepping relation.

A rank's verification state is the residue of its local type. Each
communication action a program performs must match the head prefix of
the residue exactly; the residue then advances to the continuation.
Loop and choice nodes are collective boundaries: an ordinary action
arriving there is a structure error, distinct from a mismatched head.
Every error carries a stable machine-readable `code` naming the class
of defect, with the offending field first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .exprs import ExprError, eval_expr
from .terms import (
    Allreduce,
    Bcast,
    Choice,
    DataKind,
    End,
    Gather,
    LocalAtom,
    LocalType,
    Loop,
    Prefix,
    Receive,
    ReduceOp,
    Scatter,
    Send,
)
from .printer import format_atom


# ---------------------------------------------------------------------------
# actions: what a program step actually does, all fields concrete
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SendAction:
    peer: int
    dtype: DataKind
    count: int


@dataclass(frozen=True)
class ReceiveAction:
    peer: int
    dtype: DataKind
    count: int


@dataclass(frozen=True)
class ScatterAction:
    root: int
    dtype: DataKind
    count: int


@dataclass(frozen=True)
class GatherAction:
    root: int
    dtype: DataKind
    count: int


@dataclass(frozen=True)
class BcastAction:
    root: int
    dtype: DataKind
    count: int


@dataclass(frozen=True)
class AllreduceAction:
    dtype: DataKind
    count: int
    op: ReduceOp


@dataclass(frozen=True)
class FinalizeAction:
    pass


Action = Union[
    SendAction,
    ReceiveAction,
    ScatterAction,
    GatherAction,
    BcastAction,
    AllreduceAction,
    FinalizeAction,
]


@dataclass(frozen=True)
class BufferFacts:
    """What the checker knows about the buffer an action reads or writes."""

    elem: DataKind
    capacity: int


def describe_action(a: Action) -> str:
    match a:
        case SendAction(peer, dtype, count):
            return f"send({peer},{dtype.value},{count})"
        case ReceiveAction(peer, dtype, count):
            return f"receive({peer},{dtype.value},{count})"
        case ScatterAction(root, dtype, count):
            return f"scatter({root},{dtype.value},{count})"
        case GatherAction(root, dtype, count):
            return f"gather({root},{dtype.value},{count})"
        case BcastAction(root, dtype, count):
            return f"bcast({root},{dtype.value},{count})"
        case AllreduceAction(dtype, count, op):
            return f"allreduce({dtype.value},{count},{op.value})"
        case FinalizeAction():
            return "finalize"
    raise TypeError(f"not an action: {a!r}")


def describe_node(t: LocalType) -> str:
    match t:
        case End():
            return "end"
        case Loop():
            return "a collective loop"
        case Choice():
            return "a collective choice"
        case Prefix(atom, _):
            return format_atom(atom)
    raise TypeError(f"not a type term: {t!r}")


# ---------------------------------------------------------------------------
# errors
# ---------------------------------------------------------------------------


class StepError(Exception):
    """Base class; `code` names the defect class for diagnostics."""

    code = "step-error"


class NotAPrefix(StepError):
    code = "not-a-prefix"

    def __init__(self, expected: str, found: str):
        super().__init__(f"expected {expected}, but the local type is {found}")
        self.expected = expected
        self.found = found


class HeadMismatch(StepError):
    """Action and head prefix disagree; `fields` lists what differs."""

    def __init__(self, atom: LocalAtom, action: Action, fields: tuple[str, ...]):
        super().__init__(
            f"action {describe_action(action)} does not match the expected"
            f" {format_atom(atom)} (differs in {', '.join(fields)})"
        )
        self.atom = atom
        self.action = action
        self.fields = fields
        self.code = f"head-mismatch:{fields[0]}"


class AtCollectiveBoundary(StepError):
    """An ordinary action arrived where the type demands a collective
    loop or choice construct."""

    def __init__(self, kind: str, action: Action):
        super().__init__(
            f"the local type is at a collective {kind}, but the program"
            f" performs {describe_action(action)} without entering one"
        )
        self.kind = kind
        self.code = f"at-collective-boundary:{kind}"


class ResidualNotEnd(StepError):
    code = "residual-not-end"

    def __init__(self, residual: LocalType, where: str = "finalize"):
        super().__init__(
            f"obligations remain at {where}: the residual local type is"
            f" {describe_node(residual)}, not end"
        )
        self.residual = residual


class BufferObligation(StepError):
    code = "buffer-obligation"


# ---------------------------------------------------------------------------
# head accessors
# ---------------------------------------------------------------------------


def first(t: LocalType) -> LocalAtom:
    """Head atom of a prefix; anything else has no first action."""
    match t:
        case Prefix(atom, _):
            return atom
    raise NotAPrefix("a communication prefix", describe_node(t))


def next_type(t: LocalType) -> LocalType:
    """Continuation after the head prefix, loop, or choice."""
    match t:
        case Prefix(_, cont) | Loop(_, cont) | Choice(_, _, cont):
            return cont
    raise NotAPrefix("a prefix, loop, or choice", describe_node(t))


def loop_body(t: LocalType) -> LocalType:
    match t:
        case Loop(body, _):
            return body
    raise NotAPrefix("a collective loop", describe_node(t))


def choice_branches(t: LocalType) -> tuple[LocalType, LocalType]:
    match t:
        case Choice(tb, fb, _):
            return (tb, fb)
    raise NotAPrefix("a collective choice", describe_node(t))


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------


def _value(e) -> int:
    try:
        return eval_expr(e, {})
    except ExprError:
        raise ValueError(
            "local type is not ground; project or ground_term it first"
        ) from None


def _atom_fields(a: LocalAtom):
    # (constructor, peer-or-root, dtype, count, op)
    match a:
        case Send(peer, dtype, length):
            return ("send", _value(peer), dtype, _value(length), None)
        case Receive(peer, dtype, length):
            return ("receive", _value(peer), dtype, _value(length), None)
        case Scatter(root, dtype, length):
            return ("scatter", _value(root), dtype, _value(length), None)
        case Gather(root, dtype, length):
            return ("gather", _value(root), dtype, _value(length), None)
        case Bcast(root, dtype, length):
            return ("bcast", _value(root), dtype, _value(length), None)
        case Allreduce(dtype, length, op):
            return ("allreduce", None, dtype, _value(length), op)
    raise TypeError(f"not a local atom: {a!r}")


def _action_fields(a: Action):
    match a:
        case SendAction(peer, dtype, count):
            return ("send", peer, dtype, count, None)
        case ReceiveAction(peer, dtype, count):
            return ("receive", peer, dtype, count, None)
        case ScatterAction(root, dtype, count):
            return ("scatter", root, dtype, count, None)
        case GatherAction(root, dtype, count):
            return ("gather", root, dtype, count, None)
        case BcastAction(root, dtype, count):
            return ("bcast", root, dtype, count, None)
        case AllreduceAction(dtype, count, op):
            return ("allreduce", None, dtype, count, op)
        case FinalizeAction():
            return ("finalize", None, None, None, None)
    raise TypeError(f"not an action: {a!r}")


def mismatched_fields(atom: LocalAtom, action: Action) -> tuple[str, ...]:
    """Names of the fields where `action` disagrees with `atom`, most
    significant first; empty when they match."""
    ak = _atom_fields(atom)
    bk = _action_fields(action)
    if ak[0] != bk[0]:
        return ("kind",)
    diffs = []
    labels = ("peer" if ak[0] in ("send", "receive") else "root", "dtype", "len", "op")
    for label, x, y in zip(labels, ak[1:], bk[1:]):
        if x != y:
            diffs.append(label)
    return tuple(diffs)


def step(t: LocalType, action: Action, buf: BufferFacts | None = None) -> LocalType:
    """Advance the residue `t` by one communication action.

    The head prefix must match `action` on every field, and when buffer
    facts are supplied the buffer must hold elements of the action's
    data kind and have capacity for the transferred count. Raises
    AtCollectiveBoundary at loop/choice nodes, NotAPrefix at end,
    HeadMismatch or BufferObligation otherwise.
    """
    match t:
        case Loop():
            raise AtCollectiveBoundary("loop", action)
        case Choice():
            raise AtCollectiveBoundary("choice", action)
        case End():
            raise NotAPrefix(
                f"the protocol to continue (program performs {describe_action(action)})",
                "end",
            )
        case Prefix(atom, cont):
            diffs = mismatched_fields(atom, action)
            if diffs:
                raise HeadMismatch(atom, action, diffs)
            if buf is not None:
                kind = _action_fields(action)[2]
                count = _action_fields(action)[3]
                if buf.elem != kind:
                    raise BufferObligation(
                        f"buffer holds {buf.elem.value} elements but the action"
                        f" transfers {kind.value}"
                    )
                if buf.capacity < count:
                    raise BufferObligation(
                        f"buffer capacity {buf.capacity} is smaller than the"
                        f" transferred count {count}"
                    )
            return cont
    raise TypeError(f"not a type term: {t!r}")


def check_finalized(t: LocalType) -> None:
    """The residue must be exactly `end` when a rank finalizes."""
    match t:
        case End():
            return
    raise ResidualNotEnd(t)
