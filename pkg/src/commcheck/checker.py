"""Compliance checking of a program against a protocol, and trace erasure.

Checking walks the program once per rank with `me` bound to that rank,
evaluating every guard and expression concretely, and steps the rank's
projected local type through each communication statement. The walk for
a rank stops at its first defect; defects are reported as positioned
diagnostics, never exceptions. Erasure walks the same way but instead
of checking it records the sequence of communication actions a rank
performs under a given run of collective decisions, whether or not the
program is compliant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .exprs import Env, ExprError, Pos, eval_expr, eval_pred
from .program import (
    AllreduceStmt,
    BcastStmt,
    BufferDecl,
    CollChoice,
    CollLoop,
    CommRank,
    CommSize,
    Compute,
    Finalize,
    GatherStmt,
    Init,
    Let,
    Program,
    RankIf,
    RecvStmt,
    ScatterStmt,
    SendStmt,
    Stmt,
)
from .projection import project
from .sim import DecisionTape
from .terms import Choice, DataKind, End, Loop, Protocol
from .typestate import (
    Action,
    AllreduceAction,
    BcastAction,
    BufferFacts,
    FinalizeAction,
    GatherAction,
    ReceiveAction,
    ResidualNotEnd,
    ScatterAction,
    SendAction,
    StepError,
    check_finalized,
    describe_node,
    step,
)
from .wf import check_wf


@dataclass(frozen=True)
class CheckDiagnostic:
    rank: int
    code: str
    message: str
    pos: Pos | None = None

    def render(self, filename: str = "<program>") -> str:
        loc = f"{filename}:{self.pos}" if self.pos else filename
        return f"{loc}: rank {self.rank}: [{self.code}] {self.message}"


@dataclass
class RankReport:
    rank: int
    diagnostics: list[CheckDiagnostic] = field(default_factory=list)

    @property
    def compliant(self) -> bool:
        return not self.diagnostics


@dataclass
class CheckReport:
    ranks: list[RankReport]

    @property
    def compliant(self) -> bool:
        return all(r.compliant for r in self.ranks)

    def all_diagnostics(self) -> list[CheckDiagnostic]:
        return [d for r in self.ranks for d in r.diagnostics]

    def render_lines(self, filename: str = "<program>") -> list[str]:
        return [d.render(filename) for d in self.all_diagnostics()]


class _RankStop(Exception):
    """Internal: abandon the current rank after its first diagnostic."""


@dataclass
class _RankState:
    rank: int
    env: Env
    buffers: dict[str, BufferFacts]
    diagnostics: list[CheckDiagnostic]
    decisions: list[tuple[str, int]]  # collective construct arrivals, in order

    def fail(self, code: str, message: str, pos: Pos | None) -> None:
        self.diagnostics.append(CheckDiagnostic(self.rank, code, message, pos))
        raise _RankStop


def check_compliance(prog: Program, protocol: Protocol, inst: Env) -> CheckReport:
    """Check `prog` against `protocol` for every rank of the ensemble.

    `inst` supplies values both for the protocol's parameters and for
    the program's `param` names (shared namespace, matched by name).
    The protocol must be well-formed under its slice of `inst`; a
    ValueError signals a violated precondition, not a program defect.
    """
    binder_inst = {b.name: inst[b.name] for b in protocol.params if b.name in inst}
    wf = check_wf(protocol, binder_inst)
    if not wf.ok:
        raise ValueError(
            "protocol is not well-formed under the given instantiation: "
            + "; ".join(wf.render_lines())
        )

    reports: list[RankReport] = []
    traces: list[tuple[tuple[str, int], ...]] = []
    for rank in range(protocol.num_procs):
        state = _RankState(rank, {}, {}, [], [])
        state.env = {"me": rank, "np": protocol.num_procs}
        missing = [name for name in prog.params if name not in inst]
        if missing:
            state.diagnostics.append(
                CheckDiagnostic(
                    rank,
                    "unbound-parameter",
                    "no value given for program parameter(s) " + ", ".join(missing),
                )
            )
        else:
            for name in prog.params:
                state.env[name] = inst[name]
            local = project(protocol, inst, rank)
            try:
                residual = _walk(prog.body, local, state)
                # The walk ends at the finalize statement, which already
                # checked the residual; nothing further to do here.
                del residual
            except _RankStop:
                pass
        reports.append(RankReport(rank, state.diagnostics))
        traces.append(tuple(state.decisions))

    # Ranks must agree on which collective constructs they enter and in
    # which order; projection preserves loop/choice structure at every
    # rank, so disagreement among otherwise-compliant ranks means the
    # program steered ranks into different collective constructs.
    reference: tuple[tuple[str, int], ...] | None = None
    for report, trace in zip(reports, traces):
        if not report.compliant:
            continue
        if reference is None:
            reference = trace
        elif trace != reference:
            report.diagnostics.append(
                CheckDiagnostic(
                    report.rank,
                    "collective-structure-divergence",
                    f"rank {report.rank} enters a different sequence of collective"
                    " constructs than lower ranks",
                )
            )
    return CheckReport(reports)


def _walk(stmts: tuple[Stmt, ...], t, state: _RankState):
    for stmt in stmts:
        t = _walk_stmt(stmt, t, state)
    return t


def _eval(e, state: _RankState, pos: Pos | None) -> int:
    try:
        return eval_expr(e, state.env)
    except ExprError as err:
        state.fail("eval-error", str(err), pos)
        raise AssertionError  # unreachable


def _comm_action(stmt, state: _RankState) -> tuple[Action, BufferFacts]:
    buf = state.buffers.get(stmt.buf)
    if buf is None:
        state.fail("unknown-buffer", f"no buffer named '{stmt.buf}'", stmt.pos)
    count = _eval(stmt.length, state, stmt.pos)
    match stmt:
        case SendStmt(peer, _, _):
            return SendAction(_eval(peer, state, stmt.pos), buf.elem, count), buf
        case RecvStmt(peer, _, _):
            return ReceiveAction(_eval(peer, state, stmt.pos), buf.elem, count), buf
        case ScatterStmt(root, _, _):
            return ScatterAction(_eval(root, state, stmt.pos), buf.elem, count), buf
        case GatherStmt(root, _, _):
            return GatherAction(_eval(root, state, stmt.pos), buf.elem, count), buf
        case BcastStmt(root, _, _):
            return BcastAction(_eval(root, state, stmt.pos), buf.elem, count), buf
        case AllreduceStmt(_, _, op):
            return AllreduceAction(buf.elem, count, op), buf
    raise TypeError(f"not a communication statement: {stmt!r}")


def _walk_stmt(stmt: Stmt, t, state: _RankState):
    match stmt:
        case Init() | CommSize() | CommRank() | Compute():
            return t
        case Let(name, value):
            state.env[name] = _eval(value, state, stmt.pos)
            return t
        case BufferDecl(name, elem, capacity):
            size = _eval(capacity, state, stmt.pos)
            if size < 0:
                state.fail(
                    "negative-capacity", f"buffer '{name}' has capacity {size}", stmt.pos
                )
            state.buffers[name] = BufferFacts(elem, size)
            return t
        case SendStmt() | RecvStmt() | ScatterStmt() | GatherStmt() | BcastStmt() | AllreduceStmt():
            action, buf = _comm_action(stmt, state)
            try:
                return step(t, action, buf)
            except StepError as err:
                state.fail(err.code, str(err), stmt.pos)
        case RankIf(guard, then_body, else_body):
            try:
                taken = eval_pred(guard, state.env)
            except ExprError as err:
                state.fail("eval-error", str(err), stmt.pos)
            return _walk(then_body if taken else else_body, t, state)
        case CollLoop(body):
            state.decisions.append(("loop", id(stmt)))
            if not isinstance(t, Loop):
                state.fail(
                    "expected-loop",
                    f"program enters a collective loop but the protocol is at"
                    f" {describe_node(t)}",
                    stmt.pos,
                )
            residual = _walk(body, t.body, state)
            if not isinstance(residual, End):
                state.fail(
                    "residual-not-end",
                    f"collective loop body leaves the protocol at"
                    f" {describe_node(residual)}, not end",
                    stmt.pos,
                )
            return t.cont
        case CollChoice(then_body, else_body):
            state.decisions.append(("choice", id(stmt)))
            if not isinstance(t, Choice):
                state.fail(
                    "expected-choice",
                    f"program enters a collective choice but the protocol is at"
                    f" {describe_node(t)}",
                    stmt.pos,
                )
            for branch_body, branch_type, name in (
                (then_body, t.true_branch, "true"),
                (else_body, t.false_branch, "false"),
            ):
                residual = _walk(branch_body, branch_type, state)
                if not isinstance(residual, End):
                    state.fail(
                        "residual-not-end",
                        f"collective choice {name} branch leaves the protocol at"
                        f" {describe_node(residual)}, not end",
                        stmt.pos,
                    )
            return t.cont
        case Finalize():
            try:
                check_finalized(t)
            except ResidualNotEnd as err:
                state.fail(err.code, str(err), stmt.pos)
            return t
    raise TypeError(f"not a statement: {stmt!r}")


# ---------------------------------------------------------------------------
# erasure
# ---------------------------------------------------------------------------


def erase_to_trace(prog: Program, rank: int, env: Env, tape: DecisionTape) -> list[Action]:
    """The communication actions `rank` performs, in order.

    `env` must bind the program's parameters and `np`; `me` is bound to
    `rank` here. `tape` supplies one boolean per collective-loop
    arrival (continue or exit) and per collective choice. Erasure does
    not consult any protocol, so it also applies to non-compliant
    programs; expression errors and tape exhaustion raise.
    """
    scope: Env = {**env, "me": rank}
    buffers: dict[str, DataKind] = {}
    out: list[Action] = []
    _erase(prog.body, scope, buffers, tape, out)
    return out


def _erase(stmts, scope: Env, buffers, tape: DecisionTape, out: list[Action]) -> None:
    for stmt in stmts:
        match stmt:
            case Init() | CommSize() | CommRank() | Compute():
                pass
            case Let(name, value):
                scope[name] = eval_expr(value, scope)
            case BufferDecl(name, elem, _):
                buffers[name] = elem
            case SendStmt(peer, buf, length):
                out.append(
                    SendAction(eval_expr(peer, scope), buffers[buf], eval_expr(length, scope))
                )
            case RecvStmt(peer, buf, length):
                out.append(
                    ReceiveAction(eval_expr(peer, scope), buffers[buf], eval_expr(length, scope))
                )
            case ScatterStmt(root, buf, length):
                out.append(
                    ScatterAction(eval_expr(root, scope), buffers[buf], eval_expr(length, scope))
                )
            case GatherStmt(root, buf, length):
                out.append(
                    GatherAction(eval_expr(root, scope), buffers[buf], eval_expr(length, scope))
                )
            case BcastStmt(root, buf, length):
                out.append(
                    BcastAction(eval_expr(root, scope), buffers[buf], eval_expr(length, scope))
                )
            case AllreduceStmt(buf, length, op):
                out.append(AllreduceAction(buffers[buf], eval_expr(length, scope), op))
            case RankIf(guard, then_body, else_body):
                _erase(then_body if eval_pred(guard, scope) else else_body, scope, buffers, tape, out)
            case CollLoop(body):
                while tape.take():
                    _erase(body, scope, buffers, tape, out)
            case CollChoice(then_body, else_body):
                _erase(then_body if tape.take() else else_body, scope, buffers, tape, out)
            case Finalize():
                out.append(FinalizeAction())
            case _:
                raise TypeError(f"not a statement: {stmt!r}")
