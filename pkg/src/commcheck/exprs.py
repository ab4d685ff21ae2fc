"""Integer expressions, boolean predicates, and parameter kinds.

Arithmetic follows C semantics on signed 64-bit integers: division
truncates toward zero, the remainder takes the sign of the dividend,
and any intermediate value outside the 64-bit range is reported as an
overflow instead of wrapping. Evaluation is always concrete: every
variable must be bound in the environment, and looking up an unbound
name is an error, never a default.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

# Evaluation environment: parameter name -> concrete integer value.
Env = dict[str, int]


@dataclass(frozen=True)
class Pos:
    """1-based line/column source position."""

    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


class ExprError(Exception):
    """Base class for evaluation failures."""


class UnboundVariable(ExprError):
    def __init__(self, name: str):
        super().__init__(f"unbound variable '{name}'")
        self.name = name


class DivisionByZero(ExprError):
    def __init__(self, detail: str):
        super().__init__(f"division by zero in {detail}")


class IntegerOverflow(ExprError):
    def __init__(self, value: int):
        super().__init__(f"value {value} exceeds the signed 64-bit range")
        self.value = value


class KindMismatch(ExprError):
    """A value was checked against a kind that cannot classify it."""


# ---------------------------------------------------------------------------
# expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Lit:
    value: int
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / %
    lhs: Expr
    rhs: Expr
    pos: Pos | None = field(default=None, compare=False, repr=False)


Expr = Union[Lit, Var, BinOp]


def _ranged(v: int) -> int:
    if v < INT64_MIN or v > INT64_MAX:
        raise IntegerOverflow(v)
    return v


def _c_quotient(a: int, b: int) -> int:
    # Python's // floors; C truncates toward zero.
    q = abs(a) // abs(b)
    return -q if (a < 0) != (b < 0) else q


def eval_expr(e: Expr, env: Env) -> int:
    """Evaluate `e` under `env` to a signed 64-bit integer.

    Raises UnboundVariable, DivisionByZero, or IntegerOverflow.
    """
    match e:
        case Lit(value):
            return _ranged(value)
        case Var(name):
            if name not in env:
                raise UnboundVariable(name)
            return _ranged(env[name])
        case BinOp(op, lhs, rhs):
            a = eval_expr(lhs, env)
            b = eval_expr(rhs, env)
            if op == "+":
                return _ranged(a + b)
            if op == "-":
                return _ranged(a - b)
            if op == "*":
                return _ranged(a * b)
            if op == "/":
                if b == 0:
                    raise DivisionByZero(f"{a}/{b}")
                return _ranged(_c_quotient(a, b))
            if op == "%":
                if b == 0:
                    raise DivisionByZero(f"{a}%{b}")
                # The implied quotient must be representable too.
                q = _ranged(_c_quotient(a, b))
                return _ranged(a - q * b)
            raise ValueError(f"unknown operator {op!r}")
    raise TypeError(f"not an expression: {e!r}")


def expr_vars(e: Expr) -> set[str]:
    match e:
        case Lit():
            return set()
        case Var(name):
            return {name}
        case BinOp(_, lhs, rhs):
            return expr_vars(lhs) | expr_vars(rhs)
    raise TypeError(f"not an expression: {e!r}")


def expr_equal(a: Expr, b: Expr, env: Env) -> bool:
    """Semantic equality: both sides evaluate to the same value under `env`."""
    return eval_expr(a, env) == eval_expr(b, env)


# ---------------------------------------------------------------------------
# predicates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cmp:
    op: str  # one of == != < <= > >=
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class And:
    lhs: Pred
    rhs: Pred


@dataclass(frozen=True)
class Or:
    lhs: Pred
    rhs: Pred


@dataclass(frozen=True)
class Not:
    arg: Pred


Pred = Union[Cmp, And, Or, Not]


def eval_pred(p: Pred, env: Env) -> bool:
    match p:
        case Cmp(op, lhs, rhs):
            a = eval_expr(lhs, env)
            b = eval_expr(rhs, env)
            if op == "==":
                return a == b
            if op == "!=":
                return a != b
            if op == "<":
                return a < b
            if op == "<=":
                return a <= b
            if op == ">":
                return a > b
            if op == ">=":
                return a >= b
            raise ValueError(f"unknown comparison {op!r}")
        case And(lhs, rhs):
            return eval_pred(lhs, env) and eval_pred(rhs, env)
        case Or(lhs, rhs):
            return eval_pred(lhs, env) or eval_pred(rhs, env)
        case Not(arg):
            return not eval_pred(arg, env)
    raise TypeError(f"not a predicate: {p!r}")


def pred_vars(p: Pred) -> set[str]:
    match p:
        case Cmp(_, lhs, rhs):
            return expr_vars(lhs) | expr_vars(rhs)
        case And(lhs, rhs) | Or(lhs, rhs):
            return pred_vars(lhs) | pred_vars(rhs)
        case Not(arg):
            return pred_vars(arg)
    raise TypeError(f"not a predicate: {p!r}")


# ---------------------------------------------------------------------------
# kinds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntKind:
    pass


@dataclass(frozen=True)
class NatKind:
    pass


@dataclass(frozen=True)
class FloatKind:
    pass


@dataclass(frozen=True)
class Refinement:
    """A bound variable and a predicate over it (plus enclosing parameters)."""

    var: str
    pred: Pred


@dataclass(frozen=True)
class RefinedKind:
    base: Kind
    refinement: Refinement


@dataclass(frozen=True)
class ArrayKind:
    elem: Kind
    length: Expr


Kind = Union[IntKind, NatKind, FloatKind, RefinedKind, ArrayKind]

INT = IntKind()
NAT = NatKind()
FLOAT = FloatKind()


def desugar_kind(k: Kind) -> Kind:
    """Rewrite `nat` as int refined by nonnegativity. Idempotent."""
    match k:
        case NatKind():
            return RefinedKind(INT, Refinement("n", Cmp(">=", Var("n"), Lit(0))))
        case RefinedKind(base, r):
            return RefinedKind(desugar_kind(base), r)
        case ArrayKind(elem, length):
            return ArrayKind(desugar_kind(elem), length)
        case _:
            return k


def check_refinement(k: Kind, value: int, env: Env) -> bool:
    """Whether `value` satisfies every refinement layer of `k` under `env`.

    Each refinement predicate is evaluated with the environment extended
    by the bound variable, so earlier parameters stay in scope. Raises
    KindMismatch when `k` is not integer-valued (float or array).
    """
    k = desugar_kind(k)
    match k:
        case IntKind():
            return True
        case RefinedKind(base, r):
            if not check_refinement(base, value, env):
                return False
            return eval_pred(r.pred, {**env, r.var: value})
        case FloatKind() | ArrayKind():
            raise KindMismatch("refinement check against a non-integer kind")
    raise TypeError(f"not a kind: {k!r}")
