"""Term helpers: spine concatenation, atom enumeration, grounding."""

from __future__ import annotations

import random

from commcheck.exprs import BinOp, Lit, Var
from commcheck.parser import parse_local_term
from commcheck.terms import (
    Choice,
    End,
    Loop,
    Prefix,
    atoms_of,
    concat,
    ground_term,
    is_ground,
)

from proto_gen import random_local_term


def lt(text):
    return parse_local_term(text)


def spine_len(t):
    n = 0
    while not isinstance(t, End):
        n += 1
        t = t.cont
    return n


def test_concat_identities():
    t = lt("send(1,MPI_INT,1).loop(receive(0,MPI_INT,1).end).end")
    assert concat(t, End()) == t
    assert concat(End(), t) == t


def test_concat_grafts_at_spine_end_only():
    a = lt("loop(send(1,MPI_INT,1).end).end")
    b = lt("receive(0,MPI_INT,2).end")
    joined = concat(a, b)
    # the loop body is untouched; the continuation spine grew
    assert isinstance(joined, Loop)
    assert joined.body == a.body
    assert joined.cont == b


def test_concat_is_associative():
    rng = random.Random(12)
    for _ in range(200):
        a = random_local_term(rng, max_atoms=4)
        b = random_local_term(rng, max_atoms=4)
        c = random_local_term(rng, max_atoms=4)
        assert concat(concat(a, b), c) == concat(a, concat(b, c))


def test_concat_spine_length_adds():
    rng = random.Random(13)
    for _ in range(200):
        a = random_local_term(rng, max_atoms=5)
        b = random_local_term(rng, max_atoms=5)
        assert spine_len(concat(a, b)) == spine_len(a) + spine_len(b)


def test_atoms_of_order():
    t = lt(
        "send(1,MPI_INT,1)."
        "loop(receive(0,MPI_INT,2).end)."
        "choice(send(1,MPI_INT,3).end,receive(0,MPI_INT,4).end)."
        "send(1,MPI_INT,5).end"
    )
    lengths = [a.length.value for a in atoms_of(t)]
    # spine order, loop body before continuation, true branch before false
    assert lengths == [1, 2, 3, 4, 5]


def test_atoms_of_concat_is_concatenation_for_spines():
    rng = random.Random(14)
    for _ in range(200):
        a = random_local_term(rng, max_atoms=5, max_depth=0)
        b = random_local_term(rng, max_atoms=5, max_depth=0)
        assert list(atoms_of(concat(a, b))) == list(atoms_of(a)) + list(atoms_of(b))


def test_ground_term_evaluates_everything():
    t = lt("send(n-1,MPI_INT,n*2).loop(receive(0,MPI_INT,n).end).end")
    g = ground_term(t, {"n": 3})
    assert is_ground(g)
    assert not is_ground(t)
    head = g.atom
    assert head.peer == Lit(2)
    assert head.length == Lit(6)


def test_ground_term_is_idempotent():
    rng = random.Random(15)
    for _ in range(200):
        t = random_local_term(rng)
        g = ground_term(t, {})
        assert ground_term(g, {}) == g
        assert is_ground(g)


def test_expr_structure_does_not_affect_ground_equality():
    a = lt("send(1,MPI_INT,2+2).end")
    b = lt("send(1,MPI_INT,2*2).end")
    assert a != b
    assert ground_term(a, {}) == ground_term(b, {})
    assert isinstance(a.atom.length, BinOp)
    assert isinstance(a.atom.length.lhs, Lit)
    assert a.atom.length != Var("four")
