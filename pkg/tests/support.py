"""Fixtures and generators shared by the test modules."""

from __future__ import annotations

import itertools
import random
from collections import deque
from typing import Iterator, Sequence

from hypothesis import strategies as st

from locfo.core import DataStructure, Signature, full_gamma, relation_holds
from locfo.formula import And, AtLeast, Const, Eq, Exists, Forall, Local, Not, Or, Pred, Rel
from locfo.localred import ED, EQ, GAMMA_LOC1
from locfo.syntax import parse_formula

SEED = 20240917

# one summary line per acceptance criterion, printed by conftest
ACCEPTANCE: list[str] = []


def structure(rows, sigma=(), d=2, gamma=None) -> DataStructure:
    sig = Signature(tuple(sigma), d, full_gamma(d) if gamma is None else frozenset(gamma))
    return DataStructure.build(sig, rows)


# ---------------------------------------------------------------- figures

# relation pairs admitted in the first locality figure
GAMMA_FIG1 = frozenset({(1, 1), (2, 2), (1, 2)})


def fig_ball1() -> DataStructure:
    """Five-element structure used to illustrate 1-balls."""
    rows = [("a", (), (1, 2)), ("b", (), (3, 1)), ("c", (), (3, 2)), ("d", (), (1, 4)), ("e", (), (3, 5))]
    return structure(rows, gamma=GAMMA_FIG1)


def fig_ball2() -> DataStructure:
    """Six-element structure used to illustrate 2-balls under all pairs."""
    rows = [
        ("a", (), (1, 2)),
        ("b", (), (1, 3)),
        ("c", (), (3, 2)),
        ("d", (), (5, 6)),
        ("e", (), (4, 3)),
        ("f", (), (2, 7)),
    ]
    return structure(rows)


def fig_diag_a(with_ed: bool = True) -> DataStructure:
    """Well-diagonalized structure: eight plain elements plus four witnesses."""
    rows = [
        ("a1", {EQ}, (1, 1)),
        ("a2", {EQ}, (1, 1)),
        ("a3", {EQ}, (1, 1)),
        ("a4", (), (3, 1)),
        ("a5", (), (2, 1)),
        ("a6", {EQ}, (2, 2)),
        ("a7", (), (1, 2)),
        ("a8", (), (3, 4)),
    ]
    sigma = (EQ,)
    if with_ed:
        rows += [(f"b{v}", {EQ, ED}, (v, v)) for v in (1, 2, 3, 4)]
        sigma = (EQ, ED)
    return structure(rows, sigma, gamma=GAMMA_LOC1)


def fig_diag_b() -> DataStructure:
    """Same as :func:`fig_diag_a` after permuting first values; satisfies the
    witness axioms without being well-diagonalized."""
    rows = [
        ("a1", {EQ}, (3, 1)),
        ("a2", {EQ}, (3, 1)),
        ("a3", {EQ}, (3, 1)),
        ("a4", (), (4, 1)),
        ("a5", (), (1, 1)),
        ("a6", {EQ}, (1, 2)),
        ("a7", (), (3, 2)),
        ("a8", (), (4, 4)),
        ("b1", {EQ, ED}, (3, 1)),
        ("b2", {EQ, ED}, (1, 2)),
        ("b3", {EQ, ED}, (4, 3)),
        ("b4", {EQ, ED}, (2, 4)),
    ]
    return structure(rows, (EQ, ED), gamma=GAMMA_LOC1)


def fig_counting() -> DataStructure:
    """Structure over no labels used to illustrate counting constraints."""
    rows = [
        ("a", (), (1, 2)),
        ("b", (), (1, 1)),
        ("c", (), (1, 1)),
        ("d", (), (1, 1)),
        ("e", (), (2, 2)),
        ("f", (), (3, 4)),
        ("g", (), (2, 1)),
        ("h", (), (3, 1)),
    ]
    return structure(rows, gamma=GAMMA_LOC1)


def fig_intersections() -> DataStructure:
    """P-labelled elements forming intersections of sizes 4, 3, 2, 2 that all
    share first value 1."""
    rows = []
    for v2, count in ((1, 4), (2, 3), (3, 2), (4, 2)):
        rows += [(f"p{v2}_{k}", {"P"}, (1, v2)) for k in range(count)]
    return structure(rows, ("P",), gamma=GAMMA_LOC1)


# ---------------------------------------------------------------- generators


def random_structure(
    rng: random.Random,
    n: int,
    sigma: Sequence[str] = (),
    d: int = 2,
    max_value: int = 4,
    gamma=None,
    label_p: float = 0.5,
) -> DataStructure:
    rows = [
        (
            f"e{k}",
            {s for s in sigma if rng.random() < label_p},
            tuple(rng.randint(1, max_value) for _ in range(d)),
        )
        for k in range(n)
    ]
    return structure(rows, sigma, d, gamma)


def all_structures(sigma: Sequence[str], d: int, n: int, max_value: int, gamma=None) -> Iterator[DataStructure]:
    """Every structure with ids e0.. and values in 1..max_value (no dedup)."""
    label_sets = [frozenset(c) for k in range(len(sigma) + 1) for c in itertools.combinations(sigma, k)]
    for ls in itertools.product(label_sets, repeat=n):
        for vs in itertools.product(range(1, max_value + 1), repeat=n * d):
            rows = [(f"e{k}", ls[k], vs[k * d : (k + 1) * d]) for k in range(n)]
            yield structure(rows, sigma, d, gamma)


class FormulaGen:
    """Random formula text over the concrete syntax."""

    def __init__(self, rng: random.Random, preds=("P",), rels=("1:1",), atleast: bool = False):
        self.rng = rng
        self.preds = list(preds)
        self.rels = list(rels)
        self.atleast = atleast

    def atom(self, vs: Sequence[str]) -> str:
        rng = self.rng
        a, b = rng.choice(vs), rng.choice(vs)
        t = rng.random()
        if self.rels and t < 0.4:
            return f"{a} ~{rng.choice(self.rels)} {b}"
        if self.preds and t < 0.8:
            return f"{rng.choice(self.preds)}({a})"
        return f"{a} = {b}"

    def body(self, vs: Sequence[str], depth: int, names: str = "xyzw") -> str:
        rng = self.rng
        r = rng.random()
        if depth == 0 or r < 0.25:
            return self.atom(vs)
        if r < 0.4:
            return f"!({self.body(vs, depth - 1, names)})"
        if r < 0.55:
            return f"({self.body(vs, depth - 1, names)} & {self.body(vs, depth - 1, names)})"
        if r < 0.7:
            return f"({self.body(vs, depth - 1, names)} | {self.body(vs, depth - 1, names)})"
        free = [c for c in names if c not in vs]
        if not free:
            return self.atom(vs)
        v = rng.choice(free)
        quants = ["exists", "forall"] + (["atleast[2]"] if self.atleast else [])
        return f"({rng.choice(quants)} {v}. {self.body(list(vs) + [v], depth - 1, names)})"

    def sentence(self, depth: int = 3) -> str:
        q = self.rng.choice(["exists", "forall"])
        return f"{q} x. {self.body(['x'], depth)}"

    def local_sentence(self, r: int, depth: int = 3) -> str:
        """Sentence whose only relation atoms sit inside ``loc[r]`` blocks."""
        q = self.rng.choice(["exists", "forall"])
        return f"{q} x. loc[{r}] x {{ {self.body(['x'], depth)} }}"


class MatrixGen(FormulaGen):
    """Bodies over a fixed centre name."""

    def matrix(self, n, r, depth=2):
        blocks = []
        for p in range(1, n + 1):
            center = f"x{p}"
            body = self.body([center], depth, "yz")
            blocks.append(f"loc[{r}] {center} {{ {body} }}")
        text = " & ".join(f"({b})" for b in blocks)
        if n > 1 and self.rng.random() < 0.5:
            text = f"({text}) | !(x1 = x2)"
        return parse_formula(text)


def gamma_pairs(d: int) -> list[str]:
    return [f"{i}:{j}" for i in range(1, d + 1) for j in range(1, d + 1)]


def up_to_iso(sig: Signature, max_size: int, value_bound: int | None = None) -> Iterator[DataStructure]:
    """Every structure of size 1..max_size up to isomorphism."""
    from locfo.satsolver import enumerate_structures

    for n in range(1, max_size + 1):
        yield from enumerate_structures(sig, n, value_bound)


# ---------------------------------------------------------------- reference semantics


def naive_edges(A):
    verts = [(a, i) for a in A.ids for i in range(1, A.d + 1)]
    out = set()
    for (a, i) in verts:
        for (b, j) in verts:
            if a == b and i != j:
                out.add(((a, i), (b, j)))
            elif (i, j) in A.gamma and relation_holds(A, i, j, a, b):
                out.add(((a, i), (b, j)))
    return out


def naive_ball(A, a, r):
    edges = naive_edges(A)
    dist = {(a, i): 0 for i in range(1, A.d + 1)}
    todo = deque(dist)
    while todo:
        u = todo.popleft()
        for (s, t) in edges:
            if s == u and t not in dist:
                dist[t] = dist[u] + 1
                todo.append(t)
    return {v for v, k in dist.items() if k <= r}


def ref_view(A, a, r):
    inside = naive_ball(A, a, r)
    members = sorted({b for b, _ in inside} | {a}, key=A.index)
    fresh = iter(range(10**6, 10**7))
    rows = [
        (b, A.labels_of(b), tuple(A.value(b, i) if (b, i) in inside else next(fresh) for i in range(1, A.d + 1)))
        for b in members
    ]
    return structure(rows, A.sigma, A.d, A.gamma)


def ref_eval(A, I, p):
    """Satisfaction by direct structural recursion."""
    if isinstance(p, Const):
        return p.value
    if isinstance(p, Pred):
        return p.name in A.labels_of(I[p.var])
    if isinstance(p, Rel):
        return A.value(I[p.left], p.i) == A.value(I[p.right], p.j)
    if isinstance(p, Eq):
        return I[p.left] == I[p.right]
    if isinstance(p, Not):
        return not ref_eval(A, I, p.body)
    if isinstance(p, And):
        return all(ref_eval(A, I, q) for q in p.args)
    if isinstance(p, Or):
        return any(ref_eval(A, I, q) for q in p.args)
    if isinstance(p, Exists):
        return any(ref_eval(A, {**I, p.var: b}, p.body) for b in A.ids)
    if isinstance(p, Forall):
        return all(ref_eval(A, {**I, p.var: b}, p.body) for b in A.ids)
    if isinstance(p, AtLeast):
        return sum(ref_eval(A, {**I, p.var: b}, p.body) for b in A.ids) >= p.k
    if isinstance(p, Local):
        V = ref_view(A, I[p.var], p.radius)
        return ref_eval(V, {v: e for v, e in I.items() if e in V.ids}, p.body)
    raise TypeError(p)


# ---------------------------------------------------------------- hypothesis

VARS = st.sampled_from(["x", "y", "z", "w1", "x#2"])
PREDS = st.sampled_from(["P", "Q", "Leader"])

atoms = st.one_of(
    st.builds(Pred, PREDS, VARS),
    st.builds(Rel, st.integers(1, 3), st.integers(1, 3), VARS, VARS),
    st.builds(Eq, VARS, VARS),
    st.builds(Const, st.booleans()),
)


def _extend(children):
    pair = st.lists(children, min_size=2, max_size=3).map(tuple)
    return st.one_of(
        st.builds(Not, children),
        st.builds(And, pair),
        st.builds(Or, pair),
        st.builds(Exists, VARS, children),
        st.builds(Forall, VARS, children),
        st.builds(AtLeast, st.integers(1, 4), VARS, children),
        st.builds(Local, VARS, st.integers(0, 3), children),
    )


formulas = st.recursive(atoms, _extend, max_leaves=12)
