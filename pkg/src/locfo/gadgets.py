"""Grid and tiling gadgets, plus the model transformations that make a
whole structure fit inside one small ball."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .core import PRED_RE, ArgumentError, DataStructure, Signature, full_gamma
from .evaluator import query_pairs
from .formula import (
    And,
    AtLeast,
    Const,
    Eq,
    Exists,
    Forall,
    Formula,
    FragmentError,
    Local,
    Not,
    Or,
    Pred,
    Rel,
    conj,
    disj,
    forall,
    implies,
    neg,
)

GRID_SIGMA = ("UH0", "UH1", "UV0", "UV1")
GAMMA_R3 = frozenset({(1, 1), (2, 2)})
GAMMA_R2 = frozenset({(1, 1), (2, 2), (1, 2)})

Node = tuple[int, int]


@dataclass(frozen=True)
class BiBinary:
    carrier: tuple
    H: frozenset
    V: frozenset

    def __post_init__(self):
        cs = set(self.carrier)
        for rel in (self.H, self.V):
            for a, b in rel:
                if a not in cs or b not in cs:
                    raise ArgumentError(f"pair ({a}, {b}) leaves the carrier")


@dataclass(frozen=True)
class TriBinary(BiBinary):
    W: frozenset = frozenset()

    def __post_init__(self):
        super().__post_init__()
        cs = set(self.carrier)
        for a, b in self.W:
            if a not in cs or b not in cs:
                raise ArgumentError(f"pair ({a}, {b}) leaves the carrier")


@dataclass(frozen=True)
class DominoSystem:
    dominoes: tuple[str, ...]
    H: frozenset = field(default_factory=frozenset)
    V: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "dominoes", tuple(self.dominoes))
        object.__setattr__(self, "H", frozenset(tuple(p) for p in self.H))
        object.__setattr__(self, "V", frozenset(tuple(p) for p in self.V))
        if not self.dominoes:
            raise ArgumentError("a domino system needs at least one domino")
        if len(set(self.dominoes)) != len(self.dominoes):
            raise ArgumentError("duplicate domino names")
        for d in self.dominoes:
            if not PRED_RE.match(d):
                raise ArgumentError(f"domino name {d!r} is not a valid predicate name")
            if d in GRID_SIGMA:
                raise ArgumentError(f"domino name {d!r} clashes with a grid label")
        ds = set(self.dominoes)
        for a, b in self.H | self.V:
            if a not in ds or b not in ds:
                raise ArgumentError(f"pair ({a}, {b}) uses an unknown domino")

    @classmethod
    def from_obj(cls, obj: Mapping) -> "DominoSystem":
        try:
            return cls(tuple(obj["dominoes"]), frozenset(map(tuple, obj.get("h", []))), frozenset(map(tuple, obj.get("v", []))))
        except (KeyError, TypeError) as exc:
            raise ArgumentError(f"bad domino system: {exc}") from exc

    def to_obj(self) -> dict:
        return {
            "dominoes": list(self.dominoes),
            "h": [list(p) for p in sorted(self.H)],
            "v": [list(p) for p in sorted(self.V)],
        }


# ---------------------------------------------------------------- torus grids


def _mod(a: int, m: int) -> int:
    """Least nonnegative representative; the only place index arithmetic wraps."""
    return a % m


def grid(m: int) -> BiBinary:
    if m < 1:
        raise ArgumentError("grid size must be >= 1")
    nodes = tuple((i, j) for j in range(m) for i in range(m))
    H = frozenset(((i, j), (_mod(i + 1, m), j)) for i, j in nodes)
    V = frozenset(((i, j), (i, _mod(j + 1, m))) for i, j in nodes)
    return BiBinary(nodes, H, V)


def tri_grid(m: int) -> TriBinary:
    g = grid(m)
    W = frozenset(((i, j), (_mod(i + 1, m), _mod(j + 1, m))) for i, j in g.carrier)
    return TriBinary(g.carrier, g.H, g.V, W)


def node_id(i: int, j: int) -> str:
    return f"g{i}_{j}"


def build_a2m(m: int) -> DataStructure:
    """Two-value structure on the 2m x 2m torus: parity labels, value 1 names
    the 2x2 block, value 2 names the block of the lower-left neighbour."""
    if m < 1:
        raise ArgumentError("m must be >= 1")
    n = 2 * m

    def f1(i: int, j: int) -> int:
        i, j = _mod(i, n), _mod(j, n)
        return _mod(i // 2, m) + m * _mod(j // 2, m)

    rows = []
    for j in range(n):
        for i in range(n):
            labels = {f"UH{i % 2}", f"UV{j % 2}"}
            rows.append((node_id(i, j), labels, (f1(i, j), f1(i - 1, j - 1))))
    return DataStructure.build(Signature(GRID_SIGMA, 2, full_gamma(2)), rows)


def a2m_node(eid: str) -> Node:
    i, j = eid[1:].split("_")
    return int(i), int(j)


# ---------------------------------------------------------------- grid formulas


def _parity(h: int, v: int, var: str) -> Formula:
    return conj(Pred(f"UH{h}", var), Pred(f"UV{v}", var))


def _case(hx: int, vx: int, hy: int, vy: int, rel: tuple[int, int], x: str, y: str) -> Formula:
    return conj(_parity(hx, vx, x), _parity(hy, vy, y), Rel(rel[0], rel[1], x, y))


def build_phi_H(x: str = "x", y: str = "y") -> Formula:
    """Horizontal neighbour: same row parity, flipped column parity."""
    return disj(
        _case(0, 0, 1, 0, (1, 1), x, y),
        _case(1, 0, 0, 0, (2, 2), x, y),
        _case(0, 1, 1, 1, (1, 1), x, y),
        _case(1, 1, 0, 1, (2, 2), x, y),
    )


def build_phi_V(x: str = "x", y: str = "y") -> Formula:
    return disj(
        _case(0, 0, 0, 1, (1, 1), x, y),
        _case(1, 0, 1, 1, (1, 1), x, y),
        _case(0, 1, 0, 0, (2, 2), x, y),
        _case(1, 1, 1, 0, (2, 2), x, y),
    )


def build_phi_W(x: str = "x", y: str = "y") -> Formula:
    """Diagonal neighbour (one step right and one step up)."""
    return disj(
        _case(0, 0, 1, 1, (1, 2), x, y),
        _case(1, 0, 0, 1, (1, 2), x, y),
        _case(0, 1, 1, 0, (1, 2), x, y),
        _case(1, 1, 0, 0, (1, 2), x, y),
    )


def _xor(a: Formula, b: Formula) -> Formula:
    return disj(conj(a, neg(b)), conj(neg(a), b))


def _parity_ok(x: str) -> Formula:
    return conj(_xor(Pred("UH0", x), Pred("UH1", x)), _xor(Pred("UV0", x), Pred("UV1", x)))


def _progress(r: int) -> Formula:
    return Forall(
        "x", Local("x", r, conj(Exists("y", build_phi_H("x", "y")), Exists("y", build_phi_V("x", "y"))))
    )


def build_phi_grid_3loc() -> Formula:
    H, V = build_phi_H, build_phi_V
    complete = Forall(
        "x",
        Local(
            "x",
            3,
            forall(["y", "x1", "y1"], implies(conj(H("x", "y"), V("x", "x1"), V("y", "y1")), H("x1", "y1"))),
        ),
    )
    return conj(complete, _progress(3), Forall("x", Local("x", 3, _parity_ok("x"))))


def build_phi_grid_2loc() -> Formula:
    H, V, W = build_phi_H, build_phi_V, build_phi_W
    c1 = Forall(
        "x", Local("x", 2, forall(["y", "y1"], implies(conj(H("x", "y"), V("y", "y1")), W("x", "y1"))))
    )
    c2 = Forall(
        "x", Local("x", 2, forall(["x1", "y1"], implies(conj(V("x", "x1"), W("x", "y1")), H("x1", "y1"))))
    )
    return conj(c1, c2, _progress(2), Forall("x", Local("x", 2, _parity_ok("x"))))


def _phi_domino(D: DominoSystem, r: int) -> Formula:
    one = Forall(
        "x",
        Local(
            "x",
            r,
            conj(
                disj(Pred(d, "x") for d in D.dominoes),
                conj(neg(conj(Pred(a, "x"), Pred(b, "x"))) for a, b in itertools.combinations(D.dominoes, 2)),
            ),
        ),
    )

    def compat(rel, pairs):
        return Forall(
            "x",
            Local(
                "x",
                r,
                Forall(
                    "y",
                    implies(rel("x", "y"), disj(conj(Pred(a, "x"), Pred(b, "y")) for a, b in sorted(pairs))),
                ),
            ),
        )

    return conj(one, compat(build_phi_H, D.H), compat(build_phi_V, D.V))


def build_phi_D(D: DominoSystem) -> Formula:
    return _phi_domino(D, 3)


def build_phi_D_prime(D: DominoSystem) -> Formula:
    return _phi_domino(D, 2)


def tiling_signature(D: DominoSystem, gamma=GAMMA_R3) -> Signature:
    return Signature(GRID_SIGMA + D.dominoes, 2, gamma)


def label_a2m(m: int, tau: Mapping[Node, str], period: int, D: DominoSystem) -> DataStructure:
    """The 2m x 2m encoding with each node also labelled by ``tau`` of its
    coordinates reduced mod ``period``."""
    A = build_a2m(m)
    labels = []
    for eid, ls in zip(A.ids, A.labels):
        i, j = a2m_node(eid)
        labels.append(ls | {tau[(_mod(i, period), _mod(j, period))]})
    return DataStructure(Signature(GRID_SIGMA + D.dominoes, 2, A.gamma), A.ids, tuple(labels), A.values)


# ---------------------------------------------------------------- bi-binary checks


def induced_bibinary(A: DataStructure, phi_h: Formula | None = None, phi_v: Formula | None = None, strict: bool = False) -> BiBinary:
    H = query_pairs(A, phi_h or build_phi_H(), strict=strict)
    V = query_pairs(A, phi_v or build_phi_V(), strict=strict)
    return BiBinary(A.ids, H, V)


def induced_tribinary(A: DataStructure, strict: bool = False) -> TriBinary:
    g = induced_bibinary(A, strict=strict)
    W = query_pairs(A, build_phi_W(), strict=strict)
    return TriBinary(g.carrier, g.H, g.V, W)


def complete_holds(G: BiBinary) -> bool:
    succ_v: dict = {}
    for a, b in G.V:
        succ_v.setdefault(a, set()).add(b)
    for x, y in G.H:
        for x1 in succ_v.get(x, ()):
            for y1 in succ_v.get(y, ()):
                if (x1, y1) not in G.H:
                    return False
    return True


def progress_holds(G: BiBinary) -> bool:
    hs = {a for a, _ in G.H}
    vs = {a for a, _ in G.V}
    return all(a in hs and a in vs for a in G.carrier)


def complete_prime_holds(G: TriBinary) -> bool:
    succ_v: dict = {}
    for a, b in G.V:
        succ_v.setdefault(a, set()).add(b)
    for x, y in G.H:
        for y1 in succ_v.get(y, ()):
            if (x, y1) not in G.W:
                return False
    for x, y1 in G.W:
        for x1 in succ_v.get(x, ()):
            if (x1, y1) not in G.H:
                return False
    return True


def _morphism_search(m: int, targets: Sequence, H: frozenset, V: frozenset) -> dict | None:
    """Backtracking search for a map from the m x m torus preserving H and V."""
    src = grid(m)
    order = list(src.carrier)
    constraints: dict[Node, list[tuple[Node, frozenset, bool]]] = {n: [] for n in order}
    pos = {n: k for k, n in enumerate(order)}
    for rel_src, rel_dst in ((src.H, H), (src.V, V)):
        for a, b in rel_src:
            later = a if pos[a] >= pos[b] else b
            constraints[later].append((a, b, rel_dst))
    assign: dict = {}

    def ok(n) -> bool:
        for a, b, rel in constraints[n]:
            if (assign[a], assign[b]) not in rel:
                return False
        return True

    def go(k: int) -> bool:
        if k == len(order):
            return True
        n = order[k]
        for t in targets:
            assign[n] = t
            if ok(n) and go(k + 1):
                return True
        del assign[n]
        return False

    return dict(assign) if go(0) else None


def is_gridlike(G: BiBinary, m_max: int = 4) -> tuple[int, dict] | None:
    """Smallest m <= m_max with a morphism from the m x m torus into ``G``.
    ``None`` only means nothing was found within the bound."""
    for m in range(1, m_max + 1):
        pi = _morphism_search(m, G.carrier, G.H, G.V)
        if pi is not None:
            return m, pi
    return None


def periodic_tiling_search(D: DominoSystem, m_max: int = 4) -> tuple[int, dict] | None:
    for m in range(1, m_max + 1):
        tau = _morphism_search(m, D.dominoes, D.H, D.V)
        if tau is not None:
            return m, tau
    return None


def is_morphism(pi: Mapping, src: BiBinary, H: frozenset, V: frozenset) -> bool:
    return all((pi[a], pi[b]) in H for a, b in src.H) and all((pi[a], pi[b]) in V for a, b in src.V)


# ---------------------------------------------------------------- ball fillers


GE = "Ge"


def add_ge(A: DataStructure, ge: str = GE) -> DataStructure:
    """Add one ``ge``-labelled element for every pair of values, so that every
    element of the result lies within distance 3 of every other."""
    if A.d != 2:
        raise ArgumentError(f"needs d=2, got d={A.d}")
    if ge in A.sigma:
        raise ArgumentError(f"predicate {ge!r} already in the signature")
    vs = sorted({v for row in A.values for v in row})
    taken = set(A.ids)
    rows = list(A.rows())
    for d1 in vs:
        for d2 in vs:
            eid = f"ge{d1}_{d2}"
            while eid in taken:
                eid += "'"
            taken.add(eid)
            rows.append((eid, {ge}, (d1, d2)))
    return DataStructure.build(A.signature.extend([ge]), rows)


def strip_ge(A: DataStructure, ge: str = GE) -> DataStructure:
    if ge not in A.sigma:
        raise ArgumentError(f"predicate {ge!r} not in the signature")
    keep = [eid for eid, ls in zip(A.ids, A.labels) if ge not in ls]
    if not keep:
        raise ArgumentError(f"every element carries {ge!r}")
    sigma = [s for s in A.sigma if s != ge]
    return A.restrict(keep).project_labels(sigma)


def relativize_ge(phi: Formula, ge: str = GE) -> Formula:
    """Make every quantifier skip ``ge``-labelled elements."""
    if isinstance(phi, (Pred, Rel, Eq, Const)):
        return phi
    if isinstance(phi, Not):
        return neg(relativize_ge(phi.body, ge))
    if isinstance(phi, And):
        return conj(relativize_ge(a, ge) for a in phi.args)
    if isinstance(phi, Or):
        return disj(relativize_ge(a, ge) for a in phi.args)
    if isinstance(phi, Exists):
        return Exists(phi.var, conj(neg(Pred(ge, phi.var)), relativize_ge(phi.body, ge)))
    if isinstance(phi, Forall):
        return Forall(phi.var, implies(neg(Pred(ge, phi.var)), relativize_ge(phi.body, ge)))
    if isinstance(phi, AtLeast):
        return AtLeast(phi.k, phi.var, conj(neg(Pred(ge, phi.var)), relativize_ge(phi.body, ge)))
    if isinstance(phi, Local):
        raise FragmentError("relativization expects a formula without local modalities")
    raise TypeError(f"not a formula: {phi!r}")


def exist_radius3(phi: Formula, ge: str = GE) -> Formula:
    """``exists x. <T(phi)>_3`` for a sentence ``phi`` over two values."""
    return Exists("x", Local("x", 3, relativize_ge(phi, ge)))


def pad_value(A: DataStructure, c: int = 0) -> DataStructure:
    """Append the constant value ``c`` to every element."""
    if c < 0:
        raise ArgumentError("values are nonnegative")
    d = A.d + 1
    gamma = set(A.gamma) | {(d, d)}
    sig = Signature(A.sigma, d, frozenset(gamma))
    return DataStructure(sig, A.ids, A.labels, tuple(vs + (c,) for vs in A.values))


def drop_last_value(A: DataStructure) -> DataStructure:
    if A.d < 1:
        raise ArgumentError("no value to drop")
    d = A.d - 1
    gamma = {(i, j) for i, j in A.gamma if i <= d and j <= d}
    return DataStructure(Signature(A.sigma, d, frozenset(gamma)), A.ids, A.labels, tuple(vs[:d] for vs in A.values))


def exist_radius2(phi: Formula) -> Formula:
    """``exists x. <phi>_2``; with one extra shared value every element is
    within distance 2 of every other."""
    return Exists("x", Local("x", 2, phi))
