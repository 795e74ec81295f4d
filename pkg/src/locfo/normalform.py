"""Threshold normal form for formulas over unary predicates only, and the
counter encoding that turns threshold sentences into two-variable ones.

A threshold atom ``<k, U>`` stands for "at least k elements carry exactly
the labels U" (complete type over the ambient signature). The normal form
of a formula with at most one free variable ``x`` is a Boolean combination
of such atoms and literals ``P(x)``.

Elimination works innermost-out. For ``exists y. chi`` with ``chi``
quantifier free, ``y`` either equals one of the other variables mentioned
in ``chi`` or is distinct from all of them and has some complete type U.
The second case becomes a threshold condition: there are more U-elements
than distinct U-typed outer variables.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

from .core import ArgumentError, DataStructure, Signature, all_label_sets
from .formula import (
    FALSE,
    TRUE,
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
    exactly_one,
    expand_sugar,
    forall,
    free_vars,
    iff,
    implies,
    neg,
    neq,
    subformulas,
)


@dataclass(frozen=True, order=True)
class ThresholdAtom:
    k: int
    U: frozenset

    def __repr__(self) -> str:
        return f"<{self.k}, {{{', '.join(sorted(self.U))}}}>"


def type_formula(U: Iterable[str], sigma: Sequence[str], var: str) -> Formula:
    """Exactly the labels ``U`` among ``sigma`` hold at ``var``."""
    U = set(U)
    return conj([Pred(s, var) if s in U else Not(Pred(s, var)) for s in sigma])


def same_labels(sigma: Sequence[str], x: str = "x", y: str = "y") -> Formula:
    return conj(iff(Pred(s, x), Pred(s, y)) for s in sigma)


def threshold_formula(atom: ThresholdAtom, sigma: Sequence[str], var: str = "y") -> Formula:
    return AtLeast(atom.k, var, type_formula(atom.U, sigma, var))


def decode_threshold(node: AtLeast) -> ThresholdAtom:
    body = node.body
    lits = body.args if isinstance(body, And) else (body,)
    U = frozenset(l.name for l in lits if isinstance(l, Pred))
    return ThresholdAtom(node.k, U)


def threshold_atoms(phi: Formula) -> frozenset[ThresholdAtom]:
    return frozenset(
        decode_threshold(p) for p in subformulas(phi) if isinstance(p, AtLeast) and not free_vars(p)
    )


@dataclass(frozen=True)
class ThresholdNF:
    formula: Formula
    sigma: tuple[str, ...]
    var: str | None

    @property
    def atoms(self) -> frozenset[ThresholdAtom]:
        return threshold_atoms(self.formula)

    @property
    def M(self) -> int:
        return max((a.k for a in self.atoms), default=0)

    def to_formula(self) -> Formula:
        return self.formula


# ---------------------------------------------------------------- elimination


class _QE:
    def __init__(self, sigma: Sequence[str], bound_name: str):
        self.sigma = tuple(sigma)
        self.types = [frozenset(U) for U in all_label_sets(self.sigma)]
        self.bound_name = bound_name
        self.type_cache: dict = {}

    def atom(self, k: int, U: frozenset) -> Formula:
        key = (k, U)
        hit = self.type_cache.get(key)
        if hit is None:
            hit = threshold_formula(ThresholdAtom(k, U), self.sigma, self.bound_name)
            self.type_cache[key] = hit
        return hit

    def run(self, p: Formula) -> Formula:
        if isinstance(p, (Pred, Eq, Const)):
            if isinstance(p, Eq) and p.left == p.right:
                return TRUE
            return p
        if isinstance(p, AtLeast) and not free_vars(p):
            return p
        if isinstance(p, Not):
            return neg(self.run(p.body))
        if isinstance(p, And):
            return simplify(conj(self.run(a) for a in p.args))
        if isinstance(p, Or):
            return simplify(disj(self.run(a) for a in p.args))
        if isinstance(p, Exists):
            return self.eliminate(p.var, self.run(p.body))
        if isinstance(p, Forall):
            return neg(self.eliminate(p.var, neg(self.run(p.body))))
        if isinstance(p, Rel):
            raise FragmentError(f"relation atom {p} in a formula over unary predicates")
        if isinstance(p, Local):
            raise FragmentError("local modality in a formula over unary predicates")
        raise TypeError(f"unexpected node {p!r}")

    def eliminate(self, y: str, chi: Formula) -> Formula:
        if y not in free_vars(chi):
            return chi
        outer = sorted(free_vars(chi) - {y})
        cases = [substitute_var(chi, y, z) for z in outer]
        grouped: dict[Formula, list[frozenset]] = {}
        for U in self.types:
            body = specialise_type(chi, y, U)
            if body == FALSE:
                continue
            grouped.setdefault(body, []).append(U)
        for body, Us in grouped.items():
            cases.append(conj(body, disj(self.fresh_witness(U, outer) for U in Us)))
        return simplify(disj(cases))

    def fresh_witness(self, U: frozenset, outer: list[str]) -> Formula:
        """Some U-element differs from every variable in ``outer``."""
        parts = [self.atom(1, U)]
        for k in range(1, len(outer) + 1):
            parts.append(disj(neg(self.distinct_typed(k, U, outer)), self.atom(k + 1, U)))
        return conj(parts)

    def distinct_typed(self, k: int, U: frozenset, outer: list[str]) -> Formula:
        """At least ``k`` distinct variables of ``outer`` have type U."""
        options = []
        for group in combinations(outer, k):
            typed = [type_formula(U, self.sigma, z) for z in group]
            apart = [neq(a, b) for a, b in combinations(group, 2)]
            options.append(conj(typed + apart))
        return disj(options)


def substitute_var(p: Formula, y: str, z: str) -> Formula:
    """Replace ``y`` by ``z`` in a quantifier-free formula (thresholds are closed)."""
    if isinstance(p, Pred):
        return Pred(p.name, z) if p.var == y else p
    if isinstance(p, Eq):
        a = z if p.left == y else p.left
        b = z if p.right == y else p.right
        return TRUE if a == b else Eq(a, b)
    if isinstance(p, Not):
        return neg(substitute_var(p.body, y, z))
    if isinstance(p, And):
        return conj(substitute_var(a, y, z) for a in p.args)
    if isinstance(p, Or):
        return disj(substitute_var(a, y, z) for a in p.args)
    return p


def specialise_type(p: Formula, y: str, U: frozenset) -> Formula:
    """Specialise ``p`` to ``y`` of type U and distinct from every other variable."""
    if isinstance(p, Pred):
        if p.var == y:
            return TRUE if p.name in U else FALSE
        return p
    if isinstance(p, Eq):
        if p.left == y and p.right == y:
            return TRUE
        if p.left == y or p.right == y:
            return FALSE
        return p
    if isinstance(p, Not):
        return neg(specialise_type(p.body, y, U))
    if isinstance(p, And):
        return conj(specialise_type(a, y, U) for a in p.args)
    if isinstance(p, Or):
        return disj(specialise_type(a, y, U) for a in p.args)
    return p


def simplify(p: Formula) -> Formula:
    """Sound local rewrites: constant folding, duplicate removal, and
    threshold monotonicity (a larger bound for the same type implies a
    smaller one)."""
    if isinstance(p, Not):
        return neg(simplify(p.body))
    if isinstance(p, (And, Or)):
        args = [simplify(a) for a in p.args]
        combined = conj(args) if isinstance(p, And) else disj(args)
        if not isinstance(combined, (And, Or)):
            return combined
        # folding may leave a single operand of the other connective
        is_and = isinstance(combined, And)
        args = list(combined.args)
        best: dict[frozenset, int] = {}
        for a in args:
            if isinstance(a, AtLeast) and not free_vars(a):
                t = decode_threshold(a)
                cur = best.get(t.U)
                if cur is None or (t.k > cur if is_and else t.k < cur):
                    best[t.U] = t.k
        kept = []
        for a in args:
            if isinstance(a, AtLeast) and not free_vars(a):
                t = decode_threshold(a)
                if best.get(t.U) != t.k:
                    continue
            kept.append(a)
        # complementary literals
        present = set(kept)
        for a in kept:
            if neg(a) in present:
                return FALSE if is_and else TRUE
        return conj(kept) if is_and else disj(kept)
    return p


def threshold_nf(psi: Formula, x: str | None = "x", sigma: Sequence[str] | None = None) -> ThresholdNF:
    """Equivalent Boolean combination of ``P(x)`` literals and threshold atoms.

    ``sigma`` is the ambient unary signature (types are complete over it);
    by default the predicates mentioned in ``psi``.
    """
    fv = free_vars(psi)
    allowed = {x} if x is not None else set()
    if not fv <= allowed:
        raise ArgumentError(f"free variables {sorted(fv - allowed)} besides {x}")
    for p in subformulas(psi):
        if isinstance(p, Rel):
            raise FragmentError(f"relation atom {p} in a formula over unary predicates")
    if sigma is None:
        sigma = sorted({p.name for p in subformulas(psi) if isinstance(p, Pred)})
    bound = "y" if x != "y" else "z"
    qe = _QE(sigma, bound)
    body = expand_sugar(psi)
    out = simplify(qe.run(body))
    return ThresholdNF(out, tuple(sigma), x)


# ---------------------------------------------------------------- counters


def eta_name(i: int) -> str:
    return f"Eta{i}"


def eta_formula(sigma: Sequence[str], M: int) -> Formula:
    """Each element has one counter; counters below M are unique per label
    class; counter i > 1 has a predecessor i-1 in its label class."""
    if M < 1:
        return TRUE
    eta = [Pred(eta_name(i), "x") for i in range(1, M + 1)]
    same = same_labels(sigma)
    one = forall("x", exactly_one(eta))
    unique = forall(
        "x",
        conj(
            implies(
                Pred(eta_name(i), "x"),
                neg(Exists("y", conj(neq("x", "y"), same, Pred(eta_name(i), "y")))),
            )
            for i in range(1, M)
        ),
    )
    pred = forall(
        "x",
        conj(
            implies(Pred(eta_name(i), "x"), Exists("y", conj(same, Pred(eta_name(i - 1), "y"))))
            for i in range(2, M + 1)
        ),
    )
    return conj(one, unique, pred)


def counter_encoding(phi: Formula, sigma: Sequence[str] | None = None) -> tuple[tuple[str, ...], Formula]:
    """Two-variable sentence over ``sigma + Eta1..EtaM`` that is satisfiable
    over exactly the same universe sizes as ``phi``."""
    if free_vars(phi):
        raise ArgumentError("counter encoding needs a sentence")
    nf = threshold_nf(phi, None, sigma)
    sigma = nf.sigma
    M = nf.M
    clash = {eta_name(i) for i in range(1, M + 1)} & set(sigma)
    if clash:
        raise ArgumentError(f"counter names {sorted(clash)} already in the signature")

    def replace(p: Formula) -> Formula:
        if isinstance(p, AtLeast):
            t = decode_threshold(p)
            return Exists("y", conj(type_formula(t.U, sigma, "y"), Pred(eta_name(t.k), "y")))
        if isinstance(p, Not):
            return neg(replace(p.body))
        if isinstance(p, And):
            return conj(replace(a) for a in p.args)
        if isinstance(p, Or):
            return disj(replace(a) for a in p.args)
        return p

    body = replace(nf.formula)
    new_sigma = tuple(sigma) + tuple(eta_name(i) for i in range(1, M + 1))
    return new_sigma, conj(body, eta_formula(sigma, M))


def eta_expand(A: DataStructure, M: int, sigma: Sequence[str] | None = None) -> DataStructure:
    """Label each element with ``Eta{min(rank, M)}``, rank counted within its
    label class in structure order."""
    if M < 1:
        raise ArgumentError("M must be >= 1")
    sigma = tuple(A.sigma if sigma is None else sigma)
    names = [eta_name(i) for i in range(1, M + 1)]
    clash = set(names) & set(sigma)
    if clash:
        raise ArgumentError(f"counter names {sorted(clash)} already in the signature")
    seen: dict[frozenset, int] = {}
    labels = []
    keep = set(sigma)
    for ls in A.labels:
        cls = ls & keep
        rank = seen.get(cls, 0) + 1
        seen[cls] = rank
        labels.append(cls | {eta_name(min(rank, M))})
    sig = Signature(sigma + tuple(names), A.d, A.gamma)
    return DataStructure(sig, A.ids, tuple(labels), A.values)
