"""Radius-1 satisfiability pipeline for two data values.

The input is a sentence whose local parts have radius 1 and compare values
through ``~1:1``, ``~2:2`` and ``~1:2``. The output is a sentence over unary
predicates and the diagonal-free relations ``~1:1``, ``~2:2`` only. It is
built in stages:

1. Every relation inside a local body is anchored at the centre and turned
   into a unary marker. The body then goes to threshold normal form, and
   thresholds become counting-constraint predicates (``CC``) read at the
   centre, together with ``Eq`` for elements whose two values agree.
2. One ``Ed`` element per data value carries the value in both fields, so
   the diagonal relation can be replaced by a detour through it.
3. Environments relative to all three relations are recovered from the
   diagonal-free ones (an eight-way case table).
4. Labels ``Gamma``, ``Alpha``, ``Beta`` count elements inside
   intersections and intersections along a shared value, so that each
   ``CC`` label is definable with two variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Iterable, Sequence

from .core import (
    ArgumentError,
    ContractError,
    DataStructure,
    Pair,
    Signature,
    all_label_sets,
    permute_values,
)
from .evaluator import models
from .formula import (
    EXT_TWO_VAR,
    FALSE,
    LOCAL,
    TRUE,
    And,
    AtLeast,
    Eq,
    Exists,
    Forall,
    Formula,
    FragmentError,
    FragmentSpec,
    Local,
    Not,
    Or,
    Pred,
    Rel,
    conj,
    disj,
    exactly_one,
    fresh_name,
    iff,
    implies,
    neg,
    neq,
    predicates,
    rename_free,
    require_fragment,
    variables,
)
from .normalform import decode_threshold, threshold_nf

GAMMA_LOC1: frozenset[Pair] = frozenset({(1, 1), (2, 2), (1, 2)})
GAMMA_MIRROR: frozenset[Pair] = frozenset({(1, 1), (2, 2), (2, 1)})
GAMMA_DF: frozenset[Pair] = frozenset({(1, 1), (2, 2)})

EQ = "Eq"
ED = "Ed"

# relation patterns in a fixed order, used for naming and enumeration
_PAIRS = ((1, 1), (1, 2), (2, 2))


def nonempty_patterns(gamma: Iterable[Pair] = GAMMA_LOC1) -> list[frozenset[Pair]]:
    pairs = sorted(gamma)
    out = []
    for k in range(1, len(pairs) + 1):
        out.extend(frozenset(c) for c in combinations(pairs, k))
    return out


# ---------------------------------------------------------------- constraints


@dataclass(frozen=True, order=True)
class CountingConstraint:
    """"At least ``m`` elements with labels ``U`` and relation pattern ``R``."""

    U: frozenset
    R: frozenset
    m: int

    def __post_init__(self):
        object.__setattr__(self, "U", frozenset(self.U))
        object.__setattr__(self, "R", frozenset(tuple(p) for p in self.R))
        if not self.R:
            raise ArgumentError("a counting constraint needs a nonempty relation set")
        if self.m < 1:
            raise ArgumentError("a counting constraint needs m >= 1")

    @property
    def name(self) -> str:
        u = "_".join(sorted(self.U)) or "none"
        r = "_".join(f"{i}{j}" for i, j in sorted(self.R))
        return f"CC__{u}__{r}__ge{self.m}"

    def display(self) -> str:
        u = ",".join(sorted(self.U))
        r = ",".join(f"{i}:{j}" for i, j in sorted(self.R))
        return f"CC⟨{{{u}}}|{{{r}}}|≥{self.m}⟩"


def cc_family(sigma: Sequence[str], M: int, gamma: Iterable[Pair] = GAMMA_LOC1) -> list[CountingConstraint]:
    return [
        CountingConstraint(U, R, m)
        for U in all_label_sets(sigma)
        for R in nonempty_patterns(gamma)
        for m in range(1, M + 1)
    ]


def cc_registry(sigma: Sequence[str], M: int) -> dict[str, CountingConstraint]:
    return {c.name: c for c in cc_family(sigma, M)}


# ---------------------------------------------------------------- environments


def pattern(A: DataStructure, a: int, b: int, gamma: Iterable[Pair]) -> frozenset[Pair]:
    va, vb = A.values[a], A.values[b]
    return frozenset((i, j) for i, j in gamma if va[i - 1] == vb[j - 1])


def env(
    A: DataStructure,
    a: str,
    U: Iterable[str],
    R: Iterable[Pair],
    gamma: Iterable[Pair],
    sigma: Sequence[str] | None = None,
) -> frozenset[str]:
    """Elements whose labels in ``sigma`` are exactly ``U`` and whose relation
    pattern towards ``a`` (restricted to ``gamma``) is exactly ``R``."""
    gamma = frozenset(gamma)
    R = frozenset(R)
    if not R <= gamma:
        raise ArgumentError(f"relation set {sorted(R)} is not within {sorted(gamma)}")
    sigma = set(A.sigma if sigma is None else sigma)
    U = frozenset(U)
    pa = A.index(a)
    return frozenset(
        A.ids[b]
        for b in range(len(A))
        if A.labels[b] & sigma == U and pattern(A, pa, b, gamma) == R
    )


def env_no_diag(
    B: DataStructure, a: str, U: Iterable[str], R: Iterable[Pair], sigma: Sequence[str] | None = None
) -> frozenset[str]:
    """Environment of ``a`` in the structure without ``Ed`` elements, relative
    to all three relations, computed on ``B`` using only ``~1:1``, ``~2:2``
    and the ``Eq``/``Ed`` labels."""
    R = frozenset(R)
    if not R or not R <= GAMMA_LOC1:
        raise ArgumentError(f"relation set {sorted(R)} must be a nonempty subset of 1:1,2:2,1:2")
    if ED in B.labels_of(a):
        raise ArgumentError(f"{a} is a diagonal element")
    sigma = [s for s in (B.sigma if sigma is None else sigma) if s not in (EQ, ED)]
    is_eq = EQ in B.labels_of(a)
    P_eq = B.elements_with(EQ)
    P_ed = B.elements_with(ED)

    def df(center: str, rel: Iterable[Pair]) -> frozenset[str]:
        return env(B, center, U, rel, GAMMA_DF, sigma)

    if R == GAMMA_LOC1:
        return df(a, GAMMA_DF) - P_ed if is_eq else frozenset()
    if R == GAMMA_DF:
        return df(a, GAMMA_DF) if not is_eq else frozenset()
    if R == {(1, 1), (1, 2)}:
        return df(a, {(1, 1)}) & (P_eq - P_ed) if not is_eq else frozenset()
    if R == {(2, 2), (1, 2)}:
        return df(a, {(2, 2)}) if is_eq else frozenset()
    if R == {(2, 2)}:
        return df(a, {(2, 2)}) - P_ed if not is_eq else frozenset()
    if R == {(1, 1)}:
        return df(a, {(1, 1)}) - P_eq
    if R == {(1, 2)} and not is_eq:
        v = B.value(a, 1)
        witnesses = [d for d in sorted(P_ed) if B.value(d, 1) == v]
        if len(witnesses) != 1:
            raise ContractError(f"expected one diagonal element with first value {v}")
        return df(witnesses[0], {(2, 2)})
    return frozenset()


# ---------------------------------------------------------------- step 1


def _marker_names(sigma: Sequence[str]) -> dict[Pair, str]:
    taken = set(sigma)
    out = {}
    for i, j in _PAIRS:
        name = f"Rel{i}{j}"
        while name in taken:
            name += "_"
        taken.add(name)
        out[(i, j)] = name
    return out


def _alpha_rename(p: Formula, center: str, taken: set[str]) -> Formula:
    """Rename bound occurrences of ``center`` so that it is only ever free."""
    if isinstance(p, (Exists, Forall, AtLeast)):
        var, body = p.var, p.body
        if var == center:
            new = fresh_name(var, taken)
            taken.add(new)
            body = rename_free(body, var, new)
            var = new
        body = _alpha_rename(body, center, taken)
        if isinstance(p, AtLeast):
            return AtLeast(p.k, var, body)
        return type(p)(var, body)
    if isinstance(p, Not):
        return Not(_alpha_rename(p.body, center, taken))
    if isinstance(p, (And, Or)):
        return type(p)(tuple(_alpha_rename(a, center, taken) for a in p.args))
    return p


def _anchor(p: Formula, c: str, markers: dict[Pair, str], gamma: frozenset[Pair]) -> Formula:
    """Replace relations by unary markers read relative to the centre ``c``.

    Inside the radius-1 view every value that is not fresh equals a value of
    the centre. ``y ~i:j z`` with ``y`` not the centre holds iff both values
    equal the same centre value, except when ``y`` and ``z`` are the same
    element and ``i = j`` (then the shared value may be fresh).
    """
    if isinstance(p, Rel):
        if p.left == c:
            return Pred(markers[(p.i, p.j)], p.right)
        options = [
            conj(Pred(markers[(k, p.i)], p.left), Pred(markers[(k, p.j)], p.right))
            for k in (1, 2)
            if (k, p.i) in gamma and (k, p.j) in gamma
        ]
        if p.i == p.j:
            options.append(Eq(p.left, p.right))
        return disj(options)
    if isinstance(p, Not):
        return neg(_anchor(p.body, c, markers, gamma))
    if isinstance(p, And):
        return conj(_anchor(a, c, markers, gamma) for a in p.args)
    if isinstance(p, Or):
        return disj(_anchor(a, c, markers, gamma) for a in p.args)
    if isinstance(p, (Exists, Forall)):
        return type(p)(p.var, _anchor(p.body, c, markers, gamma))
    if isinstance(p, AtLeast):
        return AtLeast(p.k, p.var, _anchor(p.body, c, markers, gamma))
    return p


@dataclass(frozen=True)
class LocalTranslation:
    center: str
    marked: Formula
    normal_form: Formula
    result: Formula
    M: int


@dataclass(frozen=True)
class Step1Result:
    M: int
    chi: Formula
    sigma: tuple[str, ...]
    locals: tuple[LocalTranslation, ...] = field(default=())

    @property
    def constraints(self) -> list[CountingConstraint]:
        return cc_family(self.sigma, self.M)

    @property
    def signature(self) -> Signature:
        return Signature(self.sigma + (EQ,) + tuple(c.name for c in self.constraints), 2, frozenset())


def _translate_local(loc: Local, sigma: tuple[str, ...]) -> LocalTranslation:
    c = loc.var
    markers = _marker_names(sigma)
    body = _alpha_rename(loc.body, c, set(variables(loc.body)) | {c})
    marked = _anchor(body, c, markers, GAMMA_LOC1)
    full = sigma + tuple(markers[p] for p in _PAIRS)
    nf = threshold_nf(marked, c, full)
    back = {name: pair for pair, name in markers.items()}
    sigma_set = set(sigma)

    def subst(p: Formula) -> Formula:
        if isinstance(p, Pred) and p.name in back:
            pair = back[p.name]
            return Pred(EQ, p.var) if pair == (1, 2) else TRUE
        if isinstance(p, AtLeast):
            t = decode_threshold(p)
            R = frozenset(back[n] for n in t.U if n in back)
            if not R:
                return FALSE
            return Pred(CountingConstraint(t.U & sigma_set, R, t.k).name, c)
        if isinstance(p, Not):
            return neg(subst(p.body))
        if isinstance(p, And):
            return conj(subst(a) for a in p.args)
        if isinstance(p, Or):
            return disj(subst(a) for a in p.args)
        return p

    result = subst(nf.formula)
    return LocalTranslation(c, marked, nf.formula, result, nf.M)


def step1_translate(phi: Formula, sigma: Sequence[str] | None = None) -> Step1Result:
    """Relation-free sentence over labels, ``Eq`` and counting constraints
    that has a well-typed model iff ``phi`` is satisfiable."""
    if sigma is None:
        sigma = sorted(predicates(phi))
    sigma = tuple(sigma)
    for reserved in (EQ, ED):
        if reserved in sigma:
            raise ArgumentError(f"predicate name {reserved} is reserved")
    require_fragment(phi, FragmentSpec(LOCAL, Signature(sigma, 2, GAMMA_LOC1), 1))
    done: list[LocalTranslation] = []

    def go(p: Formula) -> Formula:
        if isinstance(p, Local):
            t = _translate_local(p, sigma)
            done.append(t)
            return t.result
        if isinstance(p, Not):
            return neg(go(p.body))
        if isinstance(p, And):
            return conj(go(a) for a in p.args)
        if isinstance(p, Or):
            return disj(go(a) for a in p.args)
        if isinstance(p, (Exists, Forall)):
            return type(p)(p.var, go(p.body))
        if isinstance(p, AtLeast):
            return AtLeast(p.k, p.var, go(p.body))
        return p

    chi = go(phi)
    M = max((t.M for t in done), default=0)
    return Step1Result(M, chi, sigma, tuple(done))


def well_typed_expand(A: DataStructure, M: int, sigma: Sequence[str] | None = None) -> DataStructure:
    """Add ``Eq`` and every counting-constraint label that is true in ``A``."""
    if A.d != 2:
        raise ArgumentError(f"needs d=2, got d={A.d}")
    sigma = tuple(A.sigma if sigma is None else sigma)
    family = cc_family(sigma, M)
    keep = set(sigma)
    n = len(A)
    labels = []
    for a in range(n):
        counts: dict[tuple[frozenset, frozenset], int] = {}
        for b in range(n):
            R = pattern(A, a, b, GAMMA_LOC1)
            if R:
                key = (A.labels[b] & keep, R)
                counts[key] = counts.get(key, 0) + 1
        ls = set(A.labels[a] & keep)
        if A.values[a][0] == A.values[a][1]:
            ls.add(EQ)
        for c in family:
            if counts.get((c.U, c.R), 0) >= c.m:
                ls.add(c.name)
        labels.append(frozenset(ls))
    sig = Signature(sigma + (EQ,) + tuple(c.name for c in family), 2, A.gamma)
    return DataStructure(sig, A.ids, tuple(labels), A.values)


def _require_family(A: DataStructure, names: Iterable[str]) -> None:
    missing = [n for n in names if n not in A.sigma]
    if missing:
        raise ArgumentError(f"signature lacks {missing[:3]}{'...' if len(missing) > 3 else ''}")


def is_eq_respecting(A: DataStructure, exclude: Iterable[str] = ()) -> bool:
    _require_family(A, [EQ])
    skip = set(exclude)
    return all(
        (EQ in ls) == (vs[0] == vs[1]) for eid, ls, vs in A.rows() if eid not in skip
    )


def is_cc_respecting(A: DataStructure, M: int, sigma: Sequence[str]) -> bool:
    family = cc_family(sigma, M)
    _require_family(A, [c.name for c in family])
    keep = set(sigma)
    for a in range(len(A)):
        for c in family:
            count = sum(
                1
                for b in range(len(A))
                if A.labels[b] & keep == c.U and pattern(A, a, b, GAMMA_LOC1) == c.R
            )
            if (c.name in A.labels[a]) != (count >= c.m):
                return False
    return True


def is_well_typed(A: DataStructure, M: int, sigma: Sequence[str]) -> bool:
    return is_eq_respecting(A) and is_cc_respecting(A, M, sigma)


# ---------------------------------------------------------------- step 2


def add_diagonal(A: DataStructure) -> DataStructure:
    """Append one ``Ed``-and-``Eq`` element ``(v, v)`` per data value ``v``."""
    if A.d != 2:
        raise ArgumentError(f"needs d=2, got d={A.d}")
    if ED in A.sigma:
        raise ArgumentError(f"{ED} is already part of the signature")
    if EQ not in A.sigma:
        raise ArgumentError(f"signature must contain {EQ}")
    values = sorted({v for vs in A.values for v in vs})
    taken = set(A.ids)
    ids, labels, vals = list(A.ids), list(A.labels), list(A.values)
    for v in values:
        eid = f"ed{v}"
        while eid in taken:
            eid += "'"
        taken.add(eid)
        ids.append(eid)
        labels.append(frozenset({ED, EQ}))
        vals.append((v, v))
    sig = Signature(A.sigma + (ED,), 2, A.gamma)
    return DataStructure(sig, tuple(ids), tuple(labels), tuple(vals))


def xi_ed(theta: Iterable[str]) -> Formula:
    """Every value has exactly one diagonal witness per field; ``Eq`` marks
    elements with a witness on both fields; witnesses carry no other label."""
    theta = [t for t in theta if t not in (EQ, ED)]
    x, y = "x", "y"
    parts = []
    for i in (1, 2):
        parts.append(Forall(x, Exists(y, conj(Pred(ED, y), Rel(i, i, x, y)))))
        parts.append(
            Forall(x, Forall(y, implies(conj(Pred(ED, x), Pred(ED, y), Rel(i, i, x, y)), Eq(x, y))))
        )
    parts.append(
        Forall(x, iff(Pred(EQ, x), Exists(y, conj(Pred(ED, y), Rel(1, 1, x, y), Rel(2, 2, x, y)))))
    )
    parts.append(Forall(x, implies(Pred(ED, x), conj(neg(Pred(t, x)) for t in theta))))
    return conj(parts)


def diagonalize_model(B: DataStructure, phi: Formula | None = None) -> DataStructure:
    """Eq-respecting structure ``A`` such that ``add_diagonal(A)`` satisfies
    what ``B`` satisfies among diagonal-free sentences.

    First values are permuted so that every ``Ed`` element gets equal values,
    then the ``Ed`` elements are dropped.
    """
    if ED not in B.sigma or EQ not in B.sigma:
        raise ContractError(f"signature must contain {EQ} and {ED}")
    theta = [s for s in B.sigma if s not in (EQ, ED)]
    df = B.with_gamma(GAMMA_DF)
    if not models(df, xi_ed(theta)):
        raise ContractError("structure violates the diagonal-witness axioms")
    if phi is not None and not models(df, phi):
        raise ContractError("structure does not satisfy the given sentence")
    pi = {B.value(e, 1): B.value(e, 2) for e in sorted(B.elements_with(ED))}
    moved = permute_values(B, pi, 1)
    keep = [e for e in moved.ids if ED not in moved.labels_of(e)]
    A = moved.restrict(keep).with_signature(Signature(tuple(s for s in B.sigma if s != ED), 2, B.gamma))
    if not is_eq_respecting(A):
        raise ContractError("diagonalization did not produce an eq-respecting structure")
    if phi is not None and not models(add_diagonal(A).with_gamma(GAMMA_DF), phi):
        raise ContractError("diagonalized structure lost the sentence")
    return A


def strip_ed_translate(phi: Formula) -> Formula:
    """Relativize every quantifier to elements without ``Ed``."""
    if isinstance(phi, Rel):
        raise FragmentError(f"relation atom {phi} in a relation-free formula")
    if isinstance(phi, Exists):
        return Exists(phi.var, conj(neg(Pred(ED, phi.var)), strip_ed_translate(phi.body)))
    if isinstance(phi, Forall):
        return Forall(phi.var, disj(Pred(ED, phi.var), strip_ed_translate(phi.body)))
    if isinstance(phi, AtLeast):
        return AtLeast(phi.k, phi.var, conj(neg(Pred(ED, phi.var)), strip_ed_translate(phi.body)))
    if isinstance(phi, Not):
        return neg(strip_ed_translate(phi.body))
    if isinstance(phi, And):
        return conj(strip_ed_translate(a) for a in phi.args)
    if isinstance(phi, Or):
        return disj(strip_ed_translate(a) for a in phi.args)
    if isinstance(phi, Local):
        raise FragmentError("local modality in a relation-free formula")
    return phi


# ---------------------------------------------------------------- step 4 labels


def gamma_name(i: int) -> str:
    return f"Gamma{i}"


def alpha_name(i: int, j: int) -> str:
    """Intersection size index ``i``, intersection index ``j``."""
    return f"Alpha{i}_{j}"


def beta_name(i: int, j: int) -> str:
    return f"Beta{i}_{j}"


def lambda_names(M: int) -> list[str]:
    out = [gamma_name(i) for i in range(1, M + 1)]
    out += [alpha_name(i, j) for i in range(1, M + 1) for j in range(1, M + 3)]
    out += [beta_name(i, j) for i in range(1, M + 1) for j in range(1, M + 2)]
    return out


def intersections(A: DataStructure, sigma: Sequence[str]) -> dict[tuple, list[int]]:
    """Non-``Ed`` elements grouped by (labels in sigma, first value, second value)."""
    keep = set(sigma)
    out: dict[tuple, list[int]] = {}
    for p, (ls, vs) in enumerate(zip(A.labels, A.values)):
        if ED in ls:
            continue
        out.setdefault((ls & keep, vs[0], vs[1]), []).append(p)
    return out


def lambda_label(A: DataStructure, M: int, sigma: Sequence[str], check: bool = True) -> DataStructure:
    """Add the counting labels to a well-typed structure.

    Inside an intersection elements are ranked in structure order
    (``Gamma``, capped at M). Intersections that share labels and the first
    (second) value are ranked by their other value and then by smallest
    member; that rank is the ``Alpha`` (``Beta``) index ``j``, capped at
    M+2 (M+1). Index ``i`` is the intersection size capped at M.
    """
    if M < 1:
        raise ArgumentError("M must be >= 1")
    sigma = tuple(sigma)
    if check and not is_well_typed(A, M, sigma):
        raise ContractError("input structure is not well-typed")
    names = lambda_names(M)
    clash = set(names) & set(A.sigma)
    if clash:
        raise ArgumentError(f"label names {sorted(clash)[:3]} already used")
    inter = intersections(A, sigma)
    extra: dict[int, set[str]] = {p: set() for p in range(len(A))}
    for members in inter.values():
        for rank, p in enumerate(members, 1):
            extra[p].add(gamma_name(min(rank, M)))
    for field_idx, cap, namer in ((0, M + 2, alpha_name), (1, M + 1, beta_name)):
        groups: dict[tuple, list[tuple]] = {}
        for (ls, v1, v2), members in inter.items():
            shared = (v1, v2)[field_idx]
            other = (v1, v2)[1 - field_idx]
            groups.setdefault((ls, shared), []).append((other, min(members), members))
        for items in groups.values():
            items.sort()
            for rank, (_, _, members) in enumerate(items, 1):
                i = min(len(members), M)
                for p in members:
                    extra[p].add(namer(i, min(rank, cap)))
    labels = tuple(ls | extra[p] for p, ls in enumerate(A.labels))
    sig = Signature(A.sigma + tuple(names), 2, A.gamma)
    return DataStructure(sig, A.ids, tuple(labels), A.values)


def _same(sigma: Sequence[str], x: str = "x", y: str = "y") -> Formula:
    return conj(iff(Pred(s, x), Pred(s, y)) for s in sigma)


def _same_int(sigma: Sequence[str], x: str = "x", y: str = "y") -> Formula:
    return conj(Rel(1, 1, x, y), Rel(2, 2, x, y), _same(sigma, x, y))


def _type(U: Iterable[str], sigma: Sequence[str], v: str) -> Formula:
    U = set(U)
    return conj(Pred(s, v) if s in U else Not(Pred(s, v)) for s in sigma)


def _guard(labels: list[str], body: Formula) -> Formula:
    x = "x"
    return Forall(
        x,
        conj(
            implies(neg(Pred(ED, x)), body),
            implies(Pred(ED, x), conj(neg(Pred(n, x)) for n in labels)),
        ),
    )


def build_phi_gamma(M: int, sigma: Sequence[str]) -> Formula:
    if M < 1:
        raise ArgumentError("M must be >= 1")
    x, y = "x", "y"
    g = [None] + [gamma_name(i) for i in range(1, M + 1)]
    si = _same_int(sigma)
    one = exactly_one([Pred(g[i], x) for i in range(1, M + 1)])
    unique = conj(
        implies(Pred(g[i], x), neg(Exists(y, conj(neq(x, y), si, Pred(g[i], y)))))
        for i in range(1, M)
    )
    below = conj(
        implies(Pred(g[i], x), Exists(y, conj(si, Pred(g[i - 1], y)))) for i in range(2, M + 1)
    )
    return _guard(g[1:], conj(one, unique, below))


def _build_intersection_counter(M: int, sigma: Sequence[str], kind: str) -> Formula:
    x, y = "x", "y"
    if kind == "alpha":
        top, name, share, other = M + 2, alpha_name, Rel(1, 1, x, y), Rel(2, 2, x, y)
    else:
        top, name, share, other = M + 1, beta_name, Rel(2, 2, x, y), Rel(1, 1, x, y)
    same = _same(sigma)
    si = _same_int(sigma)
    I = range(1, M + 1)
    J = range(1, top + 1)
    preds = [Pred(name(i, j), x) for i in I for j in J]
    p1 = exactly_one(preds)
    p2 = conj(
        implies(
            Pred(name(i, j), x),
            Forall(y, implies(conj(neg(Pred(ED, y)), si), Pred(name(i, j), y))),
        )
        for i in I
        for j in J
    )
    p3 = conj(
        [
            implies(
                Pred(name(i, j), x),
                conj(
                    Exists(y, conj(si, Pred(gamma_name(i), y))),
                    neg(Exists(y, conj(si, Pred(gamma_name(i + 1), y)))),
                ),
            )
            for i in range(1, M)
            for j in J
        ]
        + [implies(Pred(name(M, j), x), Exists(y, conj(si, Pred(gamma_name(M), y)))) for j in J]
    )
    p4 = conj(
        implies(
            Pred(name(i, j), x),
            Forall(
                y,
                implies(
                    conj(neg(Pred(ED, y)), same, share, neg(other)),
                    conj(neg(Pred(name(k, j), y)) for k in I),
                ),
            ),
        )
        for i in I
        for j in range(1, top)
    )
    p5 = conj(
        implies(
            Pred(name(i, j), x),
            Exists(y, conj(same, share, disj(Pred(name(k, j - 1), y) for k in I))),
        )
        for i in I
        for j in range(2, top + 1)
    )
    return _guard([name(i, j) for i in I for j in J], conj(p1, p2, p3, p4, p5))


def build_phi_alpha(M: int, sigma: Sequence[str]) -> Formula:
    if M < 1:
        raise ArgumentError("M must be >= 1")
    return _build_intersection_counter(M, sigma, "alpha")


def build_phi_beta(M: int, sigma: Sequence[str]) -> Formula:
    if M < 1:
        raise ArgumentError("M must be >= 1")
    return _build_intersection_counter(M, sigma, "beta")


def s_family(kind: str, M: int, m: int, minimal: bool = False) -> list[tuple[tuple[int, int], ...]]:
    """Sets of (size index i, intersection index j) with strictly increasing
    j and sizes summing to at least ``m``.

    With ``minimal`` only inclusion-minimal sets are kept; the disjunction
    over them is equivalent because each set contributes a conjunction.
    """
    top = M + 2 if kind == "alpha" else M + 1
    out = []
    for k in range(1, top + 1):
        for js in combinations(range(1, top + 1), k):
            for iis in product(range(1, M + 1), repeat=k):
                total = sum(iis)
                if total < m:
                    continue
                if minimal and k > 1 and total - min(iis) >= m:
                    continue
                out.append(tuple(zip(iis, js)))
    return out


def phi_URm(c: CountingConstraint, M: int, sigma: Sequence[str], minimal: bool = True) -> Formula:
    """Two-variable definition of the counting constraint ``c`` at ``x``."""
    x, y = "x", "y"
    U, R, m = c.U, c.R, c.m
    eq = Pred(EQ, x)
    r11, r22 = Rel(1, 1, x, y), Rel(2, 2, x, y)
    tU = _type(U, sigma, y)
    if R == GAMMA_LOC1:
        return conj(eq, Exists(y, conj(tU, r11, r22, Pred(gamma_name(m), y))))
    if R == GAMMA_DF:
        return conj(neg(eq), Exists(y, conj(tU, r11, r22, Pred(gamma_name(m), y))))
    if R == {(1, 1), (1, 2)}:
        return conj(neg(eq), Exists(y, conj(tU, Pred(EQ, y), r11, Pred(gamma_name(m), y))))

    def family(kind: str, atom) -> Formula:
        namer = alpha_name if kind == "alpha" else beta_name
        return disj(
            conj(atom(namer(i, j)) for i, j in S) for S in s_family(kind, M, m, minimal)
        )

    if R == {(2, 2), (1, 2)}:
        return conj(
            eq,
            family("beta", lambda b: Exists(y, conj(tU, neg(Pred(EQ, y)), Pred(b, y), r22))),
        )
    if R == {(2, 2)}:
        return conj(
            neg(eq),
            family("beta", lambda b: Exists(y, conj(tU, Pred(b, y), neg(r11), r22))),
        )
    if R == {(1, 1)}:
        return family(
            "alpha", lambda a: Exists(y, conj(tU, Pred(a, y), neg(Pred(EQ, y)), r11, neg(r22)))
        )
    if R == {(1, 2)}:
        tUx = _type(U, sigma, x)
        inner = family(
            "beta",
            lambda b: Exists(x, conj(tUx, Pred(b, x), neg(Rel(1, 1, y, x)), Rel(2, 2, y, x))),
        )
        return conj(neg(eq), Exists(y, conj(Pred(ED, y), r11, inner)))
    raise ArgumentError(f"unsupported relation set {sorted(R)}")


def build_phi_cc(M: int, sigma: Sequence[str], minimal: bool = True) -> Formula:
    if M < 1:
        raise ArgumentError("M must be >= 1")
    x = "x"
    body = conj(iff(Pred(c.name, x), phi_URm(c, M, sigma, minimal)) for c in cc_family(sigma, M))
    return Forall(x, implies(neg(Pred(ED, x)), body))


# ---------------------------------------------------------------- step 5


@dataclass(frozen=True)
class PipelineResult:
    phi_hat: Formula
    M: int
    signature: Signature
    step1: Step1Result
    parts: dict = field(default_factory=dict, compare=False)

    @property
    def sigma(self) -> tuple[str, ...]:
        return self.step1.sigma


def pipeline_signature(sigma: Sequence[str], M: int) -> Signature:
    names = tuple(sigma) + (EQ, ED) + tuple(c.name for c in cc_family(sigma, M))
    if M >= 1:
        names += tuple(lambda_names(M))
    return Signature(names, 2, GAMMA_DF)


def full_pipeline(phi: Formula, sigma: Sequence[str] | None = None, minimal: bool = True) -> PipelineResult:
    """Sentence over unary predicates and ``~1:1``, ``~2:2`` that is
    satisfiable iff ``phi`` is. Each top-level conjunct is either
    relation-free or uses two variables."""
    s1 = step1_translate(phi, sigma)
    sigma, M = s1.sigma, s1.M
    sig = pipeline_signature(sigma, M)
    others = [s for s in sig.sigma if s not in (EQ, ED)]
    parts = {"chi": strip_ed_translate(s1.chi), "xi": xi_ed(others)}
    if M >= 1:
        parts["alpha"] = build_phi_alpha(M, sigma)
        parts["beta"] = build_phi_beta(M, sigma)
        parts["gamma"] = build_phi_gamma(M, sigma)
        parts["cc"] = build_phi_cc(M, sigma, minimal)
    phi_hat = conj(parts.values())
    require_fragment(phi_hat, FragmentSpec(EXT_TWO_VAR, sig))
    return PipelineResult(phi_hat, M, sig, s1, parts)


def pipeline_model(A: DataStructure, M: int, sigma: Sequence[str] | None = None) -> DataStructure:
    """The canonical model of the final sentence built from a plain structure."""
    sigma = tuple(A.sigma if sigma is None else sigma)
    wt = well_typed_expand(A, M, sigma)
    if M >= 1:
        wt = lambda_label(wt, M, sigma, check=False)
    return add_diagonal(wt).with_gamma(GAMMA_DF)


def pullback(B: DataStructure, phi_hat: Formula, sigma: Sequence[str]) -> DataStructure:
    """Plain structure over ``sigma`` from a model of the final sentence."""
    A = diagonalize_model(B, phi_hat)
    return A.project_labels(sigma).with_gamma(GAMMA_LOC1)


# ---------------------------------------------------------------- mirror case


def swap_fields(A: DataStructure) -> DataStructure:
    """Exchange the two values of every element (and mirror gamma)."""
    if A.d != 2:
        raise ArgumentError(f"needs d=2, got d={A.d}")
    gamma = frozenset((3 - i, 3 - j) for i, j in A.gamma)
    return DataStructure(
        Signature(A.sigma, 2, gamma), A.ids, A.labels, tuple((b, a) for a, b in A.values)
    )


def swap_formula(phi: Formula) -> Formula:
    """Exchange field indices 1 and 2 in every relation atom."""
    if isinstance(phi, Rel):
        return Rel(3 - phi.i, 3 - phi.j, phi.left, phi.right)
    if isinstance(phi, Not):
        return Not(swap_formula(phi.body))
    if isinstance(phi, (And, Or)):
        return type(phi)(tuple(swap_formula(a) for a in phi.args))
    if isinstance(phi, (Exists, Forall)):
        return type(phi)(phi.var, swap_formula(phi.body))
    if isinstance(phi, AtLeast):
        return AtLeast(phi.k, phi.var, swap_formula(phi.body))
    if isinstance(phi, Local):
        return Local(phi.var, phi.radius, swap_formula(phi.body))
    return phi


def normalize_gamma(phi: Formula, gamma: Iterable[Pair]) -> tuple[Formula, bool]:
    """Bring a formula over the mirrored relation set into the supported one.

    Returns the formula and whether fields were swapped.
    """
    gamma = frozenset(gamma)
    if gamma <= GAMMA_LOC1:
        return phi, False
    if gamma <= GAMMA_MIRROR:
        return swap_formula(phi), True
    raise ArgumentError(f"relation set {sorted(gamma)} is not supported by the radius-1 pipeline")
