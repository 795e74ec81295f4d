"""Existential local sentences reduced to logics with fewer data values.

For radius 2 and two values, fix witnesses ``a_1..a_n`` for the prefix
variables. Every element keeps its labels and gains ``U_p_i_j`` when its
value ``j`` equals value ``i`` of ``a_p``. Only one value survives: the one
not shared with any witness, if exactly one such value exists. Otherwise
a fresh value is used. The result is a structure with one data value.

For radius 1 and any number of values the same labels suffice and every
value is dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .core import ArgumentError, ContractError, DataStructure, Signature, full_gamma
from .evaluator import eval_formula
from .formula import (
    EXIST_LOCAL,
    FALSE,
    QF_LOCAL,
    And,
    AtLeast,
    Const,
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
    exists,
    forall,
    implies,
    neg,
    predicates,
    prenex_existential,
    require_fragment,
)

GAMMA_ONE = frozenset({(1, 1)})


def u_name(p: int, i: int, j: int) -> str:
    """Label for "value ``j`` of this element equals value ``i`` of anchor ``p``"."""
    return f"U_{p}_{i}_{j}"


def omega(n: int, d: int) -> list[str]:
    return [u_name(p, i, j) for p in range(1, n + 1) for i in range(1, d + 1) for j in range(1, d + 1)]


def anchor_vars(anchors: int | Sequence[str]) -> tuple[str, ...]:
    """Anchor variable names; an integer ``n`` stands for ``x1..xn``."""
    if isinstance(anchors, int):
        return tuple(f"x{p}" for p in range(1, anchors + 1))
    return tuple(anchors)


def _check_fresh(sigma: Sequence[str], n: int, d: int) -> None:
    clash = set(omega(n, d)) & set(sigma)
    if clash:
        raise ArgumentError(f"predicate names {sorted(clash)[:3]} are reserved for anchor labels")


@dataclass(frozen=True)
class AbstractionContext:
    anchors: tuple[str, ...]
    d: int

    def __post_init__(self):
        if len(self.anchors) < 1:
            raise ArgumentError("need at least one anchor")

    @property
    def n(self) -> int:
        return len(self.anchors)

    @property
    def predicates(self) -> list[str]:
        return omega(self.n, self.d)


def _u_labels(A: DataStructure, anchors: Sequence[str]) -> list[set[str]]:
    d = A.d
    av = [A.values_of(a) for a in anchors]
    out = []
    for vs in A.values:
        ls = set()
        for p, va in enumerate(av, 1):
            for i in range(d):
                for j in range(d):
                    if va[i] == vs[j]:
                        ls.add(u_name(p, i + 1, j + 1))
        out.append(ls)
    return out


def abstract2(A: DataStructure, anchors: Sequence[str]) -> DataStructure:
    """One-value abstraction of a two-value structure relative to ``anchors``."""
    if A.d != 2:
        raise ArgumentError(f"needs d=2, got d={A.d}")
    anchors = tuple(anchors)
    AbstractionContext(anchors, 2)
    for a in anchors:
        A.index(a)
    _check_fresh(A.sigma, len(anchors), 2)
    anchor_vals = {v for a in anchors for v in A.values_of(a)}
    fresh = max(v for vs in A.values for v in vs) + 1
    ulabels = _u_labels(A, anchors)
    values = []
    for v1, v2 in A.values:
        in1, in2 = v1 in anchor_vals, v2 in anchor_vals
        if in1 and not in2:
            values.append((v2,))
        elif in2 and not in1:
            values.append((v1,))
        else:
            values.append((fresh,))
            fresh += 1
    sig = Signature(A.sigma + tuple(omega(len(anchors), 2)), 1, GAMMA_ONE)
    labels = tuple(ls | u for ls, u in zip(A.labels, ulabels))
    return DataStructure(sig, A.ids, labels, tuple(values))


def abstract1(A: DataStructure, anchors: Sequence[str]) -> DataStructure:
    """Value-free abstraction of a d-value structure relative to ``anchors``."""
    if A.d < 1:
        raise ArgumentError("needs d >= 1")
    anchors = tuple(anchors)
    AbstractionContext(anchors, A.d)
    for a in anchors:
        A.index(a)
    _check_fresh(A.sigma, len(anchors), A.d)
    ulabels = _u_labels(A, anchors)
    sig = Signature(A.sigma + tuple(omega(len(anchors), A.d)), 0, frozenset())
    labels = tuple(ls | u for ls, u in zip(A.labels, ulabels))
    return DataStructure(sig, A.ids, labels, tuple(() for _ in A.ids))


# ---------------------------------------------------------------- ball tests


def _ball1(p: int, j: int, d: int, y: str) -> Formula:
    return disj(Pred(u_name(p, i, j), y) for i in range(1, d + 1))


def _ball_any(p: int, d: int, y: str) -> Formula:
    return disj(_ball1(p, j, d, y) for j in range(1, d + 1))


def _ring2(p: int, j: int, y: str) -> Formula:
    return conj(_ball_any(p, 2, y), neg(_ball1(p, j, 2, y)))


def rel_radius1_part(p: int, j: int, k: int, d: int, y: str, z: str) -> Formula:
    """Both fields sit next to the anchor and match through a common anchor value."""
    return conj(
        _ball1(p, j, d, y),
        _ball1(p, k, d, z),
        disj(conj(Pred(u_name(p, i, j), y), Pred(u_name(p, i, k), z)) for i in range(1, d + 1)),
    )


def rel_radius2_part(p: int, j: int, k: int, n: int, y: str, z: str) -> Formula:
    """Both fields sit at distance two; they match through the kept value or
    through a value of some other anchor."""
    via = disj(
        conj(Pred(u_name(q, l, j), y), Pred(u_name(q, l, k), z))
        for q in range(1, n + 1)
        for l in (1, 2)
    )
    return conj(_ring2(p, j, y), _ring2(p, k, z), disj(Rel(1, 1, y, z), via))


def rel_far_part(p: int, j: int, k: int, d: int, y: str, z: str) -> Formula:
    """Both fields outside the radius-1 ball: they got fresh values in the view,
    so only a field compared with itself matches."""
    if j != k:
        return FALSE
    return conj(neg(_ball1(p, j, d, y)), neg(_ball1(p, k, d, z)), Eq(y, z))


# ---------------------------------------------------------------- translations


def _translate_matrix(phi: Formula, anchors: Sequence[str], inner) -> Formula:
    index = {v: p for p, v in enumerate(anchors, 1)}

    def top(q: Formula) -> Formula:
        if isinstance(q, Local):
            if q.var not in index:
                raise FragmentError(f"local modality centred at {q.var}, which is not an anchor variable")
            return inner(q.body, index[q.var])
        if isinstance(q, Not):
            return neg(top(q.body))
        if isinstance(q, And):
            return conj(top(a) for a in q.args)
        if isinstance(q, Or):
            return disj(top(a) for a in q.args)
        if isinstance(q, (Eq, Const)):
            return q
        raise FragmentError(f"{q} is not allowed outside local modalities")

    return top(phi)


def _relativize(body: Formula, guard, rel) -> Formula:
    def go(q: Formula) -> Formula:
        if isinstance(q, Rel):
            return rel(q)
        if isinstance(q, Exists):
            return Exists(q.var, conj(guard(q.var), go(q.body)))
        if isinstance(q, Forall):
            return Forall(q.var, implies(guard(q.var), go(q.body)))
        if isinstance(q, AtLeast):
            return AtLeast(q.k, q.var, conj(guard(q.var), go(q.body)))
        if isinstance(q, Not):
            return neg(go(q.body))
        if isinstance(q, And):
            return conj(go(a) for a in q.args)
        if isinstance(q, Or):
            return disj(go(a) for a in q.args)
        if isinstance(q, Local):
            raise FragmentError("nested local modality")
        return q

    return go(body)


def translate2(phi_qf: Formula, anchors: int | Sequence[str]) -> Formula:
    """Translate a quantifier-free radius-2 matrix over anchor variables into
    a one-value formula over the anchor labels."""
    anchors = anchor_vars(anchors)
    n = len(anchors)

    def inner(body: Formula, p: int) -> Formula:
        return _relativize(
            body,
            lambda v: _ball_any(p, 2, v),
            lambda r: disj(
                rel_radius1_part(p, r.i, r.j, 2, r.left, r.right),
                rel_radius2_part(p, r.i, r.j, n, r.left, r.right),
            ),
        )

    return _translate_matrix(phi_qf, anchors, inner)


def translate1(phi_qf: Formula, anchors: int | Sequence[str], d: int) -> Formula:
    """Translate a quantifier-free radius-1 matrix into a value-free formula."""
    anchors = anchor_vars(anchors)

    def inner(body: Formula, p: int) -> Formula:
        return _relativize(
            body,
            lambda v: _ball_any(p, d, v),
            lambda r: disj(
                rel_radius1_part(p, r.i, r.j, d, r.left, r.right),
                rel_far_part(p, r.i, r.j, d, r.left, r.right),
            ),
        )

    return _translate_matrix(phi_qf, anchors, inner)


def _tran(n: int, d: int) -> Formula:
    y, z = "y", "z"
    R = range(1, d + 1)
    body = conj(
        implies(
            conj(Pred(u_name(p, i, j), y), Pred(u_name(p, i, l), z), Pred(u_name(q, k, j), y)),
            Pred(u_name(q, k, l), z),
        )
        for p in range(1, n + 1)
        for q in range(1, n + 1)
        for i in R
        for j in R
        for k in R
        for l in R
    )
    return forall([y, z], body)


def _refl(anchors: Sequence[str], d: int) -> Formula:
    return conj(
        Pred(u_name(p, i, i), x) for p, x in enumerate(anchors, 1) for i in range(1, d + 1)
    )


def wf_formula2(anchors: int | Sequence[str]) -> Formula:
    """Transitivity, reflexivity and uniqueness of kept values."""
    anchors = anchor_vars(anchors)
    n = len(anchors)
    if n < 1:
        raise ArgumentError("need at least one anchor")
    y, z = "y", "z"
    covered = [
        disj(Pred(u_name(p, i, j), y) for p in range(1, n + 1) for i in (1, 2)) for j in (1, 2)
    ]
    both = conj(covered)
    none = conj(neg(c) for c in covered)
    uniq = Forall(y, implies(disj(both, none), Forall(z, implies(Rel(1, 1, y, z), Eq(y, z)))))
    return conj(_tran(n, 2), _refl(anchors, 2), uniq)


def wf_formula1(anchors: int | Sequence[str], d: int) -> Formula:
    anchors = anchor_vars(anchors)
    n = len(anchors)
    if n < 1:
        raise ArgumentError("need at least one anchor")
    return conj(_tran(n, d), _refl(anchors, d))


# ---------------------------------------------------------------- concretization


def _anchor_values(B: DataStructure, anchors: Sequence[str], d: int, start: int) -> dict[tuple[int, int], int]:
    """Values for anchor fields: (p, i) and (q, j) share a value iff
    ``a_q`` carries ``U_p_i_j``."""
    n = len(anchors)
    keys = [(p, i) for p in range(1, n + 1) for i in range(1, d + 1)]
    parent = {k: k for k in keys}

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    for p, i in keys:
        for q, a_q in enumerate(anchors, 1):
            for j in range(1, d + 1):
                if u_name(p, i, j) in B.labels_of(a_q):
                    parent[find((p, i))] = find((q, j))
    out: dict[tuple[int, int], int] = {}
    roots: dict = {}
    for k in keys:
        r = find(k)
        if r not in roots:
            roots[r] = start + len(roots)
        out[k] = roots[r]
    for p, i in keys:
        for q, a_q in enumerate(anchors, 1):
            for j in range(1, d + 1):
                has = u_name(p, i, j) in B.labels_of(a_q)
                if has != (out[(p, i)] == out[(q, j)]):
                    raise ContractError("anchor labels are not consistent")
    return out


def _wf_holds(B: DataStructure, anchors: Sequence[str], wf: Formula) -> bool:
    names = [f"x{p}" for p in range(1, len(anchors) + 1)]
    I = dict(zip(names, anchors))
    return eval_formula(B, I, wf)


def concretize2(B: DataStructure, anchors: Sequence[str], sigma: Sequence[str] | None = None) -> DataStructure:
    """Two-value structure whose abstraction relative to ``anchors`` has the
    same labels and the same value equalities as ``B``."""
    if B.d != 1:
        raise ArgumentError(f"needs d=1, got d={B.d}")
    anchors = tuple(anchors)
    n = len(anchors)
    names = [f"x{p}" for p in range(1, n + 1)]
    if not _wf_holds(B, anchors, wf_formula2(names)):
        raise ContractError("structure is not well formed for these anchors")
    if sigma is None:
        sigma = [s for s in B.sigma if s not in set(omega(n, 2))]
    top_f = max(vs[0] for vs in B.values)
    g = _anchor_values(B, anchors, 2, top_f + 1)
    d_out = max(list(g.values()) + [top_f]) + 1
    values = []
    for ls, (f,) in zip(B.labels, B.values):
        row = []
        for j in (1, 2):
            hit = [(p, i) for p in range(1, n + 1) for i in (1, 2) if u_name(p, i, j) in ls]
            other = [(p, i) for p in range(1, n + 1) for i in (1, 2) if u_name(p, i, 3 - j) in ls]
            if hit:
                row.append(g[hit[0]])
            elif other:
                row.append(f)
            else:
                row.append(d_out)
        values.append(tuple(row))
    keep = set(sigma)
    A = DataStructure(
        Signature(tuple(sigma), 2, full_gamma(2)),
        B.ids,
        tuple(ls & keep for ls in B.labels),
        tuple(values),
    )
    back = abstract2(A, anchors)
    if not abstraction_equivalent(back, B):
        raise ContractError("concretization does not abstract back to the input")
    return A


def concretize1(B: DataStructure, anchors: Sequence[str], d: int, sigma: Sequence[str] | None = None) -> DataStructure:
    """d-value structure whose value-free abstraction equals ``B``. Fields
    not tied to an anchor get pairwise distinct fresh values."""
    if d < 1:
        raise ArgumentError("needs d >= 1")
    anchors = tuple(anchors)
    n = len(anchors)
    names = [f"x{p}" for p in range(1, n + 1)]
    if not _wf_holds(B, anchors, wf_formula1(names, d)):
        raise ContractError("structure is not well formed for these anchors")
    if sigma is None:
        sigma = [s for s in B.sigma if s not in set(omega(n, d))]
    g = _anchor_values(B, anchors, d, 1)
    fresh = max(g.values()) + 1
    values = []
    for ls in B.labels:
        row = []
        for j in range(1, d + 1):
            hit = [(p, i) for p in range(1, n + 1) for i in range(1, d + 1) if u_name(p, i, j) in ls]
            if hit:
                row.append(g[hit[0]])
            else:
                row.append(fresh)
                fresh += 1
        values.append(tuple(row))
    keep = set(sigma)
    A = DataStructure(
        Signature(tuple(sigma), d, full_gamma(d)),
        B.ids,
        tuple(ls & keep for ls in B.labels),
        tuple(values),
    )
    if abstract1(A, anchors).labels != B.labels:
        raise ContractError("concretization does not abstract back to the input")
    return A


def abstraction_equivalent(B1: DataStructure, B2: DataStructure) -> bool:
    """Same ids, same labels, and the same equalities between kept values."""
    if B1.ids != B2.ids or B1.labels != B2.labels or B1.d != B2.d:
        return False
    n = len(B1)
    for b in range(n):
        for c in range(n):
            for j in range(B1.d):
                for k in range(B1.d):
                    same1 = B1.values[b][j] == B1.values[c][k]
                    same2 = B2.values[b][j] == B2.values[c][k]
                    if same1 != same2:
                        return False
    return True


# ---------------------------------------------------------------- full reductions


@dataclass(frozen=True)
class ExistReduction:
    psi: Formula
    anchors: tuple[str, ...]
    matrix: Formula
    signature: Signature


def reduce_exist2(phi: Formula, sigma: Sequence[str] | None = None) -> ExistReduction:
    """One-value sentence satisfiable over exactly the universe sizes where
    the radius-2 existential sentence ``phi`` is."""
    if sigma is None:
        sigma = sorted(predicates(phi))
    sig = Signature(tuple(sigma), 2, full_gamma(2))
    require_fragment(phi, FragmentSpec(EXIST_LOCAL, sig, 2))
    vars_, matrix = prenex_existential(phi)
    require_fragment(matrix, FragmentSpec(QF_LOCAL, sig, 2))
    n = len(vars_)
    _check_fresh(sigma, max(n, 1), 2)
    out_sig = Signature(tuple(sigma) + tuple(omega(n, 2)), 1, GAMMA_ONE)
    if n == 0:
        psi = _translate_matrix(matrix, (), lambda b, p: b)
        return ExistReduction(psi, (), matrix, out_sig)
    body = conj(translate2(matrix, vars_), wf_formula2(vars_))
    return ExistReduction(exists(vars_, body), tuple(vars_), matrix, out_sig)


def reduce_exist1(phi: Formula, d: int, sigma: Sequence[str] | None = None) -> ExistReduction:
    """Value-free sentence satisfiable over exactly the universe sizes where
    the radius-1 existential sentence ``phi`` (d values) is."""
    if d < 1:
        raise ArgumentError("needs d >= 1")
    if sigma is None:
        sigma = sorted(predicates(phi))
    sig = Signature(tuple(sigma), d, full_gamma(d))
    require_fragment(phi, FragmentSpec(EXIST_LOCAL, sig, 1))
    vars_, matrix = prenex_existential(phi)
    require_fragment(matrix, FragmentSpec(QF_LOCAL, sig, 1))
    n = len(vars_)
    _check_fresh(sigma, max(n, 1), d)
    out_sig = Signature(tuple(sigma) + tuple(omega(n, d)), 0, frozenset())
    if n == 0:
        psi = _translate_matrix(matrix, (), lambda b, p: b)
        return ExistReduction(psi, (), matrix, out_sig)
    body = conj(translate1(matrix, vars_, d), wf_formula1(vars_, d))
    return ExistReduction(exists(vars_, body), tuple(vars_), matrix, out_sig)


# ---------------------------------------------------------------- view predictions


def predict_view_relation2(B: DataStructure, p: int, n: int, b: str, j: int, c: str, k: int) -> bool | None:
    """Truth of ``b ~j:k c`` inside the radius-2 view of anchor ``p``, read
    off the abstraction ``B`` alone; ``None`` when a field lies outside the ball."""
    lb, lc = B.labels_of(b), B.labels_of(c)

    def in1(ls, f):
        return any(u_name(p, i, f) in ls for i in (1, 2))

    def in2(ls):
        return in1(ls, 1) or in1(ls, 2)

    if not (in2(lb) and in2(lc)):
        return None
    if in1(lb, j) and in1(lc, k):
        return any(u_name(p, i, j) in lb and u_name(p, i, k) in lc for i in (1, 2))
    if in1(lb, j) != in1(lc, k):
        return False
    if B.value(b, 1) == B.value(c, 1):
        return True
    return any(
        u_name(q, l, j) in lb and u_name(q, l, k) in lc for q in range(1, n + 1) for l in (1, 2)
    )


def predict_view_relation1(B: DataStructure, p: int, d: int, b: str, j: int, c: str, k: int) -> bool | None:
    """Truth of ``b ~j:k c`` inside the radius-1 view of anchor ``p``, read
    off the value-free abstraction; ``None`` when an element is outside the view."""
    lb, lc = B.labels_of(b), B.labels_of(c)

    def in1(ls, f):
        return any(u_name(p, i, f) in ls for i in range(1, d + 1))

    def inview(ls):
        return any(in1(ls, f) for f in range(1, d + 1))

    if not (inview(lb) and inview(lc)):
        return None
    if in1(lb, j) and in1(lc, k):
        return any(u_name(p, i, j) in lb and u_name(p, i, k) in lc for i in range(1, d + 1))
    if in1(lb, j) != in1(lc, k):
        return False
    return b == c and j == k
