"""Satisfiability by bounded model search, a complete procedure for
formulas over unary predicates, and front ends that go through the
reductions before searching."""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .core import (
    ContractError,
    DataStructure,
    Signature,
    all_label_sets,
    canonical_key,
    full_gamma,
)
from .evaluator import eval_formula, models
from .existred import (
    ExistReduction,
    concretize1,
    concretize2,
    reduce_exist1,
    reduce_exist2,
    translate1,
    translate2,
    wf_formula1,
    wf_formula2,
)
from .formula import (
    FALSE,
    LOCAL,
    TRUE,
    And,
    AtLeast,
    Const,
    Eq,
    Exists,
    Forall,
    Formula,
    FragmentError,
    FragmentSpec,
    Not,
    Or,
    Pred,
    Rel,
    conj,
    disj,
    expand_sugar,
    free_vars,
    neg,
    neq,
    predicates,
    quantifier_rank,
    rel_pairs,
    require_fragment,
    subformulas,
)
from .localred import GAMMA_LOC1, full_pipeline, pipeline_model, pullback
from .normalform import specialise_type, substitute_var

SAT = "SAT"
UNSAT = "UNSAT"
UNSAT_WITHIN = "UNSAT_WITHIN"
UNKNOWN = "UNKNOWN"


@dataclass
class SatVerdict:
    status: str
    witness: DataStructure | None = None
    bound: int | None = None
    note: str = ""
    stats: dict = field(default_factory=dict)

    @property
    def is_sat(self) -> bool:
        return self.status == SAT

    @property
    def exit_code(self) -> int:
        return {SAT: 0, UNSAT: 1}.get(self.status, 2)

    def __str__(self) -> str:
        if self.status == SAT:
            return f"SAT (witness of size {len(self.witness)})"
        if self.status == UNSAT:
            return "UNSAT (complete)"
        return f"{self.status} (bound {self.bound})"


# ---------------------------------------------------------------- enumeration


def _restricted_growth(length: int, limit: int) -> Iterator[tuple[int, ...]]:
    """Value sequences where each new value is one more than the largest
    seen so far; every sequence up to renaming appears exactly once."""

    def go(prefix: list[int], top: int):
        if len(prefix) == length:
            yield tuple(prefix)
            return
        for v in range(1, min(top + 1, limit) + 1):
            prefix.append(v)
            yield from go(prefix, max(top, v))
            prefix.pop()

    yield from go([], 0)


def enumerate_structures(sig: Signature, size: int, value_bound: int | None = None) -> Iterator[DataStructure]:
    """All structures of exactly ``size`` elements up to isomorphism, values
    in ``1..value_bound`` (default ``size * d``), in a deterministic order."""
    if size < 1:
        raise ValueError("size must be >= 1")
    d = sig.d
    vb = size * d if value_bound is None else value_bound
    label_sets = sorted(all_label_sets(sig.sigma), key=lambda s: sorted(s))
    ids = tuple(f"e{k + 1}" for k in range(size))
    seen: set = set()
    for labels in itertools.combinations_with_replacement(label_sets, size):
        for flat in _restricted_growth(size * d, max(vb, 0) if d else 0):
            values = tuple(tuple(flat[k * d:(k + 1) * d]) for k in range(size))
            A = DataStructure(sig, ids, labels, values)
            key = canonical_key(A)
            if key in seen:
                continue
            seen.add(key)
            yield A


def _infer_signature(phi: Formula, signature: Signature | None, d: int | None) -> Signature:
    if signature is not None:
        return signature
    pairs = rel_pairs(phi)
    if d is None:
        d = max((max(i, j) for i, j in pairs), default=0)
    return Signature(tuple(sorted(predicates(phi))), d, full_gamma(d))


def bounded_sat(
    phi: Formula,
    max_size: int,
    value_bound: int | None = None,
    signature: Signature | None = None,
    d: int | None = None,
    min_size: int = 1,
) -> SatVerdict:
    """First model (by size, then canonical order) of at most ``max_size``
    elements, or ``UNSAT_WITHIN``."""
    if free_vars(phi):
        raise FragmentError(f"not a sentence, free variables {sorted(free_vars(phi))}")
    sig = _infer_signature(phi, signature, d)
    t0 = time.perf_counter()
    checked = 0
    for s in range(min_size, max_size + 1):
        vb = value_bound if value_bound is not None else s * sig.d
        for A in enumerate_structures(sig, s, vb):
            checked += 1
            if models(A, phi):
                return SatVerdict(SAT, A, max_size, stats={"checked": checked, "seconds": time.perf_counter() - t0})
    return SatVerdict(UNSAT_WITHIN, None, max_size, stats={"checked": checked, "seconds": time.perf_counter() - t0})


# ---------------------------------------------------------------- monadic


def monadic_bound(phi: Formula, sigma: Sequence[str]) -> int:
    """Small-model bound: quantifier rank times the number of label types."""
    return max(1, quantifier_rank(phi)) * 2 ** len(sigma)


class _MonadicQE:
    """Quantifier elimination for formulas over unary predicates.

    Quantifiers are pushed inward first; a remaining ``exists y`` is split
    only on the predicates applied to ``y`` in its scope. The result is a
    Boolean combination of closed atoms "at least k elements satisfy L",
    where L is any quantifier-free formula in one variable. Atoms are
    identified by k and the set of label types satisfying L.
    """

    def __init__(self, sigma: Sequence[str]):
        self.sigma = tuple(sigma)
        self.types = all_label_sets(self.sigma)
        self.atoms: dict[tuple[int, frozenset[int]], AtLeast] = {}
        self.key_of: dict[AtLeast, tuple[int, frozenset[int]]] = {}

    def extension(self, L: Formula, var: str) -> frozenset[int]:
        out = set()
        for t, U in enumerate(self.types):
            v = specialise_type(L, var, U)
            if not isinstance(v, Const):
                raise ContractError(f"threshold body {L} mentions other variables")
            if v.value:
                out.add(t)
        return frozenset(out)

    def atom(self, k: int, L: Formula, var: str) -> Formula:
        ext = self.extension(L, var)
        if not ext:
            return FALSE
        key = (k, ext)
        node = self.atoms.get(key)
        if node is None:
            node = AtLeast(k, var, L)
            self.atoms[key] = node
            self.key_of[node] = key
        return node

    def run(self, p: Formula) -> Formula:
        if isinstance(p, Eq):
            return TRUE if p.left == p.right else p
        if isinstance(p, (Pred, Const)):
            return p
        if isinstance(p, Not):
            return neg(self.run(p.body))
        if isinstance(p, And):
            return conj(self.run(a) for a in p.args)
        if isinstance(p, Or):
            return disj(self.run(a) for a in p.args)
        if isinstance(p, Exists):
            return self.exists(p.var, _nnf(self.run(p.body)))
        if isinstance(p, Forall):
            return neg(self.exists(p.var, _nnf(neg(self.run(p.body)))))
        if isinstance(p, Rel):
            raise FragmentError(f"relation atom {p} in a formula over unary predicates")
        raise FragmentError(f"unexpected node {p!r} in a formula over unary predicates")

    def exists(self, y: str, chi: Formula) -> Formula:
        if y not in free_vars(chi):
            return chi
        if isinstance(chi, Or):
            return disj(self.exists(y, a) for a in chi.args)
        if isinstance(chi, And):
            inside = [a for a in chi.args if y in free_vars(a)]
            outside = [a for a in chi.args if y not in free_vars(a)]
            if outside:
                return conj(conj(outside), self.exists(y, conj(inside)))
            if len(inside) == 1:
                return self.exists(y, inside[0])
        return self.split(y, chi)

    def split(self, y: str, chi: Formula) -> Formula:
        outer = sorted(free_vars(chi) - {y})
        cases = [substitute_var(chi, y, z) for z in outer]
        groups: dict[Formula, list[Formula]] = {}

        def expand(p: Formula, fixed: list[Formula]) -> None:
            if p == FALSE:
                return
            names = sorted({q.name for q in subformulas(p) if isinstance(q, Pred) and q.var == y})
            if not names:
                body = specialise_type(p, y, frozenset())
                if body != FALSE:
                    groups.setdefault(body, []).append(conj(fixed))
                return
            atom = Pred(names[0], y)
            expand(_assign_pred(p, atom, True), fixed + [atom])
            expand(_assign_pred(p, atom, False), fixed + [Not(atom)])

        expand(chi, [])
        for body, Ls in groups.items():
            cases.append(conj(body, self.fresh_witness(disj(Ls), y, outer)))
        return disj(cases)

    def fresh_witness(self, L: Formula, y: str, outer: list[str]) -> Formula:
        """Some element satisfying L differs from every variable in ``outer``."""
        parts = [self.atom(1, L, y)]
        for k in range(1, len(outer) + 1):
            options = []
            for group in itertools.combinations(outer, k):
                sat = [substitute_var(L, y, z) for z in group]
                apart = [neq(a, b) for a, b in itertools.combinations(group, 2)]
                options.append(conj(sat + apart))
            parts.append(disj(neg(disj(options)), self.atom(k + 1, L, y)))
        return conj(parts)


def _assign_pred(p: Formula, atom: Pred, value: bool) -> Formula:
    if p == atom:
        return Const(value)
    if isinstance(p, Not):
        return neg(_assign_pred(p.body, atom, value))
    if isinstance(p, And):
        return conj(_assign_pred(a, atom, value) for a in p.args)
    if isinstance(p, Or):
        return disj(_assign_pred(a, atom, value) for a in p.args)
    return p


def _nnf(p: Formula) -> Formula:
    """Push negations onto literals of a quantifier-free formula."""
    if isinstance(p, Not):
        b = p.body
        if isinstance(b, And):
            return disj(_nnf(neg(a)) for a in b.args)
        if isinstance(b, Or):
            return conj(_nnf(neg(a)) for a in b.args)
        if isinstance(b, Not):
            return _nnf(b.body)
        return p
    if isinstance(p, And):
        return conj(_nnf(a) for a in p.args)
    if isinstance(p, Or):
        return disj(_nnf(a) for a in p.args)
    return p


class _CountSearch:
    """Backtracking over element counts per region, where a region is a set
    of label types no atom can tell apart. Counts above the largest
    threshold never change an atom, so each count ranges over 0..K."""

    def __init__(self, formula: Formula, qe: _MonadicQE, cap: int):
        self.formula = formula
        self.cap = cap
        self.nodes = 0
        atoms = sorted({n for n in subformulas(formula) if isinstance(n, AtLeast)}, key=lambda n: qe.key_of[n])
        by_sig: dict[tuple, list[int]] = {}
        for t in range(len(qe.types)):
            by_sig.setdefault(tuple(t in qe.key_of[n][1] for n in atoms), []).append(t)
        self.regions = sorted(by_sig.values(), key=lambda ts: (-sum(1 for n in atoms if ts[0] in qe.key_of[n][1]), ts[0]))
        self.K = max([qe.key_of[n][0] for n in atoms], default=1)
        self.members = {
            n: [r for r, ts in enumerate(self.regions) if ts[0] in qe.key_of[n][1]] for n in atoms
        }
        self.k = {n: qe.key_of[n][0] for n in atoms}

    def atom_values(self, counts: list[int | None]) -> dict[AtLeast, bool | None]:
        out = {}
        for n, rs in self.members.items():
            lo = sum(counts[r] or 0 for r in rs)
            if lo >= self.k[n]:
                out[n] = True
            elif lo + self.K * sum(1 for r in rs if counts[r] is None) < self.k[n]:
                out[n] = False
            else:
                out[n] = None
        return out

    def value(self, p: Formula, atoms: dict) -> bool | None:
        if isinstance(p, Const):
            return p.value
        if isinstance(p, AtLeast):
            return atoms[p]
        if isinstance(p, Not):
            v = self.value(p.body, atoms)
            return None if v is None else not v
        if isinstance(p, (And, Or)):
            want = isinstance(p, Or)
            unknown = False
            for a in p.args:
                v = self.value(a, atoms)
                if v is None:
                    unknown = True
                elif v is want:
                    return want
            return None if unknown else not want
        raise ContractError(f"unexpected node {p!r} after elimination")

    def run(self, counts: list[int | None], r: int) -> list[int] | None:
        self.nodes += 1
        if self.nodes > self.cap:
            raise _CapReached
        v = self.value(self.formula, self.atom_values(counts))
        if v is False:
            return None
        if v is True:
            return [c or 0 for c in counts]
        for c in range(self.K + 1):
            counts[r] = c
            got = self.run(counts, r + 1)
            if got is not None:
                return got
        counts[r] = None
        return None


class _CapReached(Exception):
    pass


def monadic_sat(phi: Formula, sigma: Sequence[str] | None = None, cap: int = 200_000) -> SatVerdict:
    """Complete decision for sentences without relation atoms.

    Quantifiers are eliminated into a Boolean combination of "at least k
    elements satisfy L"; a search over per-region counts then finds a
    model or shows there is none. The model found is re-checked. More
    than ``cap`` search nodes gives ``UNKNOWN``.
    """
    if any(isinstance(p, Rel) for p in subformulas(phi)):
        raise FragmentError("relation atom in a formula over unary predicates")
    if free_vars(phi):
        raise FragmentError(f"not a sentence, free variables {sorted(free_vars(phi))}")
    sigma = tuple(sorted(predicates(phi))) if sigma is None else tuple(sigma)
    B = monadic_bound(phi, sigma)
    t0 = time.perf_counter()
    qe = _MonadicQE(sigma)
    body = conj(qe.run(expand_sugar(phi)), qe.atom(1, TRUE, "y"))
    search = _CountSearch(body, qe, cap)
    stats = {"bound": B, "atoms": len(search.members), "regions": len(search.regions)}
    try:
        counts = search.run([None] * len(search.regions), 0)
    except _CapReached:
        stats.update(nodes=search.nodes, seconds=time.perf_counter() - t0)
        return SatVerdict(UNKNOWN, None, B, note=f"search cap {cap} reached", stats=stats)
    stats.update(nodes=search.nodes, seconds=time.perf_counter() - t0)
    if counts is None:
        return SatVerdict(UNSAT, None, B, stats=stats)
    labels = [qe.types[ts[0]] for ts, c in zip(search.regions, counts) for _ in range(c)]
    A = DataStructure(
        Signature(sigma, 0, frozenset()),
        tuple(f"e{k + 1}" for k in range(len(labels))),
        tuple(labels),
        tuple(() for _ in labels),
    )
    if not models(A, phi):
        raise ContractError("count assignment does not yield a model")
    return SatVerdict(SAT, A, B, stats=stats)


# ---------------------------------------------------------------- front ends


def _find_anchors(B: DataStructure, red: ExistReduction, body: Formula) -> tuple[str, ...]:
    for combo in itertools.product(B.ids, repeat=len(red.anchors)):
        if eval_formula(B, dict(zip(red.anchors, combo)), body):
            return combo
    raise ContractError("witness of the reduced sentence has no anchor tuple")


def _recheck(A: DataStructure, phi: Formula) -> None:
    if not models(A, phi):
        raise ContractError("pulled-back witness does not satisfy the input sentence")


def sat_exist_local1(phi: Formula, d: int, sigma: Sequence[str] | None = None, cap: int = 200_000) -> SatVerdict:
    """Decide an existential radius-1 sentence via its value-free reduction."""
    sigma = sorted(predicates(phi)) if sigma is None else list(sigma)
    red = reduce_exist1(phi, d, sigma)
    v = monadic_sat(red.psi, cap=cap)
    v.stats["reduced_size"] = len(str(red.psi))
    if not v.is_sat:
        return v
    B = DataStructure(red.signature, v.witness.ids, v.witness.labels, v.witness.values)
    if not red.anchors:
        A = DataStructure(Signature(tuple(sigma), d, full_gamma(d)), B.ids, tuple(ls & set(sigma) for ls in B.labels), tuple(tuple(range(k * d + 1, k * d + d + 1)) for k in range(len(B))))
    else:
        body = conj(translate1(red.matrix, red.anchors, d), wf_formula1(red.anchors, d))
        anchors = _find_anchors(B, red, body)
        A = concretize1(B, anchors, d, sigma)
    _recheck(A, phi)
    return SatVerdict(SAT, A, v.bound, note="via value-free reduction", stats=dict(v.stats, reduced_witness=B))


def sat_exist_local2(
    phi: Formula, max_size: int, value_bound: int | None = None, sigma: Sequence[str] | None = None
) -> SatVerdict:
    """Search the one-value reduction of an existential radius-2 sentence.
    Never reports unsatisfiability as complete."""
    sigma = sorted(predicates(phi)) if sigma is None else list(sigma)
    red = reduce_exist2(phi, sigma)
    v = bounded_sat(red.psi, max_size, value_bound, signature=red.signature)
    if not v.is_sat:
        return SatVerdict(
            UNKNOWN,
            None,
            max_size,
            note="no model of the reduced sentence within the bound; the one-value target logic is not decided here",
            stats=v.stats,
        )
    B = v.witness
    if not red.anchors:
        A = DataStructure(Signature(tuple(sigma), 2, full_gamma(2)), B.ids, tuple(ls & set(sigma) for ls in B.labels), tuple((2 * k + 1, 2 * k + 2) for k in range(len(B))))
    else:
        body = conj(translate2(red.matrix, red.anchors), wf_formula2(red.anchors))
        anchors = _find_anchors(B, red, body)
        A = concretize2(B, anchors, sigma)
    _recheck(A, phi)
    return SatVerdict(SAT, A, max_size, note="via one-value reduction", stats=dict(v.stats, reduced_witness=B))


def sat_local1_pipeline(
    phi: Formula, max_size: int, value_bound: int | None = None, sigma: Sequence[str] | None = None
) -> SatVerdict:
    """Search for models of the two-variable sentence produced by the
    radius-1 pipeline, pulling any model back and re-checking it.

    Candidates for the final sentence are the canonical images of plain
    structures with at most ``max_size`` elements; a model of the final
    sentence found this way has ``|A| + |Vals(A)|`` elements.
    """
    if sigma is None:
        sigma = tuple(sorted(predicates(phi)))
    require_fragment(phi, FragmentSpec(LOCAL, Signature(tuple(sigma), 2, GAMMA_LOC1), 1))
    pipe = full_pipeline(phi, sigma)
    sig = Signature(tuple(sigma), 2, GAMMA_LOC1)
    t0 = time.perf_counter()
    checked = 0
    for s in range(1, max_size + 1):
        vb = value_bound if value_bound is not None else 2 * s
        for A in enumerate_structures(sig, s, vb):
            checked += 1
            B = pipeline_model(A, pipe.M, sigma)
            if models(B, pipe.phi_hat):
                W = pullback(B, pipe.phi_hat, sigma)
                _recheck(W, phi)
                return SatVerdict(
                    SAT,
                    W,
                    max_size,
                    note="via two-variable pipeline",
                    stats={"checked": checked, "target_size": len(B), "target_witness": B, "M": pipe.M,
                           "seconds": time.perf_counter() - t0},
                )
    return SatVerdict(
        UNKNOWN,
        None,
        max_size,
        note="no model of the two-variable sentence among canonical images within the bound",
        stats={"checked": checked, "M": pipe.M, "seconds": time.perf_counter() - t0},
    )


def sat_raw(phi: Formula, max_size: int, value_bound: int | None = None, signature: Signature | None = None) -> SatVerdict:
    return bounded_sat(phi, max_size, value_bound, signature=signature)
