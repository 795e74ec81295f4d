"""Formula trees for first-order logic over data structures, the local
modality and counting sugar, plus fragment classification.

``And``/``Or`` are n-ary (at least two arguments). Nodes hash structurally
and cache their hash, so large shared subformulas are cheap dictionary keys.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Iterable, Iterator, Sequence

from .core import LocfoError, Signature


class TypingError(LocfoError):
    """A formula mentions a predicate or field index its signature lacks."""


class FragmentError(LocfoError):
    """A formula lies outside the fragment an operation requires."""


class Formula:
    __slots__ = ()

    def __str__(self) -> str:
        from .syntax import print_formula

        return print_formula(self)

    def children(self) -> tuple["Formula", ...]:
        return ()


def _node(cls):
    cls = dataclass(frozen=True, repr=False)(cls)
    names = tuple(f.name for f in fields(cls))
    tag = cls.__name__

    def __hash__(self):
        h = self.__dict__.get("_h")
        if h is None:
            h = hash((tag,) + tuple(getattr(self, n) for n in names))
            object.__setattr__(self, "_h", h)
        return h

    def __repr__(self):
        return f"{tag}({', '.join(repr(getattr(self, n)) for n in names)})"

    cls.__hash__ = __hash__
    cls.__repr__ = __repr__
    return cls


@_node
class Const(Formula):
    value: bool


TRUE = Const(True)
FALSE = Const(False)


@_node
class Pred(Formula):
    name: str
    var: str


@_node
class Rel(Formula):
    i: int
    j: int
    left: str
    right: str


@_node
class Eq(Formula):
    left: str
    right: str


@_node
class Not(Formula):
    body: Formula

    def children(self):
        return (self.body,)


@_node
class And(Formula):
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        if len(self.args) < 2:
            raise ValueError("And needs at least two arguments")

    def children(self):
        return self.args


@_node
class Or(Formula):
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        if len(self.args) < 2:
            raise ValueError("Or needs at least two arguments")

    def children(self):
        return self.args


@_node
class Exists(Formula):
    var: str
    body: Formula

    def children(self):
        return (self.body,)


@_node
class Forall(Formula):
    var: str
    body: Formula

    def children(self):
        return (self.body,)


@_node
class Local(Formula):
    var: str
    radius: int
    body: Formula

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be >= 0")

    def children(self):
        return (self.body,)


@_node
class AtLeast(Formula):
    k: int
    var: str
    body: Formula

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("threshold must be >= 1")

    def children(self):
        return (self.body,)


# ---------------------------------------------------------------- builders


def conj(*parts: Formula | Iterable[Formula]) -> Formula:
    """Conjunction with flattening and constant folding."""
    out: list[Formula] = []
    for p in _flat_args(parts):
        if isinstance(p, And):
            out.extend(p.args)
        elif p == TRUE:
            continue
        elif p == FALSE:
            return FALSE
        else:
            out.append(p)
    out = _dedupe(out)
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return And(tuple(out))


def disj(*parts: Formula | Iterable[Formula]) -> Formula:
    """Disjunction with flattening and constant folding."""
    out: list[Formula] = []
    for p in _flat_args(parts):
        if isinstance(p, Or):
            out.extend(p.args)
        elif p == FALSE:
            continue
        elif p == TRUE:
            return TRUE
        else:
            out.append(p)
    out = _dedupe(out)
    if not out:
        return FALSE
    if len(out) == 1:
        return out[0]
    return Or(tuple(out))


def neg(p: Formula) -> Formula:
    if isinstance(p, Const):
        return Const(not p.value)
    if isinstance(p, Not):
        return p.body
    return Not(p)


def implies(a: Formula, b: Formula) -> Formula:
    return disj(neg(a), b)


def iff(a: Formula, b: Formula) -> Formula:
    return conj(implies(a, b), implies(b, a))


def neq(x: str, y: str) -> Formula:
    return Not(Eq(x, y))


def exists(vs: str | Sequence[str], body: Formula) -> Formula:
    if isinstance(vs, str):
        vs = [vs]
    for v in reversed(list(vs)):
        body = Exists(v, body)
    return body


def forall(vs: str | Sequence[str], body: Formula) -> Formula:
    if isinstance(vs, str):
        vs = [vs]
    for v in reversed(list(vs)):
        body = Forall(v, body)
    return body


def exactly_one(options: Sequence[Formula]) -> Formula:
    """One of ``options`` holds and every other one fails."""
    return disj(
        conj(o, *[neg(p) for k, p in enumerate(options) if k != i]) for i, o in enumerate(options)
    )


def _flat_args(parts) -> Iterator[Formula]:
    for p in parts:
        if isinstance(p, Formula):
            yield p
        else:
            yield from p


def _dedupe(items: list[Formula]) -> list[Formula]:
    seen = set()
    out = []
    for it in items:
        if it not in seen:
            seen.add(it)
            out.append(it)
    return out


# ---------------------------------------------------------------- traversal


def subformulas(phi: Formula) -> Iterator[Formula]:
    stack = [phi]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children()))


def free_vars(phi: Formula) -> frozenset[str]:
    memo: dict[int, frozenset[str]] = {}

    def go(p: Formula) -> frozenset[str]:
        key = id(p)
        if key in memo:
            return memo[key]
        if isinstance(p, Const):
            out = frozenset()
        elif isinstance(p, Pred):
            out = frozenset({p.var})
        elif isinstance(p, (Rel, Eq)):
            out = frozenset({p.left, p.right})
        elif isinstance(p, Not):
            out = go(p.body)
        elif isinstance(p, (And, Or)):
            out = frozenset().union(*(go(a) for a in p.args))
        elif isinstance(p, (Exists, Forall, AtLeast)):
            out = go(p.body) - {p.var}
        elif isinstance(p, Local):
            out = go(p.body) | {p.var}
        else:
            raise TypeError(f"not a formula: {p!r}")
        memo[key] = out
        return out

    return go(phi)


def variables(phi: Formula) -> frozenset[str]:
    """Every variable name occurring in ``phi``, bound or free."""
    out = set()
    for p in subformulas(phi):
        if isinstance(p, Pred):
            out.add(p.var)
        elif isinstance(p, (Rel, Eq)):
            out.update((p.left, p.right))
        elif isinstance(p, (Exists, Forall, AtLeast, Local)):
            out.add(p.var)
    return frozenset(out)


def predicates(phi: Formula) -> frozenset[str]:
    return frozenset(p.name for p in subformulas(phi) if isinstance(p, Pred))


def rel_pairs(phi: Formula) -> frozenset[tuple[int, int]]:
    return frozenset((p.i, p.j) for p in subformulas(phi) if isinstance(p, Rel))


def quantifier_rank(phi: Formula) -> int:
    """Quantifier depth; ``AtLeast(k, ...)`` counts as its k-fold expansion."""
    if isinstance(phi, (Exists, Forall)):
        return 1 + quantifier_rank(phi.body)
    if isinstance(phi, AtLeast):
        return phi.k + quantifier_rank(phi.body)
    kids = phi.children()
    return max((quantifier_rank(k) for k in kids), default=0)


def fresh_name(base: str, taken: Iterable[str]) -> str:
    """``base#k`` for the least k >= 1 not in ``taken``."""
    taken = set(taken)
    root = base.split("#", 1)[0]
    k = 1
    while f"{root}#{k}" in taken:
        k += 1
    return f"{root}#{k}"


def rename_free(phi: Formula, old: str, new: str) -> Formula:
    """Replace free occurrences of ``old`` by ``new``; ``new`` must be fresh
    for the binders it ends up under (callers pick it with ``fresh_name``)."""

    def r(v: str) -> str:
        return new if v == old else v

    def go(p: Formula) -> Formula:
        if isinstance(p, Const):
            return p
        if isinstance(p, Pred):
            return Pred(p.name, r(p.var))
        if isinstance(p, Rel):
            return Rel(p.i, p.j, r(p.left), r(p.right))
        if isinstance(p, Eq):
            return Eq(r(p.left), r(p.right))
        if isinstance(p, Not):
            return Not(go(p.body))
        if isinstance(p, And):
            return And(tuple(go(a) for a in p.args))
        if isinstance(p, Or):
            return Or(tuple(go(a) for a in p.args))
        if isinstance(p, (Exists, Forall, AtLeast)):
            if p.var == old:
                return p
            if p.var == new and old in free_vars(p.body):
                raise ValueError(f"renaming {old} to {new} would be captured")
            body = go(p.body)
            if isinstance(p, AtLeast):
                return AtLeast(p.k, p.var, body)
            return type(p)(p.var, body)
        if isinstance(p, Local):
            return Local(r(p.var), p.radius, go(p.body))
        raise TypeError(f"not a formula: {p!r}")

    return go(phi)


def expand_sugar(phi: Formula) -> Formula:
    """Replace every ``AtLeast(k, y, body)`` by k existentials over fresh
    copies of ``y`` that are pairwise distinct and all satisfy ``body``."""
    taken = set(variables(phi))

    def go(p: Formula) -> Formula:
        if isinstance(p, AtLeast):
            body = go(p.body)
            names = []
            for _ in range(p.k):
                n = fresh_name(p.var, taken)
                taken.add(n)
                names.append(n)
            distinct = [neq(a, b) for i, a in enumerate(names) for b in names[i + 1:]]
            copies = [rename_free(body, p.var, n) for n in names]
            return exists(names, conj(distinct + copies))
        if isinstance(p, Not):
            return Not(go(p.body))
        if isinstance(p, And):
            return And(tuple(go(a) for a in p.args))
        if isinstance(p, Or):
            return Or(tuple(go(a) for a in p.args))
        if isinstance(p, (Exists, Forall)):
            return type(p)(p.var, go(p.body))
        if isinstance(p, Local):
            return Local(p.var, p.radius, go(p.body))
        return p

    return go(phi)


def has_sugar(phi: Formula) -> bool:
    return any(isinstance(p, AtLeast) for p in subformulas(phi))


# ---------------------------------------------------------------- fragments

DFO = "DFO"
LOCAL = "LOCAL"
EXIST_LOCAL = "EXIST_LOCAL"
QF_LOCAL = "QF_LOCAL"
TWO_VAR = "TWO_VAR"
EXT_TWO_VAR = "EXT_TWO_VAR"
MONADIC = "MONADIC"

_LOCAL_KINDS = {LOCAL, EXIST_LOCAL, QF_LOCAL}
_KINDS = {DFO, LOCAL, EXIST_LOCAL, QF_LOCAL, TWO_VAR, EXT_TWO_VAR, MONADIC}


@dataclass(frozen=True)
class FragmentSpec:
    kind: str
    signature: Signature
    r: int | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown fragment kind {self.kind!r}")
        if self.kind in _LOCAL_KINDS and (self.r is None or self.r < 1):
            raise ValueError(f"{self.kind} needs a radius r >= 1")


@dataclass(frozen=True)
class FragmentResult:
    ok: bool
    diagnostic: str = ""

    def __bool__(self) -> bool:
        return self.ok


def type_check(phi: Formula, signature: Signature) -> None:
    """Raise ``TypingError`` on unknown predicates or out-of-range fields."""
    sigma = set(signature.sigma)
    for p in subformulas(phi):
        if isinstance(p, Pred) and p.name not in sigma:
            raise TypingError(f"unknown predicate {p.name} in {p}")
        if isinstance(p, Rel) and not (1 <= p.i <= signature.d and 1 <= p.j <= signature.d):
            raise TypingError(f"relation index out of range for d={signature.d} in {p}")


class _Reject(Exception):
    pass


def in_fragment(phi: Formula, spec: FragmentSpec) -> FragmentResult:
    type_check(phi, spec.signature)
    try:
        _check(phi, spec)
    except _Reject as exc:
        return FragmentResult(False, str(exc))
    return FragmentResult(True)


def require_fragment(phi: Formula, spec: FragmentSpec) -> None:
    res = in_fragment(phi, spec)
    if not res.ok:
        label = spec.kind if spec.r is None else f"{spec.kind}({spec.r})"
        raise FragmentError(f"not in {label}: {res.diagnostic}")


def _check(phi: Formula, spec: FragmentSpec) -> None:
    gamma = spec.signature.gamma
    kind = spec.kind
    if kind == DFO:
        _check_dfo(phi, gamma)
    elif kind == MONADIC:
        _check_dfo(phi, gamma)
        for p in subformulas(phi):
            if isinstance(p, Rel):
                raise _Reject(f"relation atom {p} in a monadic formula")
    elif kind == TWO_VAR:
        _check_dfo(phi, gamma)
        _check_two_var(phi)
    elif kind == EXT_TWO_VAR:
        _check_dfo(phi, gamma)
        parts = phi.args if isinstance(phi, And) else (phi,)
        for part in parts:
            has_rel = any(isinstance(p, Rel) for p in subformulas(part))
            if has_rel:
                _check_two_var(part)
    else:
        _check_local(phi, spec.r, kind, gamma)


def _check_two_var(phi: Formula) -> None:
    if any(isinstance(p, AtLeast) for p in subformulas(phi)):
        raise _Reject("counting quantifiers are not two-variable")
    vs = variables(phi)
    if len(vs) > 2:
        raise _Reject(f"uses {len(vs)} variables {sorted(vs)}")


def _check_dfo(phi: Formula, gamma) -> None:
    for p in subformulas(phi):
        if isinstance(p, Local):
            raise _Reject(f"local modality {_short(p)} inside a plain formula")
        if isinstance(p, Rel) and (p.i, p.j) not in gamma:
            raise _Reject(f"relation ~{p.i}:{p.j} not admitted by gamma")


def _check_local(phi: Formula, r: int, kind: str, gamma) -> None:
    if isinstance(phi, Local):
        if phi.radius != r:
            raise _Reject(f"radius {phi.radius} where {r} is required in {_short(phi)}")
        _check_dfo(phi.body, gamma)
        extra = free_vars(phi.body) - {phi.var}
        if extra:
            raise _Reject(f"local body has free variables {sorted(extra)} besides {phi.var}")
        return
    if isinstance(phi, (Eq, Const)):
        return
    if isinstance(phi, (And, Or)):
        for a in phi.args:
            _check_local(a, r, kind, gamma)
        return
    if isinstance(phi, Not):
        if kind == LOCAL or isinstance(phi.body, Eq):
            _check_local(phi.body, r, kind, gamma)
            return
        raise _Reject(f"negation above a non-equality in {_short(phi)}")
    if isinstance(phi, Exists):
        if kind == QF_LOCAL:
            raise _Reject(f"quantifier {_short(phi)} in a quantifier-free formula")
        _check_local(phi.body, r, kind, gamma)
        return
    if isinstance(phi, AtLeast):
        if kind == QF_LOCAL:
            raise _Reject(f"quantifier {_short(phi)} in a quantifier-free formula")
        _check_local(phi.body, r, kind, gamma)
        return
    if isinstance(phi, Forall):
        if kind != LOCAL:
            raise _Reject(f"universal quantifier {_short(phi)} in an existential formula")
        _check_local(phi.body, r, kind, gamma)
        return
    raise _Reject(f"{_short(phi)} must occur under a local modality")


def _short(phi: Formula, limit: int = 60) -> str:
    text = str(phi)
    return text if len(text) <= limit else text[: limit - 3] + "..."


def prenex_existential(phi: Formula, spec: FragmentSpec | None = None) -> tuple[list[str], Formula]:
    """Pull every existential of an existential local formula to the front.

    Bound variables are renamed apart (``x#1`` style) whenever a name is
    already in use. Hoisting through disjunction relies on universes being
    nonempty.
    """
    if spec is not None:
        require_fragment(phi, spec)
    phi = expand_sugar(phi)
    taken = set(variables(phi))
    used: set[str] = set(free_vars(phi))
    hoisted: list[str] = []

    def go(p: Formula) -> Formula:
        if isinstance(p, Exists):
            name = p.var
            body = p.body
            if name in used:
                name = fresh_name(p.var, taken | used)
                taken.add(name)
                body = rename_free(body, p.var, name)
            used.add(name)
            hoisted.append(name)
            return go(body)
        if isinstance(p, And):
            return And(tuple(go(a) for a in p.args))
        if isinstance(p, Or):
            return Or(tuple(go(a) for a in p.args))
        if isinstance(p, Not):
            if isinstance(p.body, Exists):
                raise FragmentError("negated quantifier in an existential formula")
            return p
        if isinstance(p, Forall):
            raise FragmentError("universal quantifier in an existential formula")
        return p

    matrix = go(phi)
    return hoisted, matrix
