"""Model checking for data structures, including the local modality.

Formulas are compiled once into closures over integer element positions.
Quantifier and modality results are memoized per call, keyed on the
subformula and the positions of its free variables. Views are cached per
(centre, radius) for the duration of a call.
"""

from __future__ import annotations

from typing import Callable

from .core import DataStructure, Interpretation, LocfoError, StructuralError
from .formula import (
    And,
    AtLeast,
    Const,
    Eq,
    Exists,
    Forall,
    Formula,
    Local,
    Not,
    Or,
    Pred,
    Rel,
    free_vars,
    subformulas,
)
from .locality import view_with_fresh


class EvalError(LocfoError):
    """Unbound variable, relation outside gamma, or a variable that escapes a view."""


_MISSING = object()


class _Ctx:
    __slots__ = ("A", "labels", "values", "n", "views", "memo")

    def __init__(self, A: DataStructure):
        self.A = A
        self.labels = A.labels
        self.values = A.values
        self.n = len(A.ids)
        self.views: dict = {}
        self.memo: dict = {}

    def view(self, pos: int, r: int) -> tuple["_Ctx", dict[int, int]]:
        key = (pos, r)
        hit = self.views.get(key)
        if hit is None:
            v, _ = view_with_fresh(self.A, self.A.ids[pos], r)
            remap = {self.A.index(eid): k for k, eid in enumerate(v.ids)}
            hit = (_Ctx(v), remap)
            self.views[key] = hit
        return hit


Compiled = Callable[[_Ctx, dict], bool]


class _Compiler:
    def __init__(self):
        self.cache: dict[Formula, Compiled] = {}
        self.ids: dict[Formula, int] = {}

    def __call__(self, p: Formula) -> Compiled:
        fn = self.cache.get(p)
        if fn is None:
            fn = self._build(p)
            self.cache[p] = fn
        return fn

    def _nid(self, p: Formula) -> int:
        nid = self.ids.get(p)
        if nid is None:
            nid = len(self.ids)
            self.ids[p] = nid
        return nid

    def _build(self, p: Formula) -> Compiled:
        if isinstance(p, Const):
            val = p.value
            return lambda ctx, env: val
        if isinstance(p, Pred):
            name, v = p.name, p.var
            return lambda ctx, env: name in ctx.labels[env[v]]
        if isinstance(p, Eq):
            a, b = p.left, p.right
            return lambda ctx, env: env[a] == env[b]
        if isinstance(p, Rel):
            a, b, i, j = p.left, p.right, p.i - 1, p.j - 1
            return lambda ctx, env: ctx.values[env[a]][i] == ctx.values[env[b]][j]
        if isinstance(p, Not):
            body = self(p.body)
            return lambda ctx, env: not body(ctx, env)
        if isinstance(p, And):
            parts = tuple(self(a) for a in p.args)

            def conj_fn(ctx, env):
                for f in parts:
                    if not f(ctx, env):
                        return False
                return True

            return conj_fn
        if isinstance(p, Or):
            parts = tuple(self(a) for a in p.args)

            def disj_fn(ctx, env):
                for f in parts:
                    if f(ctx, env):
                        return True
                return False

            return disj_fn
        if isinstance(p, (Exists, Forall, AtLeast)):
            return self._quantifier(p)
        if isinstance(p, Local):
            return self._local(p)
        raise TypeError(f"not a formula: {p!r}")

    def _quantifier(self, p) -> Compiled:
        body = self(p.body)
        v = p.var
        fv = tuple(sorted(free_vars(p)))
        nid = self._nid(p)
        want = True if isinstance(p, Exists) else False
        k = p.k if isinstance(p, AtLeast) else 0

        def run(ctx, env):
            old = env.get(v, _MISSING)
            try:
                if k:
                    found = 0
                    for pos in range(ctx.n):
                        env[v] = pos
                        if body(ctx, env):
                            found += 1
                            if found >= k:
                                return True
                    return False
                for pos in range(ctx.n):
                    env[v] = pos
                    if body(ctx, env) is want:
                        return want
                return not want
            finally:
                if old is _MISSING:
                    env.pop(v, None)
                else:
                    env[v] = old

        def memo_fn(ctx, env):
            key = (nid,) + tuple(env[u] for u in fv)
            memo = ctx.memo
            res = memo.get(key)
            if res is None:
                res = bool(run(ctx, env))
                memo[key] = res
            return res

        return memo_fn

    def _local(self, p: Local) -> Compiled:
        body = self(p.body)
        x, r = p.var, p.radius
        fv = tuple(sorted(free_vars(p.body) | {x}))
        nid = self._nid(p)

        def local_fn(ctx, env):
            key = (nid,) + tuple(env[u] for u in fv)
            res = ctx.memo.get(key)
            if res is not None:
                return res
            vctx, remap = ctx.view(env[x], r)
            inner = {}
            for u in fv:
                q = remap.get(env[u])
                if q is None:
                    raise EvalError(
                        f"variable {u} points outside the {r}-view of its centre {x}"
                    )
                inner[u] = q
            res = bool(body(vctx, inner))
            ctx.memo[key] = res
            return res

        return local_fn


_COMPILER = _Compiler()


def _compile(phi: Formula) -> Compiled:
    if len(_COMPILER.cache) > 200_000:
        _COMPILER.cache.clear()
        _COMPILER.ids.clear()
    return _COMPILER(phi)


def check_gamma(A: DataStructure, phi: Formula) -> None:
    for p in subformulas(phi):
        if isinstance(p, Rel):
            if not (1 <= p.i <= A.d and 1 <= p.j <= A.d):
                raise EvalError(f"relation ~{p.i}:{p.j} out of range for d={A.d}")
            if (p.i, p.j) not in A.gamma:
                raise EvalError(f"relation ~{p.i}:{p.j} not admitted by gamma")


def _check_ranges(A: DataStructure, phi: Formula) -> None:
    for p in subformulas(phi):
        if isinstance(p, Rel) and not (1 <= p.i <= A.d and 1 <= p.j <= A.d):
            raise EvalError(f"relation ~{p.i}:{p.j} out of range for d={A.d}")


def eval_formula(
    A: DataStructure, I: Interpretation, phi: Formula, strict: bool = True
) -> bool:
    """Truth of ``phi`` in ``A`` under the interpretation ``I`` (var -> id)."""
    if strict:
        check_gamma(A, phi)
    else:
        _check_ranges(A, phi)
    missing = free_vars(phi) - set(I)
    if missing:
        raise EvalError(f"unbound variables {sorted(missing)}")
    try:
        env = {v: A.index(e) for v, e in I.items()}
    except StructuralError as exc:
        raise EvalError(str(exc)) from exc
    return bool(_compile(phi)(_Ctx(A), env))


def models(A: DataStructure, phi: Formula, strict: bool = True) -> bool:
    fv = free_vars(phi)
    if fv:
        raise EvalError(f"not a sentence, free variables {sorted(fv)}")
    return eval_formula(A, {}, phi, strict)


def query_pairs(
    A: DataStructure, phi: Formula, x: str = "x", y: str = "y", strict: bool = True
) -> frozenset[tuple[str, str]]:
    """All pairs ``(a, b)`` with ``A |= phi[x := a, y := b]``."""
    extra = free_vars(phi) - {x, y}
    if extra:
        raise EvalError(f"extra free variables {sorted(extra)}")
    if strict:
        check_gamma(A, phi)
    else:
        _check_ranges(A, phi)
    fn = _compile(phi)
    ctx = _Ctx(A)
    out = set()
    for p in range(ctx.n):
        for q in range(ctx.n):
            if fn(ctx, {x: p, y: q}):
                out.add((A.ids[p], A.ids[q]))
    return frozenset(out)


def satisfying_elements(A: DataStructure, phi: Formula, x: str, strict: bool = True) -> list[str]:
    """Elements ``a`` with ``A |= phi[x := a]`` (``phi`` has only ``x`` free)."""
    extra = free_vars(phi) - {x}
    if extra:
        raise EvalError(f"extra free variables {sorted(extra)}")
    if strict:
        check_gamma(A, phi)
    fn = _compile(phi)
    ctx = _Ctx(A)
    return [A.ids[p] for p in range(ctx.n) if fn(ctx, {x: p})]
