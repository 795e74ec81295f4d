"""Finite data structures: a labelled universe where every element carries a
vector of ``d`` natural-number data values.

Everything here is immutable. Element ids are strings, value fields are
indexed from 1 as in ``x ~i:j y``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Iterable, Mapping, Sequence, Union

PRED_RE = re.compile(r"[A-Z][a-zA-Z0-9_]*\Z")

ALL = "ALL"

Pair = tuple[int, int]
Interpretation = Mapping[str, str]


class LocfoError(Exception):
    """Base class for every error raised by the library."""


class StructuralError(LocfoError):
    """Unknown element, bad index, malformed structure."""


class ArgumentError(LocfoError):
    """A well-formed call whose arguments violate the operation's precondition."""


class ContractError(LocfoError):
    """A checked pre- or postcondition of a construction failed."""


def full_gamma(d: int) -> frozenset[Pair]:
    return frozenset((i, j) for i in range(1, d + 1) for j in range(1, d + 1))


GAMMA_DF: frozenset[Pair] = frozenset({(1, 1), (2, 2)})
GAMMA_DIAG: frozenset[Pair] = frozenset({(1, 1), (2, 2), (1, 2)})


def parse_gamma(text: str) -> frozenset[Pair]:
    """Parse ``"1:1,2:2,1:2"``; the empty string gives the empty set."""
    pairs = set()
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            i, j = chunk.split(":")
            pairs.add((int(i), int(j)))
        except ValueError as exc:
            raise ArgumentError(f"bad gamma pair {chunk!r}, expected i:j") from exc
    return frozenset(pairs)


def format_gamma(gamma: Iterable[Pair]) -> str:
    return ",".join(f"{i}:{j}" for i, j in sorted(gamma))


@dataclass(frozen=True)
class Signature:
    sigma: tuple[str, ...]
    d: int
    gamma: frozenset[Pair] = frozenset()

    def __post_init__(self) -> None:
        sigma = tuple(self.sigma)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "gamma", frozenset(tuple(p) for p in self.gamma))
        if self.d < 0:
            raise StructuralError(f"value arity must be >= 0, got {self.d}")
        if len(set(sigma)) != len(sigma):
            raise StructuralError(f"duplicate predicate names in {sigma}")
        for name in sigma:
            if not isinstance(name, str) or not PRED_RE.match(name):
                raise StructuralError(f"bad predicate name {name!r}")
        for i, j in self.gamma:
            if not (1 <= i <= self.d and 1 <= j <= self.d):
                raise StructuralError(f"gamma pair ({i},{j}) out of range for d={self.d}")

    def with_sigma(self, sigma: Iterable[str]) -> "Signature":
        return Signature(tuple(sigma), self.d, self.gamma)

    def extend(self, extra: Iterable[str]) -> "Signature":
        new = [p for p in extra if p not in self.sigma]
        return Signature(self.sigma + tuple(new), self.d, self.gamma)

    def with_gamma(self, gamma: Iterable[Pair]) -> "Signature":
        return Signature(self.sigma, self.d, frozenset(gamma))

    def with_d(self, d: int, gamma: Iterable[Pair] | None = None) -> "Signature":
        return Signature(self.sigma, d, frozenset(gamma) if gamma is not None else frozenset())


@dataclass(frozen=True)
class DataStructure:
    signature: Signature
    ids: tuple[str, ...]
    labels: tuple[frozenset[str], ...]
    values: tuple[tuple[int, ...], ...]
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        ids = tuple(self.ids)
        labels = tuple(frozenset(ls) for ls in self.labels)
        values = tuple(tuple(int(v) for v in vs) for vs in self.values)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "values", values)
        if not ids:
            raise StructuralError("the universe must be nonempty")
        if not (len(ids) == len(labels) == len(values)):
            raise StructuralError("ids, labels and values must have equal length")
        index = {}
        sigma = set(self.signature.sigma)
        d = self.signature.d
        for pos, (eid, ls, vs) in enumerate(zip(ids, labels, values)):
            if not isinstance(eid, str) or not eid:
                raise StructuralError(f"element id must be a nonempty string, got {eid!r}")
            if eid in index:
                raise StructuralError(f"duplicate element id {eid!r}")
            index[eid] = pos
            if len(vs) != d:
                raise StructuralError(f"element {eid!r} has {len(vs)} values, expected {d}")
            if any(v < 0 for v in vs):
                raise StructuralError(f"element {eid!r} has a negative value")
            unknown = ls - sigma
            if unknown:
                raise StructuralError(f"element {eid!r} has unknown labels {sorted(unknown)}")
        object.__setattr__(self, "_index", index)

    @classmethod
    def build(
        cls,
        signature: Signature,
        rows: Iterable[tuple[str, Iterable[str], Sequence[int]]],
    ) -> "DataStructure":
        rows = list(rows)
        return cls(
            signature,
            tuple(r[0] for r in rows),
            tuple(frozenset(r[1]) for r in rows),
            tuple(tuple(r[2]) for r in rows),
        )

    @property
    def d(self) -> int:
        return self.signature.d

    @property
    def sigma(self) -> tuple[str, ...]:
        return self.signature.sigma

    @property
    def gamma(self) -> frozenset[Pair]:
        return self.signature.gamma

    def __len__(self) -> int:
        return len(self.ids)

    def index(self, eid: str) -> int:
        try:
            return self._index[eid]
        except KeyError:
            raise StructuralError(f"unknown element id {eid!r}") from None

    def __contains__(self, eid: object) -> bool:
        return eid in self._index

    def labels_of(self, eid: str) -> frozenset[str]:
        return self.labels[self.index(eid)]

    def values_of(self, eid: str) -> tuple[int, ...]:
        return self.values[self.index(eid)]

    def value(self, eid: str, i: int) -> int:
        if not 1 <= i <= self.d:
            raise StructuralError(f"field index {i} out of range for d={self.d}")
        return self.values[self.index(eid)][i - 1]

    def rows(self) -> list[tuple[str, frozenset[str], tuple[int, ...]]]:
        return list(zip(self.ids, self.labels, self.values))

    def with_signature(self, signature: Signature) -> "DataStructure":
        return DataStructure(signature, self.ids, self.labels, self.values)

    def with_gamma(self, gamma: Iterable[Pair]) -> "DataStructure":
        return self.with_signature(self.signature.with_gamma(gamma))

    def restrict(self, keep: Iterable[str]) -> "DataStructure":
        """Substructure on ``keep`` (original order is preserved)."""
        keep = set(keep)
        for eid in keep:
            self.index(eid)
        return DataStructure.build(self.signature, [r for r in self.rows() if r[0] in keep])

    def project_labels(self, sigma: Iterable[str]) -> "DataStructure":
        """Forget every label outside ``sigma``."""
        sigma = tuple(sigma)
        keep = set(sigma)
        return DataStructure(
            self.signature.with_sigma(sigma),
            self.ids,
            tuple(ls & keep for ls in self.labels),
            self.values,
        )

    def elements_with(self, label: str) -> frozenset[str]:
        return frozenset(e for e, ls in zip(self.ids, self.labels) if label in ls)


def relation_holds(A: DataStructure, i: int, j: int, a: str, b: str) -> bool:
    """True iff value ``i`` of ``a`` equals value ``j`` of ``b``."""
    return A.value(a, i) == A.value(b, j)


def vals(A: DataStructure, X: Iterable[str] | None = None) -> frozenset[int]:
    if X is None:
        return frozenset(v for vs in A.values for v in vs)
    return frozenset(v for eid in X for v in A.values_of(eid))


ValueMap = Union[Mapping[int, int], Callable[[int], int]]


def permute_values(A: DataStructure, pi: ValueMap, field: Union[int, str] = ALL) -> DataStructure:
    """Map the chosen field (or every field) through the bijection ``pi``."""
    if field == ALL:
        fields = set(range(A.d))
    else:
        if not isinstance(field, int) or not 1 <= field <= A.d:
            raise StructuralError(f"field index {field!r} out of range for d={A.d}")
        fields = {field - 1}
    look = pi.__getitem__ if isinstance(pi, Mapping) else pi
    touched = sorted({vs[f] for vs in A.values for f in fields})
    image = {}
    for v in touched:
        try:
            image[v] = int(look(v))
        except (KeyError, TypeError) as exc:
            raise ArgumentError(f"permutation undefined on value {v}") from exc
    if len(set(image.values())) != len(image):
        raise ArgumentError("permutation is not injective on the touched values")
    values = tuple(
        tuple(image[v] if f in fields else v for f, v in enumerate(vs)) for vs in A.values
    )
    return DataStructure(A.signature, A.ids, A.labels, values)


def _element_invariants(A: DataStructure) -> list[tuple]:
    counts = [{} for _ in range(A.d)]
    for vs in A.values:
        for f, v in enumerate(vs):
            counts[f][v] = counts[f].get(v, 0) + 1
    keys = []
    for ls, vs in zip(A.labels, A.values):
        first = {}
        pattern = tuple(first.setdefault(v, len(first)) for v in vs)
        spread = tuple(tuple(c.get(v, 0) for c in counts) for v in vs)
        keys.append((tuple(sorted(ls)), pattern, spread))
    return keys


def canonical_key(A: DataStructure) -> tuple:
    """An isomorphism-invariant encoding of ``A`` (ids and value names ignored).

    Elements are ordered by an invariant key, ties are broken by searching
    all tied orders for the lexicographically least encoding.
    """
    n = len(A)
    inv = _element_invariants(A)
    order_keys = sorted(set(inv))
    groups = [[p for p in range(n) if inv[p] == k] for k in order_keys]
    slots = [g for g in groups for _ in g]

    # each state: (used positions, rename map, next fresh value, chosen order)
    states = [(frozenset(), {}, 1, ())]
    for depth in range(n):
        group = slots[depth]
        best = None
        nxt = []
        for used, ren, fresh, order in states:
            for p in group:
                if p in used:
                    continue
                r = dict(ren)
                f = fresh
                code_vals = []
                for v in A.values[p]:
                    if v not in r:
                        r[v] = f
                        f += 1
                    code_vals.append(r[v])
                code = (inv[p][0], tuple(code_vals))
                if best is None or code < best:
                    best = code
                    nxt = [(used | {p}, r, f, order + (p,), code)]
                elif code == best:
                    nxt.append((used | {p}, r, f, order + (p,), code))
        seen = set()
        states = []
        for used, r, f, order, _ in nxt:
            sig = (used, tuple(sorted(r.items())))
            if sig in seen:
                continue
            seen.add(sig)
            states.append((used, r, f, order))
    used, ren, fresh, order = states[0]
    return tuple(
        (tuple(sorted(A.labels[p])), tuple(ren[v] for v in A.values[p])) for p in order
    )


def canonical_form(A: DataStructure) -> DataStructure:
    """Rename values to 1..k and ids to e1..en in a canonical element order."""
    key = canonical_key(A)
    return DataStructure(
        A.signature,
        tuple(f"e{k + 1}" for k in range(len(key))),
        tuple(frozenset(ls) for ls, _ in key),
        tuple(vs for _, vs in key),
    )


def value_bijections(values: Sequence[int]) -> Iterable[dict[int, int]]:
    """All bijections of a finite value set onto itself (small sets only)."""
    from itertools import permutations

    values = list(values)
    for image in permutations(values):
        yield dict(zip(values, image))


def all_label_sets(sigma: Sequence[str]) -> list[frozenset[str]]:
    return [
        frozenset(p for p, bit in zip(sigma, bits) if bit)
        for bits in product((0, 1), repeat=len(sigma))
    ]
