"""Data graph, directed distances, radius-r balls and r-views.

Vertices are pairs ``(element id, field)``. There is an edge from ``(a, i)``
to ``(b, j)`` when ``a == b`` and ``i != j``, or when ``(i, j)`` is in the
signature's gamma and value ``i`` of ``a`` equals value ``j`` of ``b``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterator

from .core import ArgumentError, DataStructure, StructuralError

INFINITY = float("inf")

Vertex = tuple[str, int]


@dataclass(frozen=True)
class DataGraph:
    vertices: frozenset[Vertex]
    edges: frozenset[tuple[Vertex, Vertex]]

    def successors(self, v: Vertex) -> list[Vertex]:
        return sorted(w for (u, w) in self.edges if u == v)


def _value_index(A: DataStructure) -> list[dict[int, list[int]]]:
    """Per field, a map from value to the positions carrying it (cached)."""
    cached = A.__dict__.get("_vidx")
    if cached is not None:
        return cached
    index: list[dict[int, list[int]]] = [dict() for _ in range(A.d)]
    for pos, vs in enumerate(A.values):
        for f, v in enumerate(vs):
            index[f].setdefault(v, []).append(pos)
    object.__setattr__(A, "_vidx", index)
    return index


def _succ(A: DataStructure, pos: int, f: int, by_src: dict[int, list[int]]) -> Iterator[tuple[int, int]]:
    """Successors of vertex (pos, f) with 0-based field indices."""
    d = A.d
    for g in range(d):
        if g != f:
            yield pos, g
    vidx = _value_index(A)
    v = A.values[pos][f]
    for g in by_src.get(f, ()):
        for q in vidx[g].get(v, ()):
            yield q, g


def _gamma_by_source(A: DataStructure) -> dict[int, list[int]]:
    by_src: dict[int, list[int]] = {}
    for i, j in sorted(A.gamma):
        by_src.setdefault(i - 1, []).append(j - 1)
    return by_src


def data_graph(A: DataStructure) -> DataGraph:
    by_src = _gamma_by_source(A)
    verts = set()
    edges = set()
    for pos, eid in enumerate(A.ids):
        for f in range(A.d):
            verts.add((eid, f + 1))
            for q, g in _succ(A, pos, f, by_src):
                edges.add(((eid, f + 1), (A.ids[q], g + 1)))
    return DataGraph(frozenset(verts), frozenset(edges))


def _bfs(A: DataStructure, sources: list[tuple[int, int]], limit: float) -> dict[tuple[int, int], int]:
    by_src = _gamma_by_source(A)
    dist = {s: 0 for s in sources}
    queue = deque(sources)
    while queue:
        u = queue.popleft()
        du = dist[u]
        if du >= limit:
            continue
        for w in _succ(A, u[0], u[1], by_src):
            if w not in dist:
                dist[w] = du + 1
                queue.append(w)
    return dist


def _check_vertex(A: DataStructure, v: Vertex) -> tuple[int, int]:
    eid, f = v
    pos = A.index(eid)
    if not 1 <= f <= A.d:
        raise StructuralError(f"field {f} out of range for d={A.d}")
    return pos, f - 1


def distance(A: DataStructure, source: Vertex, target: Vertex) -> float:
    """Length of the shortest directed path, or ``INFINITY``."""
    s = _check_vertex(A, source)
    t = _check_vertex(A, target)
    dist = _bfs(A, [s], INFINITY)
    return dist.get(t, INFINITY)


def ball_positions(A: DataStructure, pos: int, r: int) -> set[tuple[int, int]]:
    """Ball as 0-based (position, field) pairs; internal fast path."""
    return set(_bfs(A, [(pos, f) for f in range(A.d)], r))


def ball(A: DataStructure, a: str, r: int) -> frozenset[Vertex]:
    """Vertices within distance ``r`` of some field of ``a``."""
    if r < 0:
        raise ArgumentError("radius must be >= 0")
    pos = A.index(a)
    return frozenset((A.ids[p], f + 1) for p, f in ball_positions(A, pos, r))


def view_with_fresh(A: DataStructure, a: str, r: int) -> tuple[DataStructure, list[Vertex]]:
    """The r-view of ``a`` and the list of fields that received fresh values.

    Fields outside the ball get values ``max(Vals(A)) + 1, + 2, ...`` in
    element order then field order. With ``d = 0`` the ball has no vertices
    and the view is the centre alone.
    """
    if r < 0:
        raise ArgumentError("radius must be >= 0")
    pos = A.index(a)
    inside = ball_positions(A, pos, r)
    members = sorted({p for p, _ in inside} | {pos})
    top = max((v for vs in A.values for v in vs), default=0)
    fresh = top + 1
    freshened: list[Vertex] = []
    values = []
    for p in members:
        row = []
        for f, v in enumerate(A.values[p]):
            if (p, f) in inside:
                row.append(v)
            else:
                row.append(fresh)
                freshened.append((A.ids[p], f + 1))
                fresh += 1
        values.append(tuple(row))
    view = DataStructure(
        A.signature,
        tuple(A.ids[p] for p in members),
        tuple(A.labels[p] for p in members),
        tuple(values),
    )
    return view, freshened


def view(A: DataStructure, a: str, r: int) -> DataStructure:
    return view_with_fresh(A, a, r)[0]


def _require_d2(A: DataStructure) -> None:
    if A.d != 2:
        raise ArgumentError(f"characterization needs d=2, got d={A.d}")


def in_ball1_by_values(A: DataStructure, a: str, b: str, j: int) -> bool:
    """Value test for radius 1 with all four relations: some field of ``a``
    equals field ``j`` of ``b``."""
    _require_d2(A)
    vb = A.value(b, j)
    return any(A.value(a, i) == vb for i in (1, 2))


def in_ball2_by_values(A: DataStructure, a: str, b: str, j: int) -> bool:
    """Value test for radius 2 with all four relations: ``a`` and ``b`` share
    some value, whichever fields carry it."""
    _require_d2(A)
    A.value(b, j)
    return any(A.value(a, i) == A.value(b, k) for i in (1, 2) for k in (1, 2))
