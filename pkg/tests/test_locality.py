import random

import pytest

from locfo.core import ArgumentError, StructuralError, canonical_form
from locfo.locality import (
    INFINITY,
    ball,
    data_graph,
    distance,
    in_ball1_by_values,
    in_ball2_by_values,
    view,
    view_with_fresh,
)
from support import SEED, fig_ball1, fig_ball2, naive_ball, naive_edges, random_structure, structure


class TestDataGraph:
    def test_unidirectional_edge(self):
        G = data_graph(fig_ball1())
        assert (("a", 1), ("b", 2)) in G.edges
        assert (("b", 2), ("a", 1)) not in G.edges

    def test_no_edges_without_relations(self):
        A = structure([("a", (), (1,)), ("b", (), (1,))], d=1, gamma=())
        assert data_graph(A).edges == frozenset()

    def test_singleton(self):
        A = structure([("a", (), (1, 1))], gamma=())
        assert data_graph(A).edges == {(("a", 1), ("a", 2)), (("a", 2), ("a", 1))}

    def test_matches_definition(self):
        rng = random.Random(SEED)
        for _ in range(200):
            d = rng.randint(1, 3)
            pairs = [(i, j) for i in range(1, d + 1) for j in range(1, d + 1)]
            gamma = {p for p in pairs if rng.random() < 0.5}
            A = random_structure(rng, rng.randint(1, 4), (), d, 4, gamma)
            G = data_graph(A)
            assert G.edges == naive_edges(A)
            assert len(G.vertices) == len(A) * d
            intra = [e for e in G.edges if e[0][0] == e[1][0] and e[0][1] != e[1][1]]
            assert len(intra) == len(A) * d * (d - 1)


class TestDistance:
    def test_self(self):
        assert distance(fig_ball2(), ("c", 2), ("c", 2)) == 0

    def test_one_step(self):
        assert distance(fig_ball2(), ("a", 2), ("f", 1)) == 1

    def test_isolated(self):
        A = fig_ball2()
        assert all(distance(A, ("a", i), ("d", 1)) == INFINITY for i in (1, 2))

    def test_asymmetric(self):
        A = fig_ball1()
        assert distance(A, ("a", 1), ("b", 2)) == 1
        assert distance(A, ("b", 2), ("a", 1)) > 1

    def test_unknown_vertex(self):
        with pytest.raises(StructuralError):
            distance(fig_ball2(), ("a", 3), ("a", 1))


class TestBall:
    def test_radius_zero(self):
        assert ball(fig_ball2(), "b", 0) == {("b", 1), ("b", 2)}

    def test_radius_one_figure(self):
        assert ball(fig_ball1(), "a", 1) == {("a", 1), ("a", 2), ("b", 2), ("c", 2), ("d", 1)}

    def test_radius_two_figure(self):
        assert {b for b, _ in ball(fig_ball2(), "a", 2)} == {"a", "b", "c", "f"}

    def test_negative_radius(self):
        with pytest.raises(ArgumentError):
            ball(fig_ball2(), "a", -1)

    def test_against_bfs_oracle_and_monotone(self):
        rng = random.Random(SEED)
        for _ in range(300):
            d = rng.randint(1, 3)
            gamma = {(i, j) for i in range(1, d + 1) for j in range(1, d + 1) if rng.random() < 0.6}
            A = random_structure(rng, rng.randint(1, 5), (), d, 5, gamma)
            a = rng.choice(A.ids)
            prev = frozenset()
            for r in range(4):
                cur = ball(A, a, r)
                assert cur == naive_ball(A, a, r)
                assert prev <= cur
                prev = cur


class TestValueCharacterization:
    def test_radius_one_via_second_field(self):
        assert in_ball1_by_values(fig_ball2(), "a", "f", 1)

    def test_no_shared_value(self):
        A = fig_ball2()
        assert not in_ball2_by_values(A, "a", "d", 1)
        assert not in_ball2_by_values(A, "a", "d", 2)

    def test_needs_two_fields(self):
        A = structure([("a", (), (1,))], d=1)
        with pytest.raises(ArgumentError):
            in_ball1_by_values(A, "a", "a", 1)

    def test_random_agreement(self):
        rng = random.Random(SEED)
        cases = 0
        while cases < 10_000:
            A = random_structure(rng, rng.randint(1, 5), (), 2, 6)
            a = rng.choice(A.ids)
            b1, b2 = ball(A, a, 1), ball(A, a, 2)
            for b in A.ids:
                for j in (1, 2):
                    assert ((b, j) in b1) == in_ball1_by_values(A, a, b, j)
                    assert ((b, j) in b2) == in_ball2_by_values(A, a, b, j)
                    cases += 1


class TestView:
    def test_radius_one_freshens(self):
        A = fig_ball1()
        V, fresh = view_with_fresh(A, "a", 1)
        assert set(V.ids) == {"a", "b", "c", "d"}
        assert set(fresh) == {("b", 1), ("c", 1), ("d", 2)}
        new = [V.value(b, i) for b, i in fresh]
        assert len(set(new)) == 3 and min(new) > 5

    def test_radius_two_keeps_values(self):
        A = fig_ball2()
        V, fresh = view_with_fresh(A, "a", 2)
        assert V == A.restrict(["a", "b", "c", "f"])
        assert fresh == []

    def test_large_radius_gives_component(self):
        rng = random.Random(SEED)
        for _ in range(100):
            A = random_structure(rng, rng.randint(1, 5), ("P",), 2, 3)
            a = rng.choice(A.ids)
            V = view(A, a, 2 * len(A) * A.d)
            assert canonical_form(V) == canonical_form(A.restrict(V.ids))

    def test_idempotent(self):
        rng = random.Random(SEED)
        for _ in range(300):
            d = rng.randint(1, 3)
            A = random_structure(rng, rng.randint(1, 5), ("P",), d, 5)
            a = rng.choice(A.ids)
            r = rng.randint(0, 3)
            V = view(A, a, r)
            assert canonical_form(view(V, a, r)) == canonical_form(V)
