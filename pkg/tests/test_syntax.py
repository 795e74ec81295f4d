import json
import random

import pytest
from hypothesis import given, settings

from locfo.core import Signature, full_gamma, vals
from locfo.formula import (
    LOCAL,
    And,
    AtLeast,
    Eq,
    Exists,
    FragmentSpec,
    Forall,
    Local,
    Not,
    Or,
    Pred,
    Rel,
    TypingError,
    in_fragment,
)
from locfo.syntax import FormatError, ParseError, parse_formula, print_formula, read_structure, write_structure
from support import SEED, formulas, random_structure



class TestParse:
    def test_local_leader(self):
        assert parse_formula("exists x. loc[1] x { Leader(x) }") == Exists("x", Local("x", 1, Pred("Leader", "x")))

    def test_leader_second_conjunct(self):
        phi = parse_formula("forall y. loc[1] y { exists x. Leader(x) & y ~2:1 x }")
        expected = Forall("y", Local("y", 1, Exists("x", And((Pred("Leader", "x"), Rel(2, 1, "y", "x"))))))
        assert phi == expected

    def test_out_of_range_index_parses_then_fails_typing(self):
        phi = parse_formula("exists x. loc[1] x { exists y. x ~3:1 y }")
        with pytest.raises(TypingError):
            in_fragment(phi, FragmentSpec(LOCAL, Signature((), 2, full_gamma(2)), 1))

    def test_precedence(self):
        phi = parse_formula("!P(x) & Q(x) | x = y")
        assert phi == Or((And((Not(Pred("P", "x")), Pred("Q", "x"))), Eq("x", "y")))

    def test_quantifier_binds_right(self):
        phi = parse_formula("exists x. P(x) | Q(x)")
        assert isinstance(phi, Exists) and isinstance(phi.body, Or)

    def test_quantifier_in_operand(self):
        phi = parse_formula("P(x) & exists y. Q(y) | P(y)")
        assert phi == And((Pred("P", "x"), Exists("y", Or((Pred("Q", "y"), Pred("P", "y"))))))

    def test_disequality_and_atleast(self):
        assert parse_formula("x != y") == Not(Eq("x", "y"))
        assert parse_formula("atleast[3] y. P(y)") == AtLeast(3, "y", Pred("P", "y"))

    def test_comments(self):
        assert parse_formula("# header\nP(x) # trailing\n") == Pred("P", "x")

    @pytest.mark.parametrize(
        "text, column",
        [
            ("exists exists. P(x)", 8),
            ("P(x) &", 7),
            ("x ~1 y", 6),
            ("P(x) $", 6),
            ("atleast[0] y. P(y)", 9),
            ("P(x) Q(x)", 6),
        ],
    )
    def test_error_spans(self, text, column):
        with pytest.raises(ParseError) as info:
            parse_formula(text)
        assert info.value.span.line == 1
        assert info.value.span.column == column

    def test_error_span_second_line(self):
        with pytest.raises(ParseError) as info:
            parse_formula("exists x.\n  P(x) & & Q(x)")
        assert (info.value.span.line, info.value.span.column) == (2, 10)


class TestPrint:
    def test_pred(self):
        assert print_formula(Pred("P", "x")) == "P(x)"

    def test_local(self):
        assert print_formula(Local("x", 2, Pred("P", "x"))) == "loc[2] x { P(x) }"

    def test_minimal_parentheses(self):
        phi = Or((And((Pred("P", "x"), Pred("Q", "x"))), Not(Eq("x", "y"))))
        assert print_formula(phi) == "P(x) & Q(x) | x != y"
        psi = And((Or((Pred("P", "x"), Pred("Q", "x"))), Exists("y", Pred("P", "y"))))
        assert print_formula(psi) == "(P(x) | Q(x)) & (exists y. P(y))"

    @given(formulas)
    @settings(max_examples=1000, deadline=None)
    def test_round_trip(self, phi):
        assert parse_formula(print_formula(phi)) == phi


class TestStructureFormat:
    def test_single_element(self):
        A = read_structure('{"sigma":[],"d":2,"elements":[{"id":"a","labels":[],"values":[1,2]}]}')
        assert len(A) == 1 and A.values == ((1, 2),)

    def test_six_element_figure(self):
        text = json.dumps(
            {
                "sigma": [],
                "d": 2,
                "elements": [
                    {"id": k, "labels": [], "values": v}
                    for k, v in zip("abcdef", ([1, 2], [1, 3], [3, 2], [5, 6], [4, 3], [2, 7]))
                ],
            }
        )
        A = read_structure(text)
        assert len(A) == 6
        assert vals(A) == set(range(1, 8))

    @pytest.mark.parametrize(
        "obj, fragment",
        [
            ({"sigma": [], "d": 2, "elements": []}, "empty"),
            ({"sigma": [], "d": 2, "elements": [{"id": "a", "labels": [], "values": [1]}]}, "'a'"),
            ({"sigma": ["P"], "d": 1, "elements": [{"id": "a", "labels": ["Q"], "values": [1]}]}, "'a'"),
            (
                {"sigma": [], "d": 1, "elements": [{"id": "a", "values": [1]}, {"id": "a", "values": [2]}]},
                "'a'",
            ),
            ({"sigma": [], "d": 1, "elements": [{"id": "b", "values": [-1]}]}, "'b'"),
            ({"sigma": [], "d": 1, "elements": [{"id": "b", "values": [2**32]}]}, "'b'"),
            ({"sigma": [], "elements": []}, "'d'"),
        ],
    )
    def test_format_errors(self, obj, fragment):
        with pytest.raises(FormatError, match=fragment):
            read_structure(json.dumps(obj))

    def test_invalid_json(self):
        with pytest.raises(FormatError):
            read_structure("{")

    def test_round_trip(self):
        rng = random.Random(SEED)
        for _ in range(1000):
            A = random_structure(rng, rng.randint(1, 5), ("P", "Q"), rng.randint(0, 3), 6)
            text = write_structure(A)
            assert read_structure(text) == A
            assert write_structure(read_structure(text)) == text
