"""Concrete syntax: the ``.lfo`` formula language and the JSON structure format.

Formula grammar (ASCII)::

    formula := ('exists'|'forall') VAR '.' formula
             | 'atleast' '[' INT ']' VAR '.' formula | or
    or      := and ('|' and)*
    and     := unary ('&' unary)*
    unary   := '!' unary | atom
    atom    := '(' formula ')' | VAR '=' VAR | VAR '!=' VAR | PRED '(' VAR ')'
             | VAR '~' INT ':' INT VAR | 'loc' '[' INT ']' VAR '{' formula '}'
             | 'true' | 'false'

Quantifiers are also accepted in operand position, binding as far right as
possible. Variables may carry a ``#k`` suffix (generated fresh names); a
``#`` that does not directly follow a variable starts a line comment.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterable

from .core import DataStructure, LocfoError, Signature, full_gamma
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
)

MAX_VALUE = 2**32 - 1
KEYWORDS = frozenset({"exists", "forall", "atleast", "loc", "true", "false"})


@dataclass(frozen=True)
class SourceSpan:
    start: int
    end: int
    line: int
    column: int

    def __str__(self) -> str:
        return f"line {self.line}, column {self.column}"


class ParseError(LocfoError):
    def __init__(self, message: str, span: SourceSpan):
        super().__init__(f"{message} at {span}")
        self.span = span


class FormatError(LocfoError):
    """Malformed structure or domino JSON."""


# ---------------------------------------------------------------- lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<var>[a-z][a-zA-Z0-9_]*(?:\#[0-9]+)?)
  | (?P<comment>\#[^\n]*)
  | (?P<pred>[A-Z][a-zA-Z0-9_]*)
  | (?P<int>[0-9]+)
  | (?P<op>!=|[.()\[\]{}|&!=~:])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    span: SourceSpan


def _span(text: str, start: int, end: int) -> SourceSpan:
    line = text.count("\n", 0, start) + 1
    col = start - (text.rfind("\n", 0, start) + 1) + 1
    return SourceSpan(start, end, line, col)


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", _span(text, pos, pos + 1))
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            word = m.group()
            if kind == "var" and word in KEYWORDS:
                kind = word
            tokens.append(Token(kind, word, _span(text, m.start(), m.end())))
        pos = m.end()
    tokens.append(Token("eof", "", _span(text, len(text), len(text))))
    return tokens


# ---------------------------------------------------------------- parser


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = tokenize(text)
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, what: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind != kind and not (tok.kind == "op" and tok.text == kind):
            shown = tok.text or "end of input"
            raise ParseError(f"expected {what or kind!r}, found {shown!r}", tok.span)
        return self.next()

    def at_op(self, op: str) -> bool:
        tok = self.peek()
        return tok.kind == "op" and tok.text == op

    def var(self) -> str:
        tok = self.peek()
        if tok.kind in KEYWORDS:
            raise ParseError(f"reserved word {tok.text!r} used as a variable", tok.span)
        return self.expect("var", "variable").text

    def integer(self) -> int:
        return int(self.expect("int", "integer").text)

    def formula(self) -> Formula:
        tok = self.peek()
        if tok.kind in ("exists", "forall"):
            self.next()
            v = self.var()
            self.expect(".")
            body = self.formula()
            return Exists(v, body) if tok.kind == "exists" else Forall(v, body)
        if tok.kind == "atleast":
            self.next()
            self.expect("[")
            k_tok = self.peek()
            k = self.integer()
            if k < 1:
                raise ParseError("threshold must be at least 1", k_tok.span)
            self.expect("]")
            v = self.var()
            self.expect(".")
            return AtLeast(k, v, self.formula())
        return self.disjunction()

    def disjunction(self) -> Formula:
        args = [self.conjunction()]
        while self.at_op("|"):
            self.next()
            args.append(self.conjunction())
        return args[0] if len(args) == 1 else Or(tuple(args))

    def conjunction(self) -> Formula:
        args = [self.unary()]
        while self.at_op("&"):
            self.next()
            args.append(self.unary())
        return args[0] if len(args) == 1 else And(tuple(args))

    def unary(self) -> Formula:
        if self.at_op("!"):
            self.next()
            return Not(self.unary())
        if self.peek().kind in ("exists", "forall", "atleast"):
            return self.formula()
        return self.atom()

    def atom(self) -> Formula:
        tok = self.peek()
        if self.at_op("("):
            self.next()
            inner = self.formula()
            self.expect(")")
            return inner
        if tok.kind in ("true", "false"):
            self.next()
            return Const(tok.kind == "true")
        if tok.kind == "loc":
            self.next()
            self.expect("[")
            r = self.integer()
            self.expect("]")
            v = self.var()
            self.expect("{")
            body = self.formula()
            self.expect("}")
            return Local(v, r, body)
        if tok.kind == "pred":
            self.next()
            self.expect("(")
            v = self.var()
            self.expect(")")
            return Pred(tok.text, v)
        if tok.kind == "var":
            left = self.next().text
            if self.at_op("="):
                self.next()
                return Eq(left, self.var())
            if self.at_op("!="):
                self.next()
                return Not(Eq(left, self.var()))
            if self.at_op("~"):
                self.next()
                i = self.integer()
                self.expect(":")
                j = self.integer()
                return Rel(i, j, left, self.var())
            nxt = self.peek()
            raise ParseError(f"expected '=', '!=' or '~' after {left!r}", nxt.span)
        if tok.kind in KEYWORDS:
            raise ParseError(f"unexpected keyword {tok.text!r}", tok.span)
        shown = tok.text or "end of input"
        raise ParseError(f"unexpected {shown!r}", tok.span)


def parse_formula(text: str) -> Formula:
    p = _Parser(text)
    phi = p.formula()
    tok = p.peek()
    if tok.kind != "eof":
        raise ParseError(f"trailing input {tok.text!r}", tok.span)
    return phi


# ---------------------------------------------------------------- printer

_QUANT, _OR, _AND, _UNARY = 0, 1, 2, 3


def print_formula(phi: Formula) -> str:
    out: list[str] = []
    _emit(phi, _QUANT, out)
    return "".join(out)


def _emit(p: Formula, ctx: int, out: list[str]) -> None:
    if isinstance(p, (Exists, Forall, AtLeast)):
        wrap = ctx > _QUANT
        if wrap:
            out.append("(")
        if isinstance(p, AtLeast):
            out.append(f"atleast[{p.k}] {p.var}. ")
        else:
            out.append(f"{'exists' if isinstance(p, Exists) else 'forall'} {p.var}. ")
        _emit(p.body, _QUANT, out)
        if wrap:
            out.append(")")
    elif isinstance(p, (Or, And)):
        is_or = isinstance(p, Or)
        level = _OR if is_or else _AND
        wrap = ctx > level
        if wrap:
            out.append("(")
        sep = " | " if is_or else " & "
        for k, a in enumerate(p.args):
            if k:
                out.append(sep)
            _emit(a, level + 1, out)
        if wrap:
            out.append(")")
    elif isinstance(p, Not):
        if isinstance(p.body, Eq):
            out.append(f"{p.body.left} != {p.body.right}")
        else:
            out.append("!")
            _emit(p.body, _UNARY, out)
    elif isinstance(p, Pred):
        out.append(f"{p.name}({p.var})")
    elif isinstance(p, Eq):
        out.append(f"{p.left} = {p.right}")
    elif isinstance(p, Rel):
        out.append(f"{p.left} ~{p.i}:{p.j} {p.right}")
    elif isinstance(p, Local):
        out.append(f"loc[{p.radius}] {p.var} {{ ")
        _emit(p.body, _QUANT, out)
        out.append(" }")
    elif isinstance(p, Const):
        out.append("true" if p.value else "false")
    else:
        raise TypeError(f"not a formula: {p!r}")


# ---------------------------------------------------------------- structures


def structure_to_obj(A: DataStructure) -> dict:
    return {
        "sigma": list(A.sigma),
        "d": A.d,
        "elements": [
            {"id": eid, "labels": sorted(ls), "values": list(vs)} for eid, ls, vs in A.rows()
        ],
    }


def write_structure(A: DataStructure) -> str:
    for eid, _, vs in A.rows():
        if any(v > MAX_VALUE for v in vs):
            raise FormatError(f"element {eid!r} has a value above {MAX_VALUE}")
    return json.dumps(structure_to_obj(A), sort_keys=True)


def structure_from_obj(obj: object, gamma: Iterable[tuple[int, int]] | None = None) -> DataStructure:
    if not isinstance(obj, dict):
        raise FormatError("structure must be a JSON object")
    for key in ("sigma", "d", "elements"):
        if key not in obj:
            raise FormatError(f"missing key {key!r}")
    sigma, d, elements = obj["sigma"], obj["d"], obj["elements"]
    if not isinstance(sigma, list) or not all(isinstance(s, str) for s in sigma):
        raise FormatError("'sigma' must be a list of predicate names")
    if not isinstance(d, int) or isinstance(d, bool) or d < 0:
        raise FormatError("'d' must be a natural number")
    if not isinstance(elements, list):
        raise FormatError("'elements' must be a list")
    if not elements:
        raise FormatError("'elements' is empty; a structure needs a nonempty universe")
    try:
        sig = Signature(tuple(sigma), d, full_gamma(d) if gamma is None else frozenset(gamma))
    except LocfoError as exc:
        raise FormatError(str(exc)) from exc
    known = set(sigma)
    rows = []
    seen = set()
    for k, el in enumerate(elements):
        if not isinstance(el, dict):
            raise FormatError(f"element #{k} is not an object")
        eid = el.get("id")
        if not isinstance(eid, str) or not eid:
            raise FormatError(f"element #{k} has no string id")
        if eid in seen:
            raise FormatError(f"duplicate element id {eid!r}")
        seen.add(eid)
        labels = el.get("labels", [])
        values = el.get("values")
        if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
            raise FormatError(f"element {eid!r}: 'labels' must be a list of names")
        unknown = [x for x in labels if x not in known]
        if unknown:
            raise FormatError(f"element {eid!r}: unknown labels {unknown}")
        if not isinstance(values, list):
            raise FormatError(f"element {eid!r}: 'values' must be a list")
        if len(values) != d:
            raise FormatError(f"element {eid!r}: expected {d} values, got {len(values)}")
        for v in values:
            if not isinstance(v, int) or isinstance(v, bool) or not 0 <= v <= MAX_VALUE:
                raise FormatError(f"element {eid!r}: bad value {v!r}")
        rows.append((eid, labels, values))
    return DataStructure.build(sig, rows)


def read_structure(text: str, gamma: Iterable[tuple[int, int]] | None = None) -> DataStructure:
    """Parse structure JSON; ``gamma`` defaults to all pairs over 1..d."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from exc
    return structure_from_obj(obj, gamma)
