"""Algebraic perception metrics over thematic distributions.

Grammar (standard precedence, left associative):

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | NUMBER | IDENT | '(' expr ')'

Identifiers must name components of the thematic vector. Division is
guarded: denominators with magnitude below 1e-9 are replaced by a
sign-preserving 1e-9 so metrics stay finite and directional when an
optimizer drives a denominator through zero.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

DIV_GUARD = 1e-9

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[+\-*/()]))"
)


class MetricParseError(ValueError):
    """Parse failure with the byte offset of the offending token."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Ref:
    index: int
    name: str


@dataclass(frozen=True)
class Neg:
    child: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


Expr = Num | Ref | Neg | BinOp


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise MetricParseError(f"unexpected character {stripped[0]!r}", len(text) - len(stripped))
        if m.lastgroup == "num":
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.lastgroup == "ident":
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    return tokens


def parse(text: str, component_names) -> Expr:
    """Parse a metric expression over the given component names."""
    if not text or not text.strip():
        raise MetricParseError("empty expression", 0)
    names = list(component_names)
    index = {n: i for i, n in enumerate(names)}
    tokens = _tokenize(text)
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else ("end", "", len(text))

    def take():
        nonlocal pos
        tok = peek()
        pos += 1
        return tok

    def parse_expr() -> Expr:
        node = parse_term()
        while peek()[:2] in (("op", "+"), ("op", "-")):
            op = take()[1]
            node = BinOp(op, node, parse_term())
        return node

    def parse_term() -> Expr:
        node = parse_factor()
        while peek()[:2] in (("op", "*"), ("op", "/")):
            op = take()[1]
            node = BinOp(op, node, parse_factor())
        return node

    def parse_factor() -> Expr:
        kind, text_, off = peek()
        if kind == "op" and text_ == "-":
            take()
            return Neg(parse_factor())
        if kind == "num":
            take()
            return Num(float(text_))
        if kind == "ident":
            take()
            if text_ not in index:
                raise MetricParseError(f"unknown component {text_!r}", off)
            return Ref(index[text_], text_)
        if kind == "op" and text_ == "(":
            take()
            node = parse_expr()
            kind2, text2, off2 = peek()
            if not (kind2 == "op" and text2 == ")"):
                raise MetricParseError("expected ')'", off2)
            take()
            return node
        raise MetricParseError(
            "expected a number, component name, or '('" if kind != "end" else "missing operand",
            off,
        )

    node = parse_expr()
    kind, text_, off = peek()
    if kind != "end":
        raise MetricParseError(f"unexpected trailing token {text_!r}", off)
    return node


def _guard(den: float) -> float:
    if abs(den) >= DIV_GUARD:
        return den
    return DIV_GUARD if den >= 0.0 else -DIV_GUARD


def evaluate(expr: Expr, m) -> float:
    """Evaluate the metric at a thematic vector."""
    m = np.asarray(m, dtype=np.float64)
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Ref):
        return float(m[expr.index])
    if isinstance(expr, Neg):
        return -evaluate(expr.child, m)
    a, b = evaluate(expr.left, m), evaluate(expr.right, m)
    if expr.op == "+":
        return a + b
    if expr.op == "-":
        return a - b
    if expr.op == "*":
        return a * b
    return a / _guard(b)


def value_and_grad(expr: Expr, m) -> tuple[float, np.ndarray]:
    """Metric value and its gradient with respect to the components.

    The quotient rule is applied with the guarded denominator, matching
    evaluate exactly.
    """
    m = np.asarray(m, dtype=np.float64)
    k = m.shape[0]

    def rec(e: Expr) -> tuple[float, np.ndarray]:
        if isinstance(e, Num):
            return e.value, np.zeros(k)
        if isinstance(e, Ref):
            g = np.zeros(k)
            g[e.index] = 1.0
            return float(m[e.index]), g
        if isinstance(e, Neg):
            v, g = rec(e.child)
            return -v, -g
        va, ga = rec(e.left)
        vb, gb = rec(e.right)
        if e.op == "+":
            return va + vb, ga + gb
        if e.op == "-":
            return va - vb, ga - gb
        if e.op == "*":
            return va * vb, ga * vb + va * gb
        d = _guard(vb)
        return va / d, (ga * d - va * gb) / (d * d)

    return rec(expr)


def gradient(expr: Expr, m) -> np.ndarray:
    return value_and_grad(expr, m)[1]


_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_source(expr: Expr) -> str:
    """Render an expression; parse(to_source(e)) == e for parsed trees."""

    def rec(e: Expr, parent_prec: int, right_side: bool) -> str:
        if isinstance(e, Num):
            return repr(e.value)
        if isinstance(e, Ref):
            return e.name
        if isinstance(e, Neg):
            inner = rec(e.child, 3, False)
            s = f"-{inner}"
            return f"({s})" if parent_prec > 0 else s
        prec = _PRECEDENCE[e.op]
        s = f"{rec(e.left, prec, False)} {e.op} {rec(e.right, prec, True)}"
        # left associativity: a - (b - c) needs parens, (a - b) - c does not
        if prec < parent_prec or (prec == parent_prec and right_side):
            return f"({s})"
        return s

    return rec(expr, 0, False)


@dataclass(frozen=True)
class PerceptionMetric:
    """A named, compiled metric expression."""

    name: str
    source: str
    expr: Expr
    component_names: tuple[str, ...]

    @staticmethod
    def compile(name: str, source: str, component_names) -> "PerceptionMetric":
        names = tuple(component_names)
        return PerceptionMetric(name, source, parse(source, names), names)

    def __call__(self, m) -> float:
        return evaluate(self.expr, m)

    def grad(self, m) -> np.ndarray:
        return gradient(self.expr, m)
