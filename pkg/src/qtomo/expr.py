"""Tiny recursive-descent parser for time expressions such as ``1 + 0.1*cos(t)``.

Grammar (highest binding last)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | "t" | FUNC "(" expr ")" | "(" expr ")"
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


class ExpressionError(ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


def _tokenize(src: str):
    pos = 0
    tokens = []
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m:
            bad = pos + len(src[pos:]) - len(src[pos:].lstrip())
            raise ExpressionError(f"unexpected character {src[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src):
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, offset = self.peek()
        if text != value or kind != "op":
            raise ExpressionError(f"expected {value!r}", offset)
        self.take()

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, text, offset = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text == "t":
                return Var()
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            raise ExpressionError(f"unknown identifier {text!r}", offset)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise ExpressionError("missing operand", offset)
        raise ExpressionError(f"unexpected {text!r}", offset)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_NEG_PREC = 3


def _fmt(node) -> tuple[str, int]:
    if isinstance(node, Num):
        return repr(node.value), 5
    if isinstance(node, Var):
        return "t", 5
    if isinstance(node, Call):
        return f"{node.func}({_fmt(node.arg)[0]})", 5
    if isinstance(node, Neg):
        text, prec = _fmt(node.operand)
        if prec < _NEG_PREC:
            text = f"({text})"
        return f"-{text}", _NEG_PREC
    prec = _PREC[node.op]
    left, lp = _fmt(node.left)
    right, rp = _fmt(node.right)
    if node.op == "^":
        if lp <= prec:
            left = f"({left})"
        if rp < _NEG_PREC:
            right = f"({right})"
        return f"{left}^{right}", prec
    if lp < prec:
        left = f"({left})"
    if rp <= prec:
        right = f"({right})"
    return f"{left} {node.op} {right}", prec


def _eval(node, t):
    if isinstance(node, Num):
        return node.value + 0 * t
    if isinstance(node, Var):
        return t
    if isinstance(node, Neg):
        return -_eval(node.operand, t)
    if isinstance(node, Call):
        return FUNCTIONS[node.func](_eval(node.arg, t))
    a, b = _eval(node.left, t), _eval(node.right, t)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return a / b
    return a**b


@dataclass(frozen=True)
class TimeExpression:
    tree: object
    source: str = ""

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(all="ignore"):
            out = np.asarray(_eval(self.tree, t), dtype=float)
        return float(out) if out.ndim == 0 else out

    def __str__(self):
        return _fmt(self.tree)[0]

    def check_finite(self, t_start, t_end, samples=2001):
        t = np.linspace(t_start, t_end, samples)
        values = self(t)
        if not np.all(np.isfinite(values)):
            bad = t[~np.isfinite(values)][0]
            raise ValueError(f"expression {self} is not finite at t={bad:g}")


def parse_time_expression(src: str) -> TimeExpression:
    if not src or not src.strip():
        raise ExpressionError("empty expression", 0)
    parser = _Parser(src)
    tree = parser.expr()
    kind, text, offset = parser.peek()
    if kind != "end":
        if text == ")":
            raise ExpressionError("unbalanced ')'", offset)
        raise ExpressionError(f"unexpected {text!r}", offset)
    return TimeExpression(tree, src)


def constant(value: float) -> TimeExpression:
    return parse_time_expression(repr(float(value)))
