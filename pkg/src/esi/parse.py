"""Reader for the prefix serialization and for human infix input.

Both notations share one Pratt parser: ``add(a0,x)`` is just a call, and
``a0 + x`` an infix operator.  Numeric literals exist only in the infix
surface; they are expanded into sums/products of ``ONE`` so that every parsed
expression stays inside the literal-free tree language.
"""
from __future__ import annotations

import re
from fractions import Fraction
from typing import Iterable

from .expr import ARITY, ONE, X, ZERO, Expr, OperatorBasis, param

ALIASES = {"ln": "log"}

_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d*)?|\.\d+)|([A-Za-z_][A-Za-z0-9_]*)|(\*\*|[-+*/^(),|]))")


class ParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class OperatorNotInBasis(ValueError):
    def __init__(self, operator: str, basis: str):
        super().__init__(f"operator {operator!r} is not in basis {basis}")
        self.operator = operator


def _tokenize(s: str) -> list[tuple[str, str, int]]:
    out = []
    pos = 0
    while pos < len(s):
        if s[pos:].strip() == "":
            break
        m = _TOKEN.match(s, pos)
        if not m:
            while s[pos].isspace():
                pos += 1
            raise ParseError(f"unexpected character {s[pos]!r}", pos)
        start = m.start(m.lastindex)
        if m.group(1) is not None:
            out.append(("num", m.group(1), start))
        elif m.group(2) is not None:
            out.append(("name", m.group(2), start))
        else:
            out.append(("op", m.group(3), start))
        pos = m.end()
    out.append(("end", "", len(s)))
    return out


def integer_expr(n: int) -> Expr:
    """Positive integer built from ONE with O(log n) nodes."""
    if n <= 0:
        raise ValueError("integer_expr needs n >= 1")
    if n == 1:
        return ONE
    two = Expr("add", (ONE, ONE))
    if n == 2:
        return two
    if n % 2:
        return Expr("add", (integer_expr(n - 1), ONE))
    return Expr("mul", (two, integer_expr(n // 2)))


def number_expr(text: str) -> Expr:
    value = Fraction(text)
    if value == 0:
        return ZERO
    num = integer_expr(value.numerator)
    if value.denominator == 1:
        return num
    return Expr("div", (num, integer_expr(value.denominator)))


_INFIX = {"+": (10, "add"), "-": (10, "sub"), "*": (20, "mul"), "/": (20, "div"), "^": (40, "pow"), "**": (40, "pow")}
_PREFIX_BP = 30


class _Parser:
    def __init__(self, text: str, allowed: frozenset[str] | None, basis_name: str):
        self.tokens = _tokenize(text)
        self.i = 0
        self.allowed = allowed
        self.basis_name = basis_name

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if text != value or kind != "op":
            raise ParseError(f"expected {value!r}, found {text or 'end of input'!r}", pos)

    def build(self, op: str, args: tuple[Expr, ...]) -> Expr:
        if self.allowed is not None and op not in self.allowed:
            raise OperatorNotInBasis(op, self.basis_name)
        return Expr(op, args)

    def expression(self, rbp: int = 0) -> Expr:
        left = self.prefix()
        while True:
            kind, text, pos = self.peek()
            if kind != "op" or text not in _INFIX:
                return left
            lbp, op = _INFIX[text]
            if lbp <= rbp:
                return left
            self.take()
            # ^ is right-associative
            right = self.expression(lbp - 1 if op == "pow" else lbp)
            left = self.build(op, (left, right))

    def prefix(self) -> Expr:
        kind, text, pos = self.take()
        if kind == "num":
            return number_expr(text)
        if kind == "op":
            if text == "(":
                inner = self.expression()
                self.expect(")")
                return inner
            if text == "|":
                inner = self.expression()
                self.expect("|")
                return self.build("abs", (inner,))
            if text == "-":
                operand = self.expression(_PREFIX_BP)
                return self.build("sub", (ZERO, operand))
            if text == "+":
                return self.expression(_PREFIX_BP)
            raise ParseError(f"unexpected {text!r}", pos)
        if kind == "name":
            return self.name(text, pos)
        raise ParseError("unexpected end of input", pos)

    def name(self, text: str, pos: int) -> Expr:
        if text == "x":
            return X
        if text == "ONE":
            return ONE
        if text == "ZERO":
            return ZERO
        m = re.fullmatch(r"a(\d+)", text)
        if m:
            try:
                return param(int(m.group(1)))
            except IndexError:
                raise ParseError(f"parameter {text} out of range", pos) from None
        op = ALIASES.get(text, text)
        if op not in ARITY or ARITY[op] == 0 or op in ("x", "a"):
            raise ParseError(f"unknown name {text!r}", pos)
        if self.peek()[1] != "(":
            raise ParseError(f"expected '(' after {text!r}", self.peek()[2])
        self.take()
        args = [self.expression()]
        while self.peek()[1] == ",":
            self.take()
            args.append(self.expression())
        self.expect(")")
        if len(args) != ARITY[op]:
            raise ParseError(f"{op} takes {ARITY[op]} argument(s), got {len(args)}", pos)
        return self.build(op, tuple(args))


def parse(text: str, basis: OperatorBasis | Iterable[str] | None = None) -> Expr:
    """Parse prefix or infix text.

    ``basis`` restricts the operators accepted: an ``OperatorBasis`` (its
    grammar), an explicit collection of operator names, or ``None`` for all.
    The constant leaves ONE/ZERO and the arithmetic built from numeric literals
    are always accepted.
    """
    if basis is None:
        allowed, name = None, "all"
    elif isinstance(basis, OperatorBasis):
        allowed, name = basis.operators, basis.name
    else:
        allowed = frozenset(basis)
        name = "{" + ",".join(sorted(allowed)) + "}"
    p = _Parser(text, allowed, name)
    if p.peek()[0] == "end":
        raise ParseError("empty input", 0)
    e = p.expression()
    kind, tok, pos = p.peek()
    if kind != "end":
        raise ParseError(f"unexpected {tok!r}", pos)
    return e
