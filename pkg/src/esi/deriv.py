"""Symbolic differentiation with respect to x.

The tree language has no numeric literals, so constants produced by the rules
are kept structural: a zero contribution is dropped (``None`` internally), a
unit factor is dropped, ``2*t`` becomes ``add(t,t)`` and ``-t`` is
``sub(ZERO,t)``.  A derivative that is identically 1 or 0 is the leaf ``ONE``
or ``ZERO``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .expr import ONE, ZERO, Expr, canonicalize
from .fingerprint import Evaluator


def _is_neg(e: Expr) -> bool:
    return e.op == "sub" and e.args[0].op == "ZERO"


def _neg(a):
    if a is None:
        return None
    if _is_neg(a):
        return a.args[1]
    return Expr("sub", (ZERO, a))


def _add(a, b):
    if a is None:
        return b
    if b is None:
        return a
    if _is_neg(b):
        return _sub(a, b.args[1])
    if _is_neg(a):
        return _sub(b, a.args[1])
    return Expr("add", (a, b))


def _sub(a, b):
    if b is None:
        return a
    if a is None:
        return _neg(b)
    if _is_neg(b):
        return _add(a, b.args[1])
    if _is_neg(a):
        return _neg(_add(a.args[1], b))
    if a == b:
        return None
    return Expr("sub", (a, b))


def _mul(a, b):
    if a is None or b is None:
        return None
    if _is_neg(a) or _is_neg(b):
        return _neg(_mul(_neg(a) if _is_neg(a) else a, _neg(b) if _is_neg(b) else b))
    if a.op == "ONE":
        return b
    if b.op == "ONE":
        return a
    return Expr("mul", (a, b))


def _div(a, b):
    if a is None:
        return None
    if _is_neg(a) or _is_neg(b):
        return _neg(_div(_neg(a) if _is_neg(a) else a, _neg(b) if _is_neg(b) else b))
    if b.op == "ONE":
        return a
    if a.op == "ONE":
        return Expr("inv", (b,))
    return Expr("div", (a, b))


def _double(t):
    if t is None:
        return None
    if _is_neg(t):
        return _neg(_double(t.args[1]))
    return Expr("add", (t, t))


def _log_derivative(f: Expr, d) -> Expr | None:
    """f'/f, using (|h|)'/|h| = h'/h for abs wrappers."""
    if f.op == "abs":
        inner = f.args[0]
        return _div(d(inner), inner)
    return _div(d(f), f)


def _derive(e: Expr, cache: dict) -> Expr | None:
    key = e._str
    if key in cache:
        return cache[key]

    def d(t: Expr):
        return _derive(t, cache)

    op = e.op
    if op == "x":
        out = ONE
    elif op in ("a", "ONE", "ZERO"):
        out = None
    elif e.x_free:
        out = None
    elif op == "inv":
        f = e.args[0]
        out = _neg(_div(d(f), Expr("mul", (f, f))))
    elif op == "log":
        out = _log_derivative(e.args[0], d)
    elif op == "exp":
        out = _mul(d(e.args[0]), e)
    elif op == "sqrt":
        out = _div(d(e.args[0]), _double(e))
    elif op == "sq":
        f = e.args[0]
        out = _double(_mul(f, d(f)))
    elif op == "sin":
        f = e.args[0]
        out = _mul(d(f), Expr("cos", (f,)))
    elif op == "cos":
        f = e.args[0]
        out = _neg(_mul(d(f), Expr("sin", (f,))))
    elif op == "abs":
        f = e.args[0]
        out = _mul(Expr("div", (f, e)), d(f))
    elif op == "add":
        out = _add(d(e.args[0]), d(e.args[1]))
    elif op == "sub":
        out = _sub(d(e.args[0]), d(e.args[1]))
    elif op == "mul":
        f, g = e.args
        out = _add(_mul(d(f), g), _mul(f, d(g)))
    elif op == "div":
        f, g = e.args
        dg = d(g)
        if dg is None:
            out = _div(d(f), g)
        else:
            out = _div(_sub(_mul(d(f), g), _mul(f, dg)), Expr("mul", (g, g)))
    elif op == "pow":
        f, g = e.args
        term = _add(_mul(d(g), Expr("log", (f,))), _mul(g, _log_derivative(f, d)))
        out = _mul(e, term)
    else:
        raise ValueError(f"cannot differentiate {op!r}")
    cache[key] = out
    return out


def differentiate(e: Expr) -> Expr:
    """d e/dx, canonicalized without renumbering parameters."""
    out = _derive(e, {})
    return canonicalize(out if out is not None else ZERO, renumber_params=False)


@dataclass(frozen=True)
class DerivativeRecord:
    source: Expr
    derivative: Expr
    derivative_complexity: int


def derivative_record(e: Expr) -> DerivativeRecord:
    d = differentiate(e)
    return DerivativeRecord(e, d, d.complexity)


def min_complexity_of_derivative(
    e: Expr, min_complexity: Mapping[str, int], evaluator: Evaluator
) -> tuple[int, bool]:
    """Smallest catalogue complexity of e' and whether it was matched.

    Unmatched (or unevaluable) derivatives fall back to the complexity of the
    symbolic derivative, an upper bound.
    """
    d = differentiate(e)
    out = evaluator.fingerprint(d)
    if out.ok and out.fingerprint in min_complexity:
        return min_complexity[out.fingerprint], True
    return d.complexity, False
