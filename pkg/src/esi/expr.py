"""Expression trees, operator bases and canonical forms.

Expressions are immutable trees whose leaves are the variable ``x`` or free
parameters ``a0 .. a15``.  Derivatives may additionally contain the constant
leaves ``ONE`` and ``ZERO``; they never appear in enumerated functions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

MAX_PARAMS = 16

LEAF_KINDS = ("x", "a", "ONE", "ZERO")
UNARY_KINDS = ("inv", "log", "exp", "sqrt", "sq", "sin", "cos", "abs")
BINARY_KINDS = ("add", "sub", "mul", "div", "pow")
COMMUTATIVE = frozenset({"add", "mul"})

ARITY = {**{k: 0 for k in LEAF_KINDS}, **{k: 1 for k in UNARY_KINDS}, **{k: 2 for k in BINARY_KINDS}}


@dataclass(frozen=True)
class Operator:
    name: str
    arity: int
    kind: str

    def __post_init__(self):
        if ARITY.get(self.kind) != self.arity:
            raise ValueError(f"operator {self.name!r}: arity {self.arity} does not match kind {self.kind!r}")


OPERATORS = {
    "x": Operator("x", 0, "x"),
    "a": Operator("a", 0, "a"),
    **{k: Operator(k, 1, k) for k in UNARY_KINDS},
    **{k: Operator(k, 2, k) for k in BINARY_KINDS},
}


class Expr:
    """Immutable expression node.

    Equality and hashing go through the serialized form, so two nodes are equal
    iff they are the same tree.  ``complexity`` is the node count with ``abs``
    nodes costing nothing.
    """

    __slots__ = ("op", "args", "index", "_str", "complexity", "size", "x_free", "_shape")

    def __init__(self, op: str, args: tuple = (), index: int = 0):
        self.op = op
        self.args = args
        self.index = index
        if not args:
            if op == "a":
                if not 0 <= index < MAX_PARAMS:
                    raise ValueError(f"parameter index {index} outside 0..{MAX_PARAMS - 1}")
                self._str = f"a{index}"
            else:
                self._str = op
            self.complexity = 1
            self.size = 1
            self.x_free = op != "x"
        else:
            self._str = f"{op}({','.join(c._str for c in args)})"
            self.complexity = (op != "abs") + sum(c.complexity for c in args)
            self.size = 1 + sum(c.size for c in args)
            self.x_free = all(c.x_free for c in args)
        self._shape = None

    def __str__(self) -> str:
        return self._str

    def __repr__(self) -> str:
        return f"Expr({self._str!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Expr) and self._str == other._str

    def __hash__(self) -> int:
        return hash(self._str)

    def __lt__(self, other: "Expr") -> bool:
        return self._str < other._str

    @property
    def shape(self) -> str:
        """Serialization with every parameter rendered as a bare ``a``."""
        if self._shape is None:
            if self.op == "a":
                self._shape = "a"
            elif not self.args:
                self._shape = self._str
            else:
                self._shape = f"{self.op}({','.join(c.shape for c in self.args)})"
        return self._shape

    @property
    def is_leaf(self) -> bool:
        return not self.args

    def walk(self) -> Iterator["Expr"]:
        """Pre-order traversal (left to right)."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.args))

    def params(self) -> list[int]:
        """Parameter indices in first-use order."""
        seen: dict[int, None] = {}
        for node in self.walk():
            if node.op == "a":
                seen.setdefault(node.index, None)
        return list(seen)


X = Expr("x")
ONE = Expr("ONE")
ZERO = Expr("ZERO")
_PARAMS = tuple(Expr("a", (), i) for i in range(MAX_PARAMS))


def param(i: int) -> Expr:
    if not 0 <= i < MAX_PARAMS:
        raise IndexError(f"parameter index {i} outside 0..{MAX_PARAMS - 1}")
    return _PARAMS[i]


def node(op: str, *args: Expr) -> Expr:
    if op not in ARITY:
        raise ValueError(f"unknown operator {op!r}")
    if ARITY[op] != len(args):
        raise ValueError(f"{op} takes {ARITY[op]} argument(s), got {len(args)}")
    return Expr(op, tuple(args))


@dataclass(frozen=True)
class OperatorBasis:
    name: str
    unary_ops: tuple[str, ...]
    binary_ops: tuple[str, ...] = BINARY_KINDS
    abs_policy: str = "wrap"
    p0: int = field(default=2, init=False)

    def __post_init__(self):
        if self.abs_policy not in ("none", "wrap"):
            raise ValueError(f"abs_policy must be 'none' or 'wrap', not {self.abs_policy!r}")
        for op in self.unary_ops:
            if op not in UNARY_KINDS or op == "abs":
                raise ValueError(f"not a basis unary operator: {op!r}")
        for op in self.binary_ops:
            if op not in BINARY_KINDS:
                raise ValueError(f"not a binary operator: {op!r}")

    @property
    def p1(self) -> int:
        return len(self.unary_ops)

    @property
    def p2(self) -> int:
        return len(self.binary_ops)

    @property
    def operators(self) -> frozenset[str]:
        ops = {"x", "a", *self.unary_ops, *self.binary_ops}
        if self.abs_policy == "wrap":
            ops.add("abs")
        return frozenset(ops)

    def derivative_operators(self) -> frozenset[str]:
        """Operators that can appear in derivatives of this basis' functions."""
        ops = set(self.operators) | {"inv", "abs", "add", "sub", "mul", "div"}
        if "pow" in self.binary_ops:
            ops.add("log")
        if "sin" in ops or "cos" in ops:
            ops |= {"sin", "cos"}
        return frozenset(ops)

    def with_policy(self, abs_policy: str) -> "OperatorBasis":
        return OperatorBasis(self.name, self.unary_ops, self.binary_ops, abs_policy)


BASES = {
    "core_maths": OperatorBasis("core_maths", ("inv",)),
    "core_log_maths": OperatorBasis("core_log_maths", ("inv", "log")),
    "ext_maths": OperatorBasis("ext_maths", ("inv", "sqrt", "sq", "exp")),
    "ext_log_maths": OperatorBasis("ext_log_maths", ("inv", "sqrt", "sq", "exp", "log")),
    "trig_maths": OperatorBasis("trig_maths", ("inv", "sin", "cos")),
}


def get_basis(name: str, abs_policy: str | None = None) -> OperatorBasis:
    """Look up a basis by full (``ext_log_maths``) or short (``ext_log``) name."""
    key = name if name in BASES else f"{name}_maths"
    if key not in BASES:
        raise KeyError(f"unknown basis {name!r}; choose from {', '.join(BASES)}")
    basis = BASES[key]
    return basis if abs_policy is None else basis.with_policy(abs_policy)


def complexity(e: Expr) -> int:
    return e.complexity


def serialize(e: Expr) -> str:
    return e._str


def contains_ops(e: Expr, kinds: Iterable[str]) -> bool:
    # every operator name is followed by "(" and none is a suffix of another
    s = e._str
    return any(f"{k}(" in s for k in kinds)


def renumber(e: Expr) -> Expr:
    """Relabel parameters to 0, 1, 2, ... in first-use order."""
    order = e.params()
    if order == list(range(len(order))):
        return e
    mapping = {old: new for new, old in enumerate(order)}
    return _relabel(e, mapping)


def _relabel(e: Expr, mapping: dict[int, int]) -> Expr:
    if e.op == "a":
        return param(mapping[e.index])
    if not e.args:
        return e
    return Expr(e.op, tuple(_relabel(c, mapping) for c in e.args))


def number_fresh(e: Expr) -> Expr:
    """Give every parameter leaf its own index, left to right."""
    counter = iter(range(MAX_PARAMS))

    def go(n: Expr) -> Expr:
        if n.op == "a":
            try:
                return param(next(counter))
            except StopIteration:
                raise ValueError(f"more than {MAX_PARAMS} parameters") from None
        if not n.args:
            return n
        return Expr(n.op, tuple(go(c) for c in n.args))

    return go(e)


def _order_key(e: Expr) -> tuple[str, str]:
    return (e.shape, e._str)


def _sort_pass(e: Expr) -> Expr:
    if not e.args:
        return e
    args = tuple(_sort_pass(c) for c in e.args)
    if e.op == "inv" and args[0].op == "inv":
        return args[0].args[0]
    if e.op in COMMUTATIVE and _order_key(args[1]) < _order_key(args[0]):
        args = (args[1], args[0])
    if all(a is b for a, b in zip(args, e.args)):
        return e
    return Expr(e.op, args)


def canonicalize(e: Expr, renumber_params: bool = True) -> Expr:
    """Commutative sort, ``inv(inv(f)) -> f`` and first-use parameter order.

    add/mul children are ordered by their parameter-anonymous serialization,
    ties broken by the full serialization.  With ``renumber_params=False`` the
    result is pointwise equal to ``e``.
    """
    cur = e
    for _ in range(8):
        nxt = _sort_pass(cur)
        if renumber_params:
            nxt = renumber(nxt)
        if nxt == cur:
            return cur
        cur = nxt
    return cur


_POSITIVE_HEADS = frozenset({"x", "exp", "sqrt", "sq", "abs", "ONE"})


def is_nonnegative(e: Expr) -> bool:
    """Conservative sign test on the positive-x domain (parameters are real)."""
    if e.op in _POSITIVE_HEADS:
        return True
    if e.op == "pow":
        return e.args[0].op == "abs" or is_nonnegative(e.args[0])
    if e.op in ("add", "mul", "div"):
        return all(is_nonnegative(c) for c in e.args)
    if e.op == "inv":
        return is_nonnegative(e.args[0])
    return False


def wrap_abs(e: Expr) -> Expr:
    """Guard an argument of log/sqrt or a pow base unless it is provably >= 0."""
    return e if is_nonnegative(e) else Expr("abs", (e,))


def strip_wrappers(e: Expr) -> Expr:
    """Remove abs nodes sitting directly under log, sqrt, or as a pow base."""
    if not e.args:
        return e
    args = tuple(strip_wrappers(c) for c in e.args)
    if e.op in ("log", "sqrt", "pow"):
        base = args[0]
        while base.op == "abs":  # stacked guards all go
            base = base.args[0]
        args = (base,) + args[1:]
    if all(a is b for a, b in zip(args, e.args)):
        return e
    return Expr(e.op, args)


# -- infix rendering ---------------------------------------------------------

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "inv": 2, "neg": 3, "pow": 4, "sq": 4}
_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}
_MMA_NAMES = {"log": "Log", "exp": "Exp", "sqrt": "Sqrt", "sin": "Sin", "cos": "Cos", "abs": "Abs"}


def _is_neg(e: Expr) -> bool:
    return e.op == "sub" and e.args[0].op == "ZERO"


def _prec(e: Expr) -> int:
    if _is_neg(e):
        return _PREC["neg"]
    return _PREC.get(e.op, 5)


def to_infix(e: Expr, syntax: str = "infix-caret") -> str:
    """Render with minimal parentheses.

    ``infix-caret`` uses ``log(x)`` style calls; ``functional`` uses
    bracketed ``Log[x]`` calls as accepted by Mathematica-like engines.
    """
    if syntax not in ("infix-caret", "functional"):
        raise ValueError(f"unknown syntax {syntax!r}")
    mma = syntax == "functional"

    def call(name: str, inner: Expr) -> str:
        if mma:
            return f"{_MMA_NAMES[name]}[{go(inner)}]"
        return f"{name}({go(inner)})"

    def wrap(child: Expr, need: bool) -> str:
        s = go(child)
        return f"({s})" if need else s

    def go(n: Expr) -> str:
        op = n.op
        if op == "x":
            return "x"
        if op == "a":
            return f"a{n.index}"
        if op == "ONE":
            return "1"
        if op == "ZERO":
            return "0"
        if _is_neg(n):
            t = n.args[1]
            return "-" + wrap(t, _prec(t) <= _PREC["neg"] and t.args != ())
        if op == "inv":
            c = n.args[0]
            return "1/" + wrap(c, _prec(c) <= _PREC["pow"] and bool(c.args))
        if op == "sq":
            c = n.args[0]
            return wrap(c, _prec(c) <= _PREC["pow"] and bool(c.args)) + "^2"
        if op in _MMA_NAMES:
            return call(op, n.args[0])
        left, right = n.args
        p = _PREC[op]
        if op == "pow":
            return (wrap(left, _prec(left) <= p and bool(left.args)) + "^"
                    + wrap(right, _prec(right) <= p and bool(right.args)))
        lneed = _prec(left) < p or _is_neg(left)
        rneed = _prec(right) < p or _is_neg(right) or (op in ("sub", "div") and _prec(right) == p)
        return f"{wrap(left, lneed)}{_SYMBOL[op]}{wrap(right, rneed)}"

    return go(e)
