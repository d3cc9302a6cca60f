"""Deterministic numerical fingerprints.

Every expression is evaluated at 60 fixed x values (parameters fixed too) with
~50 significant digits, each value is rounded to 10 significant figures and
the joined strings are MD5-hashed.  Arithmetic is MPFR (via gmpy2) with traps
turned on, so a domain error, a division by zero or an exponent beyond
+/-10**6 aborts the evaluation immediately.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import gmpy2
from gmpy2 import mpfr

from .expr import Expr

MASK64 = (1 << 64) - 1
DEFAULT_SEED = 0x45534931
N_POINTS = 60
N_PARAMS = 16
X_RANGE = (0.2, 5.0)
PARAM_RANGE = (0.5, 3.0)

PRECISION_BITS = 170  # 51 significant decimal digits
# decimal exponent cap of 10**6, in bits
EXPONENT_CAP = 3321928
OP_BUDGET = 10**6
SIG_FIGS = 10
# add/sub results this many bits below their larger operand are rounding noise
_CANCEL_BITS = PRECISION_BITS - 8
# sin/cos of arguments beyond 2**_TRIG_ARG_BITS have no significant digits left
_TRIG_ARG_BITS = PRECISION_BITS - 4

OK = "ok"
DOMAIN_FAILURE = "domain_failure"
OVERFLOW_FAILURE = "overflow_failure"
BUDGET_EXCEEDED = "budget_exceeded"
STATUSES = (OK, DOMAIN_FAILURE, OVERFLOW_FAILURE, BUDGET_EXCEEDED)


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0**-53


@dataclass(frozen=True)
class EvaluationGrid:
    seed: int
    xs: tuple[float, ...]
    params: tuple[float, ...]


def make_grid(seed: int = DEFAULT_SEED) -> EvaluationGrid:
    rng = SplitMix64(seed)
    lo, hi = X_RANGE
    xs = tuple(lo + (hi - lo) * rng.next_float() for _ in range(N_POINTS))
    plo, phi = PARAM_RANGE
    params = tuple(plo + (phi - plo) * rng.next_float() for _ in range(N_PARAMS))
    return EvaluationGrid(seed & MASK64, xs, params)


@dataclass(frozen=True)
class FingerprintOutcome:
    status: str
    fingerprint: str | None = None
    failed_point: int | None = None

    @property
    def ok(self) -> bool:
        return self.status == OK


class EvaluationFailure(ArithmeticError):
    def __init__(self, status: str):
        super().__init__(status)
        self.status = status


def _context():
    return gmpy2.context(
        precision=PRECISION_BITS,
        emax=EXPONENT_CAP,
        emin=-EXPONENT_CAP,
        trap_invalid=True,
        trap_divzero=True,
        trap_overflow=True,
        trap_underflow=True,
    )


def round_canonical(v) -> str:
    """Render a real rounded half-even to 10 significant figures.

    >>> round_canonical(1)
    '1.000000000e+0'
    """
    with _context():
        v = mpfr(v)
        if not gmpy2.is_finite(v):
            raise ValueError("round_canonical needs a finite value")
        return _round(v)


def _round(v) -> str:
    if v == 0:
        return "0"
    digits, exp10, _ = v.digits(10, SIG_FIGS)
    sign = ""
    if digits[0] == "-":
        sign, digits = "-", digits[1:]
    return f"{sign}{digits[0]}.{digits[1:]}e{exp10 - 1:+d}"


def digest(rounded: Sequence[str]) -> str:
    return hashlib.md5("\n".join(rounded).encode("utf-8")).hexdigest()


def _addsub(r, u, v):
    if r and u and v and max(gmpy2.get_exp(u), gmpy2.get_exp(v)) - gmpy2.get_exp(r) > _CANCEL_BITS:
        return _ZERO
    return r


def _trig_arg(v):
    if v and gmpy2.get_exp(v) > _TRIG_ARG_BITS:
        raise gmpy2.OverflowResultError("trig argument beyond working precision")
    return v


_MPFR_ERRORS = (
    gmpy2.InvalidOperationError,
    gmpy2.DivisionByZeroError,
    gmpy2.OverflowResultError,
    gmpy2.UnderflowResultError,
    gmpy2.RangeError,
)


def _classify(exc: BaseException) -> str:
    if isinstance(exc, (gmpy2.OverflowResultError, gmpy2.UnderflowResultError)):
        return OVERFLOW_FAILURE
    return DOMAIN_FAILURE


with _context():
    _ZERO = mpfr(0)
    _ONE = mpfr(1)


class Evaluator:
    """Vectorised evaluator bound to one grid.

    Values of subtrees are memoised by serialized form; the memo is purely a
    cache and never changes a result.
    """

    def __init__(self, grid: EvaluationGrid, xs: Sequence[float] | None = None, memo_limit: int = 40000):
        self.grid = grid
        with _context():
            self._xs = [mpfr(x) for x in (grid.xs if xs is None else xs)]
            self._params = [[mpfr(p)] * len(self._xs) for p in grid.params]
        self.n = len(self._xs)
        self._memo: dict[str, object] = {}
        self.memo_limit = memo_limit

    def values(self, e: Expr) -> list:
        """Values at every point, or raise EvaluationFailure."""
        if e.size * self.n > OP_BUDGET:
            raise EvaluationFailure(BUDGET_EXCEEDED)
        with _context():
            return self._eval(e)

    def _eval(self, e: Expr) -> list:
        key = e._str
        memo = self._memo
        hit = memo.get(key)
        if hit is not None:
            if isinstance(hit, str):
                raise EvaluationFailure(hit)
            return hit
        op = e.op
        if op == "x":
            return self._xs
        if op == "a":
            return self._params[e.index]
        try:
            out = self._apply(e, op)
        except _MPFR_ERRORS as exc:
            status = _classify(exc)
            self._remember(key, status)
            raise EvaluationFailure(status) from None
        self._remember(key, out)
        return out

    def _remember(self, key: str, value) -> None:
        if not self.memo_limit:
            return
        if len(self._memo) >= self.memo_limit:
            self._memo.clear()
        self._memo[key] = value

    def _apply(self, e: Expr, op: str) -> list:
        n = self.n
        if op == "ONE":
            return [_ONE] * n
        if op == "ZERO":
            return [_ZERO] * n
        a = self._eval(e.args[0])
        if len(e.args) == 1:
            if op == "inv":
                return [_ONE / u for u in a]
            if op == "log":
                return [gmpy2.log(u) for u in a]
            if op == "exp":
                return [gmpy2.exp(u) for u in a]
            if op == "sqrt":
                return [gmpy2.sqrt(u) for u in a]
            if op == "sq":
                return [gmpy2.square(u) for u in a]
            if op == "sin":
                return [gmpy2.sin(_trig_arg(u)) for u in a]
            if op == "cos":
                return [gmpy2.cos(_trig_arg(u)) for u in a]
            if op == "abs":
                return [abs(u) for u in a]
            raise ValueError(f"cannot evaluate {op!r}")
        b = self._eval(e.args[1])
        if op == "add":
            return [_addsub(u + v, u, v) for u, v in zip(a, b)]
        if op == "sub":
            return [_addsub(u - v, u, v) for u, v in zip(a, b)]
        if op == "mul":
            return [u * v for u, v in zip(a, b)]
        if op == "div":
            return [u / v for u, v in zip(a, b)]
        if op == "pow":
            return [u**v for u, v in zip(a, b)]
        raise ValueError(f"cannot evaluate {op!r}")

    def fingerprint(self, e: Expr, locate_failure: bool = False) -> FingerprintOutcome:
        try:
            vals = self.values(e)
        except EvaluationFailure as exc:
            point = self.locate_failure(e) if locate_failure and exc.status != BUDGET_EXCEEDED else None
            return FingerprintOutcome(exc.status, None, point)
        rounded = [_round(v) for v in vals]
        return FingerprintOutcome(OK, digest(rounded))

    def pointwise(self, e: Expr) -> list:
        """Per-point values with None where that point fails."""
        out = []
        for i in range(self.n):
            single = Evaluator(self.grid, xs=[self.grid_x(i)], memo_limit=0)
            try:
                out.append(single.values(e)[0])
            except EvaluationFailure:
                out.append(None)
        return out

    def grid_x(self, i: int) -> float:
        return float(self._xs[i])

    def locate_failure(self, e: Expr) -> int | None:
        for i, v in enumerate(self.pointwise(e)):
            if v is None:
                return i
        return None


def evaluate(e: Expr, grid: EvaluationGrid) -> FingerprintOutcome:
    """Fingerprint ``e`` on ``grid`` (convenience wrapper, no shared memo)."""
    return Evaluator(grid, memo_limit=0).fingerprint(e, locate_failure=True)
