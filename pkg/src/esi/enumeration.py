"""Exhaustive tree generation and catalogue construction."""
from __future__ import annotations

import hashlib
import itertools
import os
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterable, Iterator

from .deriv import differentiate
from .expr import (
    COMMUTATIVE,
    X,
    Expr,
    OperatorBasis,
    _order_key,
    canonicalize,
    get_basis,
    number_fresh,
    wrap_abs,
)
from .fingerprint import (
    BUDGET_EXCEEDED,
    DEFAULT_SEED,
    DOMAIN_FAILURE,
    OK,
    OVERFLOW_FAILURE,
    EvaluationGrid,
    Evaluator,
    make_grid,
)
from .parse import parse

FORMAT_VERSION = "v1"
FAILURE_STATUSES = (DOMAIN_FAILURE, OVERFLOW_FAILURE, BUDGET_EXCEEDED)
_ANON = Expr("a", (), 0)


class CatalogueError(ValueError):
    pass


class CorruptCatalogue(CatalogueError):
    pass


class ConfigMismatch(CatalogueError):
    pass


# -- tree generation ----------------------------------------------------------


def raw_count(basis: OperatorBasis, k: int) -> int:
    """Number of raw trees with exactly k nodes (the grammar recurrence)."""
    counts = [0, basis.p0]
    for n in range(2, k + 1):
        counts.append(basis.p1 * counts[n - 1]
                      + basis.p2 * sum(counts[i] * counts[n - 1 - i] for i in range(1, n - 1)))
    return counts[k]


class TreeGenerator:
    """Canonical tree shapes per complexity, built bottom-up.

    Parameters are anonymous while shapes are built (every leaf is ``a0``) and
    numbered afresh, left to right, when a shape is handed out.
    """

    def __init__(self, basis: OperatorBasis, raw: bool = False):
        self.basis = basis
        self.raw = raw
        self.wrap = basis.abs_policy == "wrap"
        self._levels: dict[int, list[Expr]] = {1: [X, _ANON]}

    def level(self, k: int) -> list[Expr]:
        if k < 1:
            raise ValueError("complexity starts at 1")
        for n in range(2, k + 1):
            if n not in self._levels:
                self._levels[n] = self._build(n)
        return self._levels[k]

    def forget(self, k: int) -> None:
        self._levels.pop(k, None)

    def _unary(self, op: str, c: Expr) -> Expr | None:
        if not self.raw and op == "inv" and c.op == "inv":
            return None
        if self.wrap and op in ("log", "sqrt"):
            c = wrap_abs(c)
        return Expr(op, (c,))

    def _binary(self, op: str, c1: Expr, c2: Expr) -> Expr:
        if self.wrap and op == "pow":
            c1 = wrap_abs(c1)
        if not self.raw and op in COMMUTATIVE and _order_key(c2) < _order_key(c1):
            c1, c2 = c2, c1
        return Expr(op, (c1, c2))

    def _build(self, k: int) -> list[Expr]:
        out: list[Expr] = []
        seen: set[str] = set()

        def push(t: Expr | None) -> None:
            if t is None:
                return
            if self.raw:
                out.append(t)
            elif t._str not in seen:
                seen.add(t._str)
                out.append(t)

        levels = self._levels
        for op in self.basis.unary_ops:
            for c in levels[k - 1]:
                push(self._unary(op, c))
        for op in self.basis.binary_ops:
            symmetric = not self.raw and op in COMMUTATIVE
            for i in range(1, k - 1):
                j = k - 1 - i
                if symmetric and i > j:
                    continue
                for c1 in levels[i]:
                    for c2 in levels[j]:
                        push(self._binary(op, c1, c2))
        return out


_A0 = re.compile(r"a0")


def _numbered_str(shape: Expr) -> str:
    # in a shape every parameter is "a0", and no operator name contains "a0"
    counter = itertools.count()
    return _A0.sub(lambda m: f"a{next(counter)}", shape._str)


def generate_trees(basis: OperatorBasis, k: int, raw: bool = False) -> Iterator[Expr]:
    """Every tree with exactly k nodes.

    ``raw=True`` yields the pre-canonical grammar output (its count follows the
    generating-function recurrence); otherwise canonical, structurally distinct
    trees are yielded in serialized order.
    """
    if not 1 <= k <= 12:
        raise ValueError("k must lie in 1..12")
    gen = TreeGenerator(basis, raw=raw)
    shapes = gen.level(k)
    if raw:
        for s in shapes:
            yield number_fresh(s)
        return
    for _, s in sorted((_numbered_str(s), s) for s in shapes):
        yield number_fresh(s)


# -- catalogue ----------------------------------------------------------------


@dataclass(frozen=True)
class CatalogueRecord:
    id: int
    basis: str
    complexity: int
    expr: str
    fp: str
    d_expr: str
    d_fp: str | None
    d_status: str
    x_free: bool = False

    def to_line(self) -> str:
        return "\t".join([str(self.id), self.basis, str(self.complexity), self.expr, self.fp,
                          self.d_expr, self.d_fp or "-", self.d_status, "1" if self.x_free else "0"])

    @classmethod
    def from_line(cls, line: str) -> "CatalogueRecord":
        parts = line.split("\t")
        if len(parts) != 9:
            raise CorruptCatalogue(f"record has {len(parts)} fields, expected 9: {line[:80]!r}")
        rid, basis, k, expr, fp, d_expr, d_fp, d_status, x_free = parts
        try:
            return cls(int(rid), basis, int(k), expr, fp, d_expr,
                       None if d_fp == "-" else d_fp, d_status, x_free == "1")
        except ValueError as exc:
            raise CorruptCatalogue(f"bad record {line[:80]!r}: {exc}") from None


@dataclass
class LevelStats:
    k: int
    generated: int = 0
    x_free: int = 0
    ok: int = 0
    duplicate: int = 0
    domain_failure: int = 0
    overflow_failure: int = 0
    budget_exceeded: int = 0
    d_ok: int = 0
    d_domain_failure: int = 0
    d_overflow_failure: int = 0
    d_budget_exceeded: int = 0

    def to_line(self) -> str:
        return "#level " + " ".join(f"{f.name}={getattr(self, f.name)}" for f in fields(self))

    @classmethod
    def from_line(cls, line: str) -> "LevelStats":
        try:
            kv = dict(item.split("=", 1) for item in line.split()[1:])
            return cls(**{k: int(v) for k, v in kv.items()})
        except (ValueError, TypeError) as exc:
            raise CorruptCatalogue(f"bad level line {line!r}: {exc}") from None


@dataclass
class Catalogue:
    basis: OperatorBasis
    seed: int
    k_max: int
    records: list[CatalogueRecord] = field(default_factory=list)
    levels: list[LevelStats] = field(default_factory=list)

    @property
    def failure_counts(self) -> dict[str, int]:
        out = {s: 0 for s in FAILURE_STATUSES}
        for lv in self.levels:
            for s in FAILURE_STATUSES:
                out[s] += getattr(lv, s)
        return out

    @property
    def levels_done(self) -> int:
        return max((lv.k for lv in self.levels), default=0)

    def upto(self, k: int) -> list[CatalogueRecord]:
        return [r for r in self.records if r.complexity <= k]

    def min_complexity(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.records:
            if r.fp not in out or r.complexity < out[r.fp]:
                out[r.fp] = r.complexity
        return out

    def grid(self) -> EvaluationGrid:
        return make_grid(self.seed)

    def header(self) -> str:
        return f"#esi-catalogue {FORMAT_VERSION} basis={self.basis.name} seed={self.seed:#x} kmax={self.k_max}"

    def meta_line(self) -> str:
        b = self.basis
        return (f"#meta abs_policy={b.abs_policy} unary={','.join(b.unary_ops)} "
                f"binary={','.join(b.binary_ops)} constants=ONE,ZERO,doubling")


def _record_block(records: Iterable[CatalogueRecord]) -> tuple[list[str], str]:
    lines = [r.to_line() for r in records]
    h = hashlib.md5()
    for line in lines:
        h.update(line.encode("utf-8"))
        h.update(b"\n")
    return lines, h.hexdigest()


def write_catalogue(cat: Catalogue, path: str | os.PathLike) -> None:
    """Write atomically: a crash mid-write never leaves a half file behind."""
    path = Path(path)
    lines, md5 = _record_block(cat.records)
    body = [cat.header(), cat.meta_line(), *(lv.to_line() for lv in cat.levels), *lines,
            f"#end records={len(lines)} md5={md5}"]
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(body) + "\n", encoding="utf-8")
    os.replace(tmp, path)


_HEADER = re.compile(r"#esi-catalogue (\S+) basis=(\S+) seed=(0x[0-9a-f]+) kmax=(\d+)$")


def read_catalogue(path: str | os.PathLike) -> Catalogue:
    text = Path(path).read_text(encoding="utf-8")
    if not text.endswith("\n"):
        raise CorruptCatalogue(f"{path}: truncated (no final newline)")
    lines = text.split("\n")[:-1]
    if not lines:
        raise CorruptCatalogue(f"{path}: empty file")
    m = _HEADER.match(lines[0])
    if not m or m.group(1) != FORMAT_VERSION:
        raise CorruptCatalogue(f"{path}: not an esi catalogue header: {lines[0][:80]!r}")
    name, seed, kmax = m.group(2), int(m.group(3), 16), int(m.group(4))
    if len(lines) < 3 or not lines[1].startswith("#meta ") or not lines[-1].startswith("#end "):
        raise CorruptCatalogue(f"{path}: truncated or missing metadata")
    meta = dict(item.split("=", 1) for item in lines[1].split()[1:])
    basis = OperatorBasis(name, tuple(filter(None, meta.get("unary", "").split(","))),
                          tuple(filter(None, meta.get("binary", "").split(","))), meta.get("abs_policy", "wrap"))
    levels = [LevelStats.from_line(line) for line in lines[2:-1] if line.startswith("#level ")]
    record_lines = [line for line in lines[2:-1] if not line.startswith("#")]
    records = [CatalogueRecord.from_line(line) for line in record_lines]
    end = dict(item.split("=", 1) for item in lines[-1].split()[1:])
    _, md5 = _record_block(records)
    if end.get("records") != str(len(records)) or end.get("md5") != md5:
        raise CorruptCatalogue(f"{path}: record block does not match its checksum")
    return Catalogue(basis, seed, kmax, records, levels)


def _check_compatible(cat: Catalogue, basis: OperatorBasis, seed: int) -> None:
    if cat.seed != seed:
        raise ConfigMismatch(f"checkpoint seed {cat.seed:#x} differs from requested {seed:#x}")
    if cat.basis != basis:
        raise ConfigMismatch(f"checkpoint basis {cat.basis} differs from requested {basis}")


def _fingerprint_candidates(evaluator: Evaluator, items: list[tuple[str, Expr]]):
    for _, shape in items:
        e = number_fresh(shape)
        yield e, (None if e.x_free else evaluator.fingerprint(e))


def build_catalogue(
    basis: OperatorBasis | str,
    k_max: int,
    seed: int = DEFAULT_SEED,
    checkpoint: str | os.PathLike | None = None,
    on_level: Callable[[LevelStats], None] | None = None,
    evaluator: Evaluator | None = None,
) -> Catalogue:
    """Enumerate, fingerprint, deduplicate and differentiate up to ``k_max``.

    With ``checkpoint`` the catalogue file is rewritten after every completed
    level and an existing file is resumed from its last level.
    """
    if isinstance(basis, str):
        basis = get_basis(basis)
    if not 1 <= k_max <= 12:
        raise ValueError("k_max must lie in 1..12")
    grid = make_grid(seed)
    ev = evaluator or Evaluator(grid)
    if ev.grid != grid:
        raise ConfigMismatch("evaluator grid does not match the requested seed")

    cat = Catalogue(basis, grid.seed, k_max)
    if checkpoint is not None and Path(checkpoint).exists():
        old = read_catalogue(checkpoint)
        _check_compatible(old, basis, grid.seed)
        if old.levels_done > k_max:
            raise ConfigMismatch(f"checkpoint already holds k={old.levels_done} > k_max={k_max}")
        cat.records, cat.levels = old.records, old.levels
    seen = {r.fp for r in cat.records}

    gen = TreeGenerator(basis)
    for k in range(cat.levels_done + 1, k_max + 1):
        stats = LevelStats(k)
        shapes = gen.level(k)
        items = sorted((_numbered_str(s), s) for s in shapes)
        if k == k_max:
            gen.forget(k)
        fresh: list[Expr] = []
        for e, out in _fingerprint_candidates(ev, items):
            stats.generated += 1
            if e.x_free:
                stats.x_free += 1
                continue
            if not out.ok:
                setattr(stats, out.status, getattr(stats, out.status) + 1)
                continue
            if out.fingerprint in seen:
                stats.duplicate += 1
                continue
            seen.add(out.fingerprint)
            stats.ok += 1
            fresh.append((e, out.fingerprint))
        for e, fp in fresh:
            d = differentiate(e)
            dout = ev.fingerprint(d)
            key = "d_" + dout.status
            setattr(stats, key, getattr(stats, key) + 1)
            cat.records.append(CatalogueRecord(len(cat.records), basis.name, e.complexity, str(e), fp,
                                               str(d), dout.fingerprint, dout.status))
        cat.levels.append(stats)
        if checkpoint is not None:
            write_catalogue(cat, checkpoint)
        if on_level is not None:
            on_level(stats)
    if checkpoint is not None:
        write_catalogue(cat, checkpoint)
    return cat


def catalogue_from_expressions(
    exprs: Iterable[Expr | str],
    basis: OperatorBasis | str,
    seed: int = DEFAULT_SEED,
    base: Catalogue | None = None,
) -> Catalogue:
    """A catalogue holding the given functions (plus ``base``'s records).

    Used to seed lookups with known primitives beyond the enumeration ceiling.
    """
    if isinstance(basis, str):
        basis = get_basis(basis)
    grid = make_grid(seed)
    if base is not None:
        _check_compatible(base, basis, grid.seed)
    ev = Evaluator(grid)
    best: dict[str, tuple[int, str]] = {}
    derivs: dict[str, tuple[str, str | None, str]] = {}
    if base is not None:
        for r in base.records:
            best[r.fp] = (r.complexity, r.expr)
            derivs[r.expr] = (r.d_expr, r.d_fp, r.d_status)
    for item in exprs:
        e = canonicalize(parse(item) if isinstance(item, str) else item)
        if e.x_free:
            continue
        out = ev.fingerprint(e)
        if not out.ok:
            continue
        cand = (e.complexity, str(e))
        if out.fingerprint not in best or cand < best[out.fingerprint]:
            best[out.fingerprint] = cand
            if str(e) not in derivs:
                d = differentiate(e)
                dout = ev.fingerprint(d)
                derivs[str(e)] = (str(d), dout.fingerprint, dout.status)
    ordered = sorted((k, s, fp) for fp, (k, s) in best.items())
    records = [CatalogueRecord(i, basis.name, k, s, fp, *derivs[s]) for i, (k, s, fp) in enumerate(ordered)]
    k_max = max([r.complexity for r in records] + [base.k_max if base else 1])
    levels = list(base.levels) if base is not None else []
    return Catalogue(basis, grid.seed, k_max, records, levels)


def level_summary(stats: LevelStats) -> dict:
    return asdict(stats)
