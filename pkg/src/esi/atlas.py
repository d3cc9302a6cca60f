"""Integrability fraction, its decompositions, equivalence classes and growth fits."""
from __future__ import annotations

import math
import statistics
from collections import defaultdict
from dataclasses import dataclass, field

from .enumeration import Catalogue, CatalogueRecord, raw_count
from .expr import OperatorBasis, contains_ops, get_basis
from .fingerprint import OK
from .parse import parse

PARTITIONS = {"log/exp": ("log", "exp"), "sin/cos": ("sin", "cos")}


@dataclass(frozen=True)
class RhoPoint:
    k: int
    n_total: int
    n_integrable: int
    rho: float
    rho_err: float


def _rho_point(k: int, n_total: int, n_integrable: int) -> RhoPoint:
    if n_total == 0:
        return RhoPoint(k, 0, 0, 0.0, 0.0)
    rho = n_integrable / n_total
    return RhoPoint(k, n_total, n_integrable, rho, math.sqrt(rho * (1 - rho) / n_total))


def _check_k(cat: Catalogue, k: int) -> None:
    if not 1 <= k <= cat.k_max:
        raise IndexError(f"k={k} outside the catalogue range 1..{cat.k_max}")


def _integrable(r: CatalogueRecord, hashes: set[str]) -> bool:
    return r.d_status == OK and r.d_fp in hashes


def compute_rho(cat: Catalogue, k: int) -> RhoPoint:
    """Fraction of F_{<=k} whose derivative fingerprint is also in F_{<=k}."""
    _check_k(cat, k)
    members = cat.upto(k)
    hashes = {r.fp for r in members}
    return _rho_point(k, len(members), sum(_integrable(r, hashes) for r in members))


def compute_rho_exact(cat: Catalogue, k: int) -> RhoPoint:
    """Same membership test, but only functions of complexity exactly k counted."""
    _check_k(cat, k)
    hashes = {r.fp for r in cat.upto(k)}
    members = [r for r in cat.records if r.complexity == k]
    return _rho_point(k, len(members), sum(_integrable(r, hashes) for r in members))


def rho_curve(cat: Catalogue) -> list[RhoPoint]:
    hashes: set[str] = set()
    out = []
    for k in range(1, cat.k_max + 1):
        members = cat.upto(k)
        hashes.update(r.fp for r in members)
        out.append(_rho_point(k, len(members), sum(_integrable(r, hashes) for r in members)))
    return out


def _bucket(r: CatalogueRecord, first: str, second: str) -> str:
    e = parse(r.expr)
    has1, has2 = contains_ops(e, (first,)), contains_ops(e, (second,))
    if has1 and has2:
        return "both"
    if has1:
        return f"{first}_only"
    if has2:
        return f"{second}_only"
    return "neither"


def decompose_rho(cat: Catalogue, k: int, partition: str = "log/exp") -> list[tuple[str, RhoPoint]]:
    """rho split by operator presence; membership still tests against all of F_{<=k}."""
    _check_k(cat, k)
    if partition not in PARTITIONS:
        raise ValueError(f"partition must be one of {sorted(PARTITIONS)}")
    first, second = PARTITIONS[partition]
    members = cat.upto(k)
    hashes = {r.fp for r in members}
    totals: dict[str, list[int]] = {lab: [0, 0] for lab in ("both", f"{first}_only", f"{second}_only", "neither")}
    for r in members:
        t = totals[_bucket(r, first, second)]
        t[0] += 1
        t[1] += _integrable(r, hashes)
    return [(lab, _rho_point(k, n, m)) for lab, (n, m) in totals.items()]


@dataclass(frozen=True)
class GapStats:
    k: int
    n_matched: int
    n_unmatched: int
    mean_delta: float
    frac_nonpositive: float
    mean_upper_bound_unmatched: float
    by_subset: dict = field(default_factory=dict)


def _gap_summary(deltas: list[int]) -> tuple[float, float]:
    if not deltas:
        return math.nan, math.nan
    return statistics.fmean(deltas), sum(d <= 0 for d in deltas) / len(deltas)


def complexity_gap_stats(cat: Catalogue, k: int, subset_ops: tuple[str, ...] = ("log",)) -> GapStats:
    """delta = min catalogue complexity of F' minus complexity of F.

    Matched derivatives use the catalogue minimum; unmatched ones are reported
    separately with the symbolic derivative's complexity as an upper bound.
    Records whose derivative failed to evaluate are left out.
    """
    _check_k(cat, k)
    min_k = cat.min_complexity()
    matched: list[int] = []
    upper: list[int] = []
    subsets: dict[str, list[int]] = {"with": [], "without": []}
    for r in cat.upto(k):
        if r.d_status != OK:
            continue
        if r.d_fp in min_k:
            delta = min_k[r.d_fp] - r.complexity
            matched.append(delta)
            has = contains_ops(parse(r.expr), subset_ops)
            subsets["with" if has else "without"].append(delta)
        else:
            upper.append(parse(r.d_expr).complexity - r.complexity)
    mean, frac = _gap_summary(matched)
    by_subset = {}
    for name, ds in subsets.items():
        m, f = _gap_summary(ds)
        by_subset[f"{name}_{'+'.join(subset_ops)}"] = {"n": len(ds), "mean_delta": m, "frac_nonpositive": f}
    return GapStats(k, len(matched), len(upper), mean, frac,
                    statistics.fmean(upper) if upper else math.nan, by_subset)


@dataclass(frozen=True)
class EquivalenceClass:
    d_fp: str
    members: tuple[int, ...]
    representative_integrand: str


@dataclass(frozen=True)
class ClassSummary:
    n_classes: int
    n_multi: int
    attractors: tuple[EquivalenceClass, ...]


def equivalence_classes(cat: Catalogue, top: int = 20) -> tuple[list[EquivalenceClass], ClassSummary]:
    """Group primitives by derivative fingerprint.

    Classes are ordered by their first member; the summary lists the ``top``
    largest classes (ties by first member).
    """
    groups: dict[str, list[CatalogueRecord]] = defaultdict(list)
    for r in cat.records:
        if r.d_status == OK:
            groups[r.d_fp].append(r)
    classes = []
    for fp, recs in groups.items():
        recs.sort(key=lambda r: (r.complexity, r.expr))
        classes.append(EquivalenceClass(fp, tuple(r.id for r in recs), recs[0].d_expr))
    by_id = {r.id: r for r in cat.records}
    classes.sort(key=lambda c: (by_id[c.members[0]].complexity, by_id[c.members[0]].expr))
    largest = sorted(classes, key=lambda c: -len(c.members))[:top]
    n_multi = sum(len(c.members) > 1 for c in classes)
    return classes, ClassSummary(len(classes), n_multi, tuple(largest))


# -- growth model -------------------------------------------------------------


def alpha_raw(basis: OperatorBasis | str) -> float:
    """Raw grammar growth rate p1 + 2*sqrt(p0*p2)."""
    if isinstance(basis, str):
        basis = get_basis(basis)
    return basis.p1 + 2 * math.sqrt(basis.p0 * basis.p2)


def raw_count_oracle(basis: OperatorBasis | str, k: int) -> int:
    if isinstance(basis, str):
        basis = get_basis(basis)
    if k < 1:
        raise ValueError("k must be >= 1")
    return raw_count(basis, k)


class FitRefused(ValueError):
    pass


@dataclass(frozen=True)
class GrowthFit:
    alpha_raw: float
    alpha_eff: float
    beta: float
    ratio: float
    fit_range: tuple[int, int]
    beta_definition: str = "distinct derivative fingerprints over F_{<=k}"


def geometric_rate(ks: list[int], counts: list[int]) -> float:
    """exp of the least-squares slope of ln(count) against k."""
    pairs = [(k, c) for k, c in zip(ks, counts) if c > 0]
    if len(pairs) < 3:
        raise FitRefused("need at least three levels with nonzero counts")
    slope, _ = statistics.linear_regression([p[0] for p in pairs], [math.log(p[1]) for p in pairs])
    return math.exp(slope)


def level_counts(cat: Catalogue) -> tuple[list[int], list[int], list[int]]:
    """Per level k: functions of complexity exactly k, and distinct derivative
    fingerprints over all of F_{<=k} (failed derivatives left out)."""
    ks, funcs, derivs = [], [], []
    seen: set[str] = set()
    for k in range(1, cat.k_max + 1):
        recs = [r for r in cat.records if r.complexity == k]
        seen.update(r.d_fp for r in recs if r.d_status == OK)
        ks.append(k)
        funcs.append(len(recs))
        derivs.append(len(seen))
    return ks, funcs, derivs


def fit_growth(cat: Catalogue, fit_levels: int = 4, fit_range: tuple[int, int] | None = None) -> GrowthFit:
    ks, funcs, derivs = level_counts(cat)
    if fit_range is None:
        populated = [k for k, c in zip(ks, funcs) if c > 0]
        if len(populated) < 3:
            raise FitRefused("need at least three levels with nonzero counts")
        chosen = populated[-fit_levels:]
        fit_range = (chosen[0], chosen[-1])
    lo, hi = fit_range
    sel = [i for i, k in enumerate(ks) if lo <= k <= hi]
    a = geometric_rate([ks[i] for i in sel], [funcs[i] for i in sel])
    b = geometric_rate([ks[i] for i in sel], [derivs[i] for i in sel])
    return GrowthFit(alpha_raw(cat.basis), a, b, a / b, (lo, hi))
