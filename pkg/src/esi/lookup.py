"""Integration by table lookup against a catalogue's derivative fingerprints."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

from .deriv import differentiate
from .enumeration import Catalogue, CatalogueRecord
from .expr import Expr, canonicalize, strip_wrappers
from .fingerprint import Evaluator
from .parse import parse

__all__ = [
    "FOUND",
    "NOT_IN_DATABASE",
    "FINGERPRINT_FAILED",
    "IntegrationResult",
    "InternalConsistencyError",
    "DerivativeIndex",
    "integrate_lookup",
    "simplicity_compare",
    "SimplicityComparison",
    "strip_wrappers",
]

FOUND = "found"
NOT_IN_DATABASE = "not_in_database"
FINGERPRINT_FAILED = "fingerprint_failed"


class InternalConsistencyError(RuntimeError):
    """A stored primitive whose derivative no longer matches its class."""


@dataclass(frozen=True)
class IntegrationResult:
    integrand: Expr
    primitive: Expr | None
    class_size: int
    verified: bool
    status: str
    integrand_status: str = "ok"


class DerivativeIndex:
    """d_fp -> records, built once per catalogue."""

    def __init__(self, catalogue: Catalogue, evaluator: Evaluator | None = None):
        self.catalogue = catalogue
        self.evaluator = evaluator or Evaluator(catalogue.grid())
        groups: dict[str, list[CatalogueRecord]] = defaultdict(list)
        for r in catalogue.records:
            if r.d_fp is not None:
                groups[r.d_fp].append(r)
        for recs in groups.values():
            recs.sort(key=lambda r: (r.complexity, r.expr))
        self.classes = dict(groups)

    def query(self, integrand: Expr | str) -> IntegrationResult:
        if isinstance(integrand, str):
            integrand = parse(integrand)
        integrand = canonicalize(integrand, renumber_params=False)
        out = self.evaluator.fingerprint(integrand)
        if not out.ok:
            return IntegrationResult(integrand, None, 0, False, FINGERPRINT_FAILED, out.status)
        members = self.classes.get(out.fingerprint)
        if not members:
            return IntegrationResult(integrand, None, 0, False, NOT_IN_DATABASE)
        primitive = parse(members[0].expr)
        check = self.evaluator.fingerprint(differentiate(primitive))
        if check.fingerprint != out.fingerprint:
            raise InternalConsistencyError(
                f"record {members[0].id} ({members[0].expr}) no longer differentiates to its class"
            )
        return IntegrationResult(integrand, primitive, len(members), True, FOUND)


def integrate_lookup(integrand: Expr | str, catalogue: Catalogue | DerivativeIndex) -> IntegrationResult:
    """Find the lowest-complexity catalogued primitive of ``integrand``.

    The primitive is re-differentiated and re-fingerprinted before it is
    returned; stored derivative expressions are never trusted.  A miss means
    only that no primitive exists up to the catalogue's ceiling.
    """
    index = catalogue if isinstance(catalogue, DerivativeIndex) else DerivativeIndex(catalogue)
    return index.query(integrand)


@dataclass(frozen=True)
class SimplicityComparison:
    winner: str  # "first", "second" or "tie"
    complexity_first: int
    complexity_second: int
    savings: int


def simplicity_compare(a: Expr | str, b: Expr | str) -> SimplicityComparison:
    """Compare node counts; ``savings`` is how many nodes the simpler one saves."""
    a = parse(a) if isinstance(a, str) else a
    b = parse(b) if isinstance(b, str) else b
    ka, kb = a.complexity, b.complexity
    if ka < kb:
        winner = "first"
    elif kb < ka:
        winner = "second"
    else:
        winner = "tie"
    return SimplicityComparison(winner, ka, kb, abs(ka - kb))
