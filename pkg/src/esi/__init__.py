"""Exhaustive symbolic integration: enumerate functions, fingerprint their
derivatives, and integrate by looking the integrand up."""

__version__ = "0.1.0"

from .atlas import compute_rho, decompose_rho, equivalence_classes, fit_growth, rho_curve
from .deriv import differentiate
from .enumeration import Catalogue, build_catalogue, read_catalogue, write_catalogue
from .expr import BASES, Expr, OperatorBasis, canonicalize, get_basis, to_infix
from .fingerprint import Evaluator, make_grid
from .lookup import DerivativeIndex, integrate_lookup
from .parse import parse

__all__ = [
    "BASES",
    "Catalogue",
    "DerivativeIndex",
    "Evaluator",
    "Expr",
    "OperatorBasis",
    "build_catalogue",
    "canonicalize",
    "compute_rho",
    "decompose_rho",
    "differentiate",
    "equivalence_classes",
    "fit_growth",
    "get_basis",
    "integrate_lookup",
    "make_grid",
    "parse",
    "read_catalogue",
    "rho_curve",
    "to_infix",
    "write_catalogue",
]
