#!/usr/bin/env python3
"""Growth rates side by side for existing catalogue files.

    python scripts/growth_table.py run1/catalogue_*.tsv [--fit-range 4-7]
"""
import argparse

from esi.atlas import FitRefused, equivalence_classes, fit_growth
from esi.enumeration import read_catalogue
from esi.report import markdown_table

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("catalogues", nargs="+")
    ap.add_argument("--fit-range")
    args = ap.parse_args()
    fr = tuple(int(v) for v in args.fit_range.split("-")) if args.fit_range else None
    rows = []
    for path in args.catalogues:
        cat = read_catalogue(path)
        _, summary = equivalence_classes(cat)
        try:
            g = fit_growth(cat, fit_range=fr)
        except FitRefused as exc:
            rows.append([cat.basis.name, cat.k_max, "-", "-", "-", str(exc), summary.n_multi])
            continue
        rows.append([cat.basis.name, cat.k_max, g.alpha_raw, g.alpha_eff, g.beta,
                     f"{g.fit_range[0]}-{g.fit_range[1]}", summary.n_multi])
    print(markdown_table(["basis", "k_max", "alpha_raw", "alpha_eff", "beta", "fit", "multi-member classes"], rows))
