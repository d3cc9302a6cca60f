#!/usr/bin/env python3
"""Integrate a handful of integrands by catalogue lookup.

Builds (or reuses) an ext_log catalogue and looks up textbook integrands,
known non-elementary ones, and a couple of nested exp/log forms.

    python scripts/lookup_demo.py --k-max 6 --catalogue ext_log_k6.tsv
"""
import argparse

from esi.enumeration import build_catalogue
from esi.expr import to_infix
from esi.lookup import DerivativeIndex

INTEGRANDS = [
    "2*x*exp(x^2)",
    "1/x",
    "log(x)+1",
    "x^x*(log(x)+1)",
    "exp(x)*(1+x)",
    "1/(2*sqrt(x))",
    "exp(x^2)",  # erf-type, never found
    "exp(x)/x",  # exponential integral
    "x^x",
]

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--k-max", type=int, default=5)
    ap.add_argument("--catalogue", help="checkpoint file to build into or resume from")
    ap.add_argument("integrands", nargs="*", default=INTEGRANDS)
    args = ap.parse_args()
    cat = build_catalogue("ext_log", args.k_max, checkpoint=args.catalogue)
    index = DerivativeIndex(cat)
    print(f"catalogue: {len(cat.records)} functions, {len(index.classes)} distinct derivatives")
    for text in args.integrands:
        r = index.query(text)
        if r.primitive is None:
            print(f"{text:>22}  ->  {r.status}")
        else:
            print(f"{text:>22}  ->  {to_infix(r.primitive)}   (class of {r.class_size}, verified={r.verified})")
