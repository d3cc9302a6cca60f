#!/usr/bin/env python3
"""Enumerate, analyse and report one or more bases in a single output directory.

    python scripts/run_atlas.py --basis core,core_log --k-max 7 --out atlas-out
"""
import argparse
import sys
import time

from esi.cli import main


def run(step, argv):
    t0 = time.monotonic()
    code = main([step, *argv])
    print(f"[{step}] exit={code} {time.monotonic() - t0:.1f}s", file=sys.stderr)
    if code:
        sys.exit(code)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--basis", default="core,core_log")
    ap.add_argument("--k-max", type=int, default=6)
    ap.add_argument("--out", default="atlas-out")
    ap.add_argument("--seed")
    args = ap.parse_args()
    common = ["--basis", args.basis, "--k-max", str(args.k_max), "--out", args.out]
    if args.seed:
        common += ["--seed", args.seed]
    for step in ("enumerate", "atlas", "report"):
        run(step, common)
