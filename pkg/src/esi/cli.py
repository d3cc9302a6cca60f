"""Command-line entry point: ``esi {enumerate,atlas,integrate,gauntlet,report,verify}``.

Settings come from built-in defaults, then the ``[run]`` section of
``--config``, then the ESI_SEED environment variable, then explicit flags.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import __version__
from .atlas import (
    PARTITIONS,
    FitRefused,
    complexity_gap_stats,
    compute_rho_exact,
    decompose_rho,
    equivalence_classes,
    fit_growth,
    rho_curve,
)
from .enumeration import (
    Catalogue,
    CatalogueError,
    ConfigMismatch,
    CorruptCatalogue,
    build_catalogue,
    raw_count,
    read_catalogue,
)
from .expr import BASES, get_basis, to_infix
from .fingerprint import DEFAULT_SEED, OK, Evaluator
from .gauntlet import GauntletConfigError, load_config, read_corpus, read_verdicts, run_cascade, tally
from .lookup import FINGERPRINT_FAILED, FOUND, InternalConsistencyError, integrate_lookup
from .parse import OperatorNotInBasis, ParseError, parse
from .report import csv_text, markdown_table, read_csv, rho_svg

log = logging.getLogger("esi")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_FOUND = 3
EXIT_EVAL_FAILURE = 4
EXIT_CONSISTENCY = 5


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    bases: tuple[str, ...] = ("core_maths",)
    k_max: int = 5
    seed: int = DEFAULT_SEED
    abs_policy: str = "wrap"
    out_dir: str = "esi-out"
    fit_range: tuple[int, int] | None = None
    gauntlet_config: str | None = None
    workers: int = 1

    def header(self) -> str:
        fr = "auto" if self.fit_range is None else f"{self.fit_range[0]}-{self.fit_range[1]}"
        return (f"esi {__version__} bases={','.join(self.bases)} k_max={self.k_max} seed={self.seed:#x} "
                f"abs_policy={self.abs_policy} fit_range={fr}")

    def catalogue_path(self, basis: str) -> Path:
        return Path(self.out_dir) / f"catalogue_{basis}.tsv"


def _parse_bases(text: str) -> tuple[str, ...]:
    names = [b.strip() for b in text.split(",") if b.strip()]
    if not names:
        raise UsageError("no basis given")
    out = []
    for name in names:
        try:
            out.append(get_basis(name).name)
        except KeyError:
            raise UsageError(f"unknown basis {name!r}; choose from {', '.join(BASES)}") from None
    return tuple(out)


def _parse_fit_range(text: str | None) -> tuple[int, int] | None:
    if text is None or text in ("", "auto"):
        return None
    try:
        lo, hi = (int(v) for v in text.split("-"))
    except ValueError:
        raise UsageError(f"fit range must look like 5-8, not {text!r}") from None
    if not 1 <= lo < hi:
        raise UsageError(f"bad fit range {text!r}")
    return lo, hi


def _parse_int(text: str, what: str) -> int:
    try:
        return int(text, 0)
    except ValueError:
        raise UsageError(f"{what} must be an integer, not {text!r}") from None


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        if not cp.read(args.config, encoding="utf-8"):
            raise UsageError(f"cannot read config {args.config}")
        run = cp["run"] if cp.has_section("run") else {}
        if "basis" in run:
            cfg = replace(cfg, bases=_parse_bases(run["basis"]))
        if "k_max" in run:
            cfg = replace(cfg, k_max=_parse_int(run["k_max"], "k_max"))
        if "seed" in run:
            cfg = replace(cfg, seed=_parse_int(run["seed"], "seed"))
        if "abs_policy" in run:
            cfg = replace(cfg, abs_policy=run["abs_policy"])
        if "out" in run:
            cfg = replace(cfg, out_dir=run["out"])
        if "fit_range" in run:
            cfg = replace(cfg, fit_range=_parse_fit_range(run["fit_range"]))
        if "gauntlet_config" in run:
            cfg = replace(cfg, gauntlet_config=run["gauntlet_config"])
        if "workers" in run:
            cfg = replace(cfg, workers=_parse_int(run["workers"], "workers"))
    if os.environ.get("ESI_SEED"):
        cfg = replace(cfg, seed=_parse_int(os.environ["ESI_SEED"], "ESI_SEED"))
    if getattr(args, "basis", None):
        cfg = replace(cfg, bases=_parse_bases(args.basis))
    if getattr(args, "k_max", None) is not None:
        cfg = replace(cfg, k_max=args.k_max)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=_parse_int(args.seed, "seed"))
    if getattr(args, "abs_policy", None):
        cfg = replace(cfg, abs_policy=args.abs_policy)
    if getattr(args, "out", None):
        cfg = replace(cfg, out_dir=args.out)
    if getattr(args, "fit_range", None):
        cfg = replace(cfg, fit_range=_parse_fit_range(args.fit_range))
    if getattr(args, "gauntlet_config", None):
        cfg = replace(cfg, gauntlet_config=args.gauntlet_config)
    if cfg.abs_policy not in ("wrap", "none"):
        raise UsageError("abs_policy must be wrap or none")
    if not 1 <= cfg.k_max <= 12:
        raise UsageError("k_max must lie in 1..12")
    return cfg


def _load_checked(cfg: RunConfig, basis_name: str, path: Path | None = None) -> Catalogue:
    path = path or cfg.catalogue_path(basis_name)
    if not path.exists():
        raise UsageError(f"no catalogue at {path}; run `esi enumerate` first")
    cat = read_catalogue(path)
    if cat.seed != cfg.seed:
        raise ConfigMismatch(f"{path} was built with seed {cat.seed:#x}, config says {cfg.seed:#x}")
    if cat.basis.abs_policy != cfg.abs_policy:
        raise ConfigMismatch(f"{path} was built with abs_policy={cat.basis.abs_policy}")
    if cat.basis.name != basis_name:
        raise ConfigMismatch(f"{path} holds basis {cat.basis.name}, expected {basis_name}")
    return cat


# -- commands -----------------------------------------------------------------


def cmd_enumerate(cfg: RunConfig, out=sys.stdout) -> int:
    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    for name in cfg.bases:
        basis = get_basis(name, cfg.abs_policy)
        path = cfg.catalogue_path(name)
        print(f"# {cfg.header()}", file=out)
        print(f"basis={name} catalogue={path}", file=out)
        print("k\traw\tgenerated\tx_free\tnew\tduplicate\tdomain\toverflow\tbudget\td_fail\tseconds", file=out)
        t0 = time.monotonic()

        def report(s, t0=t0, basis=basis):
            d_fail = s.d_domain_failure + s.d_overflow_failure + s.d_budget_exceeded
            print(f"{s.k}\t{raw_count(basis, s.k)}\t{s.generated}\t{s.x_free}\t{s.ok}\t{s.duplicate}\t"
                  f"{s.domain_failure}\t{s.overflow_failure}\t{s.budget_exceeded}\t{d_fail}\t"
                  f"{time.monotonic() - t0:.1f}", file=out, flush=True)

        cat = build_catalogue(basis, cfg.k_max, cfg.seed, checkpoint=path, on_level=report)
        fc = cat.failure_counts
        print(f"records={len(cat.records)} failures: " + " ".join(f"{k}={v}" for k, v in fc.items()), file=out)
    return EXIT_OK


def atlas_tables(cfg: RunConfig, cats: dict[str, Catalogue]) -> dict[str, str]:
    """File name -> contents for every atlas output."""
    head = cfg.header()
    rho_rows, dec_rows, cls_rows, growth_rows, gap_rows = [], [], [], [], []
    series = {}
    for name, cat in cats.items():
        k_top = min(cfg.k_max, cat.k_max)
        curve = [p for p in rho_curve(cat) if p.k <= k_top]
        series[name] = curve
        for p in curve:
            ex = compute_rho_exact(cat, p.k)
            rho_rows.append([name, p.k, p.n_total, p.n_integrable, p.rho, p.rho_err, ex.n_total, ex.rho])
        ops = set(cat.basis.unary_ops)
        for part, pair in PARTITIONS.items():
            if not set(pair) & ops:
                continue
            for k in range(1, k_top + 1):
                for label, p in decompose_rho(cat, k, part):
                    dec_rows.append([name, k, part, label, p.n_total, p.n_integrable, p.rho, p.rho_err])
        classes, summary = equivalence_classes(cat)
        by_id = {r.id: r for r in cat.records}
        for c in classes:
            first = by_id[c.members[0]]
            cls_rows.append([name, c.d_fp, len(c.members), c.representative_integrand, first.expr, first.complexity])
        try:
            g = fit_growth(cat, fit_range=cfg.fit_range)
            growth_rows.append([name, g.alpha_raw, g.alpha_eff, g.beta, g.ratio, g.fit_range[0], g.fit_range[1],
                                g.beta_definition, summary.n_classes, summary.n_multi])
        except FitRefused as exc:
            growth_rows.append([name, None, None, None, None, None, None, f"fit refused: {exc}",
                                summary.n_classes, summary.n_multi])
        gs = complexity_gap_stats(cat, k_top)
        gap_rows.append([name, k_top, gs.n_matched, gs.n_unmatched, gs.mean_delta, gs.frac_nonpositive,
                         gs.mean_upper_bound_unmatched])
    return {
        "rho.csv": csv_text(head, ["basis", "k", "n_total", "n_integrable", "rho", "rho_err",
                                   "n_exact", "rho_exact"], rho_rows),
        "decomposition.csv": csv_text(head, ["basis", "k", "partition", "subset", "n_total", "n_integrable",
                                             "rho", "rho_err"], dec_rows),
        "classes.csv": csv_text(head, ["basis", "d_fp", "size", "representative_integrand", "primitive",
                                       "primitive_complexity"], cls_rows),
        "growth.csv": csv_text(head, ["basis", "alpha_raw", "alpha_eff", "beta", "ratio", "k_lo", "k_hi",
                                      "beta_definition", "n_classes", "n_multi"], growth_rows),
        "gap.csv": csv_text(head, ["basis", "k", "n_matched", "n_unmatched", "mean_delta", "frac_nonpositive",
                                   "mean_upper_bound_unmatched"], gap_rows),
        "rho.svg": rho_svg(series, "integrability fraction rho(k)", desc=head),
    }


def cmd_atlas(cfg: RunConfig, out=sys.stdout) -> int:
    cats = {name: _load_checked(cfg, name) for name in cfg.bases}
    for name, cat in cats.items():
        if not cat.records:
            raise UsageError(f"catalogue for {name} is empty; nothing to analyse")
        if cat.k_max < cfg.k_max:
            raise UsageError(f"catalogue for {name} stops at k={cat.k_max} < k_max={cfg.k_max}")
    outdir = Path(cfg.out_dir)
    for fname, text in atlas_tables(cfg, cats).items():
        (outdir / fname).write_text(text, encoding="utf-8")
        print(outdir / fname, file=out)
    return EXIT_OK


def cmd_integrate(cfg: RunConfig, args, out=sys.stdout) -> int:
    name = cfg.bases[0]
    cat = _load_checked(cfg, name, Path(args.catalogue) if args.catalogue else None)
    try:
        integrand = parse(args.integrand)
    except (ParseError, OperatorNotInBasis) as exc:
        raise UsageError(str(exc)) from None
    res = integrate_lookup(integrand, cat)
    print(f"integrand: {to_infix(res.integrand)}", file=out)
    print(f"status: {res.status}", file=out)
    if res.status == FOUND:
        print(f"primitive: {to_infix(res.primitive)}", file=out)
        print(f"prefix: {res.primitive}", file=out)
        print(f"class_size: {res.class_size}", file=out)
        print(f"verified: {str(res.verified).lower()}", file=out)
        return EXIT_OK
    if res.status == FINGERPRINT_FAILED:
        print(f"evaluation: {res.integrand_status}", file=out)
        return EXIT_EVAL_FAILURE
    print(f"no primitive up to k={cat.k_max} (this is not a proof of non-integrability)", file=out)
    return EXIT_NOT_FOUND


def cmd_gauntlet(cfg: RunConfig, args, out=sys.stdout) -> int:
    if not cfg.gauntlet_config:
        raise UsageError("gauntlet needs --gauntlet-config (or gauntlet_config in [run])")
    gcfg = load_config(cfg.gauntlet_config)
    corpus = read_corpus(args.corpus)
    outdir = Path(cfg.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    tiers = tuple(t.strip() for t in args.tiers.split(","))
    verdicts = run_cascade(corpus, gcfg, tiers=tiers, journal=outdir / "gauntlet_journal.jsonl",
                           verdicts_path=outdir / "verdicts.jsonl")
    for k, v in tally(verdicts).items():
        print(f"{k}\t{v}", file=out)
    return EXIT_OK


def cmd_report(cfg: RunConfig, args, out=sys.stdout) -> int:
    outdir = Path(cfg.out_dir)
    parts = ["# ESI run report", "", f"Configuration: `{cfg.header()}`", ""]
    rho_path = outdir / "rho.csv"
    if rho_path.exists():
        _, rows = read_csv(rho_path.read_text(encoding="utf-8"))
        parts += ["## Integrability fraction", "",
                  markdown_table(["basis", "k", "n_total", "n_integrable", "rho", "rho_err"],
                                 [[r["basis"], r["k"], r["n_total"], r["n_integrable"], float(r["rho"]),
                                   float(r["rho_err"])] for r in rows]), ""]
    growth_path = outdir / "growth.csv"
    if growth_path.exists():
        _, rows = read_csv(growth_path.read_text(encoding="utf-8"))
        parts += ["## Growth fits", "",
                  markdown_table(["basis", "alpha_raw", "alpha_eff", "beta", "fit range", "classes", "multi"],
                                 [[r["basis"], _f(r["alpha_raw"]), _f(r["alpha_eff"]), _f(r["beta"]),
                                   f"{r['k_lo']}-{r['k_hi']}", r["n_classes"], r["n_multi"]] for r in rows]), ""]
    for name in cfg.bases:
        path = cfg.catalogue_path(name)
        if path.exists():
            cat = read_catalogue(path)
            parts += [f"## Catalogue {name}", "",
                      markdown_table(["k", "generated", "new", "duplicate", "domain", "overflow", "budget"],
                                     [[s.k, s.generated, s.ok, s.duplicate, s.domain_failure, s.overflow_failure,
                                       s.budget_exceeded] for s in cat.levels]), ""]
    verdict_path = Path(args.verdicts) if args.verdicts else outdir / "verdicts.jsonl"
    if verdict_path.exists():
        t = tally(read_verdicts(verdict_path))
        parts += ["## CAS gauntlet", "",
                  markdown_table(["solved", "hard", "impossible", "failed initial sweep"],
                                 [[t["solved"], t["hard"], t["impossible"], t["failed_initial"]]]), ""]
    if len(parts) == 4:
        raise UsageError(f"nothing to report in {outdir}")
    path = outdir / "report.md"
    path.write_text("\n".join(parts), encoding="utf-8")
    print(path, file=out)
    return EXIT_OK


def _f(text: str):
    return float(text) if text not in ("", None) else float("nan")


def verify_catalogue(cat: Catalogue) -> list[str]:
    """Recompute every fingerprint and count; return the problems found."""
    problems = []
    ev = Evaluator(cat.grid())
    fps = set()
    for i, r in enumerate(cat.records):
        if r.id != i:
            problems.append(f"record {r.id} out of sequence at position {i}")
        e = parse(r.expr)
        if e.complexity != r.complexity:
            problems.append(f"record {r.id}: complexity {r.complexity} but expression has {e.complexity}")
        got = ev.fingerprint(e)
        if got.fingerprint != r.fp:
            problems.append(f"record {r.id}: fingerprint mismatch")
        if r.fp in fps:
            problems.append(f"record {r.id}: duplicate fingerprint")
        fps.add(r.fp)
        d = ev.fingerprint(parse(r.d_expr))
        if d.status != r.d_status or d.fingerprint != r.d_fp:
            problems.append(f"record {r.id}: derivative fingerprint mismatch")
    per_k = {}
    for r in cat.records:
        per_k[r.complexity] = per_k.get(r.complexity, 0) + 1
    for s in cat.levels:
        if per_k.get(s.k, 0) != s.ok:
            problems.append(f"level {s.k}: {s.ok} new records declared, {per_k.get(s.k, 0)} present")
        d_total = s.d_ok + s.d_domain_failure + s.d_overflow_failure + s.d_budget_exceeded
        if d_total != s.ok:
            problems.append(f"level {s.k}: derivative tallies do not add up")
    d_ok = sum(r.d_status == OK for r in cat.records)
    if cat.levels and d_ok != sum(s.d_ok for s in cat.levels):
        problems.append("derivative ok count differs from level tallies")
    return problems


def cmd_verify(args, out=sys.stdout) -> int:
    path = Path(args.file)
    if not path.exists():
        raise UsageError(f"no such file {path}")
    head = path.read_text(encoding="utf-8")[:64]
    if head.startswith("#esi-catalogue"):
        try:
            cat = read_catalogue(path)
        except CorruptCatalogue as exc:
            print(f"FAIL {exc}", file=out)
            return EXIT_CONSISTENCY
        problems = verify_catalogue(cat)
    elif path.suffix == ".jsonl":
        try:
            verdicts = read_verdicts(path)
            problems = [f"{v.integrand_id}: unknown classification" for v in verdicts
                        if v.classification not in ("solved", "hard", "impossible")]
        except (ValueError, TypeError, KeyError) as exc:
            problems = [f"unreadable verdict file: {exc}"]
    elif path.suffix == ".csv":
        comment, rows = read_csv(path.read_text(encoding="utf-8"))
        problems = [] if comment.startswith("esi ") else ["missing esi config header"]
        for r in rows:
            if {"rho", "n_total", "n_integrable"} <= r.keys():
                n, m = int(r["n_total"]), int(r["n_integrable"])
                if n and abs(float(r["rho"]) - m / n) > 1e-12:
                    problems.append(f"row {r}: rho != n_integrable / n_total")
    else:
        raise UsageError(f"do not know how to verify {path}")
    for p in problems:
        print(f"FAIL {p}", file=out)
    if problems:
        return EXIT_CONSISTENCY
    print(f"OK {path}", file=out)
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="esi", description="Exhaustive symbolic integration by enumeration.")
    p.add_argument("--version", action="version", version=f"esi {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI file with a [run] section")
        sp.add_argument("--basis", help="basis name(s), comma separated")
        sp.add_argument("--k-max", type=int, dest="k_max")
        sp.add_argument("--seed", help="grid seed (decimal or 0x hex)")
        sp.add_argument("--abs-policy", choices=("wrap", "none"), dest="abs_policy")
        sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("enumerate", help="build or resume catalogues")
    common(sp)
    sp = sub.add_parser("atlas", help="rho(k), decompositions, classes and growth fits")
    common(sp)
    sp.add_argument("--fit-range", dest="fit_range", help="e.g. 5-8 (default: top four levels)")
    sp = sub.add_parser("integrate", help="look up a primitive")
    common(sp)
    sp.add_argument("--catalogue", help="catalogue file (default: <out>/catalogue_<basis>.tsv)")
    sp.add_argument("integrand", help="infix or prefix expression")
    sp = sub.add_parser("gauntlet", help="run integrands through configured CAS engines")
    common(sp)
    sp.add_argument("--gauntlet-config", dest="gauntlet_config")
    sp.add_argument("--corpus", required=True, help="one integrand per line, optional id<TAB>expr")
    sp.add_argument("--tiers", default="initial,stress")
    sp = sub.add_parser("report", help="markdown summary of an output directory")
    common(sp)
    sp.add_argument("--verdicts", help="verdict file (default: <out>/verdicts.jsonl)")
    sp = sub.add_parser("verify", help="re-check a catalogue, CSV or verdict file")
    sp.add_argument("file")
    return p


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "verify":
            return cmd_verify(args, out)
        cfg = resolve_config(args)
        if args.command == "enumerate":
            return cmd_enumerate(cfg, out)
        if args.command == "atlas":
            return cmd_atlas(cfg, out)
        if args.command == "integrate":
            return cmd_integrate(cfg, args, out)
        if args.command == "gauntlet":
            return cmd_gauntlet(cfg, args, out)
        if args.command == "report":
            return cmd_report(cfg, args, out)
    except (UsageError, GauntletConfigError) as exc:
        print(f"esi: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigMismatch, CorruptCatalogue, InternalConsistencyError) as exc:
        print(f"esi: consistency error: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except CatalogueError as exc:
        print(f"esi: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    parser.error(f"unknown command {args.command}")
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
