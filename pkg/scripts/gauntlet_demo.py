#!/usr/bin/env python3
"""Two-tier CAS cascade on a small corpus, with scripted stand-in engines.

Writes an engine config, two mock-engine scripts and a corpus into --out,
then runs the cascade twice (the second run is served from the journal).
Swap the strategy templates in the generated INI for real engine command
lines to run an actual comparison.

    python scripts/gauntlet_demo.py --out gauntlet-demo
"""
import argparse
import json
from pathlib import Path

from esi.expr import strip_wrappers
from esi.gauntlet import CascadeStats, load_config, render_for_engine, run_cascade, tally
from esi.parse import parse

# integrand, answer, what the "fast" engine does, what the "thorough" engine does
CORPUS = [
    ("2*x*exp(x^2)", "exp(x^2)", {"default": "ok"}, {"default": "ok"}),
    ("x^x*(log(x)+1)", "x^x", {"default": "fail"}, {"default": "sleep", "risch": "ok"}),
    ("((2*x+1)*exp(x)+1)/(2*sqrt(x+exp(-x)))", "exp(x)*sqrt(x+exp(-x))", {}, {}),
    ("x^(-2-1/x)*(1-log(x))", "-x^(-1/x)", {"manual": "ok"}, {}),
    ("exp(x^2)", None, {"default": "garbage"}, {}),
    ("exp(x)/x", None, {}, {"*": "sleep"}),
]

INI = """[gauntlet]
engines = fast, thorough
initial_timeout = {t0}
stress_timeout = {t1}
workers = 4

[engine.fast]
syntax = infix-caret
default_strategy = default
strategy.default = {{python}} -m esi.mock_engine {{config_dir}}/fast.json default {{input}}
strategy.manual = {{python}} -m esi.mock_engine {{config_dir}}/fast.json manual {{input}}

[engine.thorough]
syntax = functional
default_strategy = default
strategy.default = {{python}} -m esi.mock_engine {{config_dir}}/thorough.json default {{input}}
strategy.risch = {{python}} -m esi.mock_engine {{config_dir}}/thorough.json risch {{input}}
"""


def action(kind, answer, syntax):
    if kind == "ok":
        return "print:" + render_for_engine(parse(answer), syntax)
    return {"sleep": "sleep:30", "garbage": "garbage"}.get(kind, "fail")


def write_inputs(out: Path, t0: float, t1: float) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    scripts = {"fast": ("infix-caret", ("default", "manual")), "thorough": ("functional", ("default", "risch"))}
    for name, (syntax, strategies) in scripts.items():
        table = {}
        for integrand, answer, fast, thorough in CORPUS:
            acts = fast if name == "fast" else thorough
            key = render_for_engine(strip_wrappers(parse(integrand)), syntax)
            table[key] = {s: action(acts.get(s, acts.get("*", "fail")), answer, syntax) for s in strategies}
        (out / f"{name}.json").write_text(json.dumps({"default": "fail", "integrands": table}, indent=1))
    (out / "corpus.txt").write_text("".join(f"D{i}\t{row[0]}\n" for i, row in enumerate(CORPUS)))
    cfg = out / "engines.ini"
    cfg.write_text(INI.format(t0=t0, t1=t1))
    return cfg


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="gauntlet-demo")
    ap.add_argument("--initial-timeout", type=float, default=1.0)
    ap.add_argument("--stress-timeout", type=float, default=2.0)
    args = ap.parse_args()
    out = Path(args.out)
    cfg = load_config(write_inputs(out, args.initial_timeout, args.stress_timeout))
    items = [(cid, text) for cid, text in (ln.split("\t") for ln in (out / "corpus.txt").read_text().splitlines())]
    for attempt in ("first run", "rerun"):
        stats = CascadeStats()
        verdicts = run_cascade(items, cfg, journal=out / "journal.jsonl", verdicts_path=out / "verdicts.jsonl",
                               stats=stats)
        print(f"{attempt}: launched={stats.launched} reused={stats.skipped}")
    for v in verdicts:
        tried = ", ".join(f"{a.engine}/{a.strategy}@{a.tier}={a.outcome}" for a in v.attempts)
        print(f"{v.integrand_id} {v.classification:<10} failed_initial={v.failed_initial!s:<5} {tried}")
    print(tally(verdicts))
