"""Run integrands through external computer-algebra engines in two timeout tiers.

Engines are plain command lines from an INI file.  Every query launches one
subprocess; its last non-empty stdout line is taken as the claimed
antiderivative and checked by differentiation against the integrand.

Config schema::

    [gauntlet]
    engines = sympy, fricas          ; sections [engine.sympy], [engine.fricas]
    initial_timeout = 180
    stress_timeout = 600
    workers = 4

    [engine.sympy]
    syntax = infix-caret             ; or functional
    parse_output = true
    default_strategy = default
    stress_strategies = default, manual, risch   ; optional, default: all
    strategy.default = python3 integrate.py --input {input}
    strategy.manual = python3 integrate.py --manual --input {input}

Templates are split with shell rules before substitution, so ``{input}`` is
always a single argument.  ``{python}`` expands to the running interpreter
and ``{strategy}`` to the strategy name.
"""
from __future__ import annotations

import configparser
import json
import os
import re
import shlex
import subprocess
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .deriv import differentiate
from .expr import Expr, strip_wrappers, to_infix
from .fingerprint import DEFAULT_SEED, Evaluator, make_grid
from .parse import ParseError, parse

SOLVED = "solved"
SOLVED_UNVERIFIED = "solved_unverified"
FAILED = "failed"
TIMEOUT = "timeout"
ENGINE_UNAVAILABLE = "engine_unavailable"

HARD = "hard"
IMPOSSIBLE = "impossible"

VERIFIED = "verified"
UNPARSEABLE = "unparseable"
MISMATCH = "mismatch"
UNVERIFIABLE = "unverifiable"

INITIAL = "initial"
STRESS = "stress"
TIERS = (INITIAL, STRESS)


class GauntletConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EngineAdapter:
    name: str
    strategies: dict[str, str]
    syntax: str = "infix-caret"
    parse_output: bool = True
    default_strategy: str = "default"
    stress_strategies: tuple[str, ...] = ()

    @property
    def command_template(self) -> str:
        return self.strategies[self.default_strategy]

    def stress_list(self) -> tuple[str, ...]:
        return self.stress_strategies or tuple(self.strategies)

    def command(self, strategy: str, rendered: str) -> list[str]:
        subs = {"input": rendered, "python": sys.executable, "strategy": strategy}
        return [_substitute(tok, subs) for tok in shlex.split(self.strategies[strategy])]


def _substitute(token: str, subs: dict[str, str]) -> str:
    return re.sub(r"\{(input|python|strategy)\}", lambda m: subs[m.group(1)], token)


@dataclass(frozen=True)
class GauntletConfig:
    engines: tuple[EngineAdapter, ...]
    initial_timeout: float = 180.0
    stress_timeout: float = 600.0
    workers: int = 4
    seed: int = DEFAULT_SEED

    def timeout(self, tier: str) -> float:
        return self.initial_timeout if tier == INITIAL else self.stress_timeout


def load_config(path: str | os.PathLike) -> GauntletConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    if not cp.read(path, encoding="utf-8"):
        raise GauntletConfigError(f"cannot read gauntlet config {path}")
    return config_from_parser(cp, base_dir=Path(path).parent)


def config_from_parser(cp: configparser.ConfigParser, base_dir: Path | None = None) -> GauntletConfig:
    if not cp.has_section("gauntlet"):
        raise GauntletConfigError("missing [gauntlet] section")
    g = cp["gauntlet"]
    names = [n.strip() for n in g.get("engines", "").split(",") if n.strip()]
    if not names:
        raise GauntletConfigError("no engines listed")
    engines = []
    for name in names:
        sec = f"engine.{name}"
        if not cp.has_section(sec):
            raise GauntletConfigError(f"missing [{sec}] section")
        s = cp[sec]
        strategies = {k[len("strategy."):]: v for k, v in s.items() if k.startswith("strategy.")}
        if base_dir is not None:
            strategies = {k: v.replace("{config_dir}", str(base_dir)) for k, v in strategies.items()}
        default = s.get("default_strategy", "default")
        if default not in strategies:
            raise GauntletConfigError(f"engine {name}: default strategy {default!r} has no template")
        stress = tuple(x.strip() for x in s.get("stress_strategies", "").split(",") if x.strip())
        for st in stress:
            if st not in strategies:
                raise GauntletConfigError(f"engine {name}: stress strategy {st!r} has no template")
        syntax = s.get("syntax", "infix-caret")
        if syntax not in ("infix-caret", "functional"):
            raise GauntletConfigError(f"engine {name}: unknown syntax {syntax!r}")
        engines.append(EngineAdapter(name, strategies, syntax, s.getboolean("parse_output", True), default, stress))
    return GauntletConfig(
        tuple(engines),
        g.getfloat("initial_timeout", 180.0),
        g.getfloat("stress_timeout", 600.0),
        g.getint("workers", 4),
        int(g.get("seed", str(DEFAULT_SEED)), 0),
    )


def render_for_engine(e: Expr, syntax: str = "infix-caret") -> str:
    return to_infix(e, syntax)


_MMA_CALL = re.compile(r"\b(Log|Exp|Sqrt|Sin|Cos|Abs)\[")


def _normalize_output(text: str) -> str:
    """Map Mathematica-style calls onto the infix reader's names."""
    text = _MMA_CALL.sub(lambda m: m.group(1).lower() + "(", text)
    return text.replace("]", ")")


def verify_engine_output(claimed: str, integrand: Expr, evaluator: Evaluator | None = None,
                         alternates: Sequence[Expr] = ()) -> str:
    """Check a claimed antiderivative by differentiating it.

    Returns ``verified``, ``unparseable`` (unknown names or syntax),
    ``mismatch`` or ``unverifiable`` (the integrand cannot be evaluated on the
    grid).  ``alternates`` are further forms of the integrand that count as a
    match, e.g. the wrapper-stripped text that was sent to the engine.
    """
    ev = evaluator or Evaluator(make_grid(DEFAULT_SEED))
    try:
        prim = parse(_normalize_output(claimed))
    except ParseError:
        return UNPARSEABLE
    targets = [ev.fingerprint(t) for t in (integrand, *alternates)]
    targets = {t.fingerprint for t in targets if t.ok}
    if not targets:
        return UNVERIFIABLE
    out = ev.fingerprint(differentiate(prim))
    return VERIFIED if out.ok and out.fingerprint in targets else MISMATCH


@dataclass(frozen=True)
class Attempt:
    engine: str
    strategy: str
    tier: str
    outcome: str
    check: str = ""
    claimed: str = ""

    def key(self) -> tuple[str, str, str]:
        return (TIERS.index(self.tier), self.engine, self.strategy)


@dataclass(frozen=True)
class GauntletVerdict:
    integrand_id: str
    integrand: str
    attempts: tuple[Attempt, ...]
    tier: str
    classification: str
    failed_initial: bool

    def to_json(self) -> str:
        d = asdict(self)
        d["attempts"] = [asdict(a) for a in self.attempts]
        return json.dumps(d, sort_keys=True, separators=(",", ":"))


def classify(attempts: Iterable[Attempt], engines: Sequence[EngineAdapter], tiers: Sequence[str]) -> tuple[str, bool]:
    """(classification, failed_initial).

    solved: any attempt solved, verified or not.  impossible: the stress tier
    ran and every stress strategy of every engine ended failed or timeout.
    hard: everything else that failed the initial sweep (stress not run, or
    some stress attempt could not be launched).
    """
    attempts = list(attempts)
    ok = (SOLVED, SOLVED_UNVERIFIED)
    failed_initial = not any(a.outcome in ok for a in attempts if a.tier == INITIAL)
    if any(a.outcome in ok for a in attempts):
        return SOLVED, failed_initial
    if STRESS in tiers:
        done = {(a.engine, a.strategy): a.outcome for a in attempts if a.tier == STRESS}
        expected = [(eng.name, s) for eng in engines for s in eng.stress_list()]
        if expected and all(done.get(k) in (FAILED, TIMEOUT) for k in expected):
            return IMPOSSIBLE, failed_initial
    return HARD, failed_initial


def _run_engine(cmd: list[str], timeout: float) -> tuple[str, str]:
    """(raw outcome, last stdout line) without interpretation of the answer."""
    try:
        proc = subprocess.run(cmd, capture_output=True, text=True, timeout=timeout, stdin=subprocess.DEVNULL)
    except subprocess.TimeoutExpired:
        return TIMEOUT, ""
    except OSError:
        return ENGINE_UNAVAILABLE, ""
    lines = [ln.strip() for ln in proc.stdout.splitlines() if ln.strip()]
    if proc.returncode != 0 or not lines:
        return FAILED, ""
    return SOLVED, lines[-1]


class Journal:
    """Append-only JSON-lines log of finished attempts; one writer."""

    def __init__(self, path: str | os.PathLike | None):
        self.path = Path(path) if path is not None else None
        self.done: dict[tuple, dict] = {}
        if self.path is not None and self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError:
                    continue  # torn final line from an interrupted run
                self.done[self._key(rec)] = rec

    @staticmethod
    def _key(rec: dict) -> tuple:
        return (rec["integrand_id"], rec["integrand"], rec["engine"], rec["strategy"], rec["tier"])

    def get(self, rec_key: tuple) -> dict | None:
        return self.done.get(rec_key)

    def append(self, rec: dict) -> None:
        self.done[self._key(rec)] = rec
        if self.path is not None:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


@dataclass
class CascadeStats:
    launched: int = 0
    skipped: int = 0
    elapsed: dict = field(default_factory=dict)


def _as_corpus(corpus) -> list[tuple[str, Expr]]:
    out = []
    for i, item in enumerate(corpus):
        if isinstance(item, tuple):
            cid, e = item
        else:
            cid, e = f"I{i + 1:04d}", item
        out.append((str(cid), parse(e) if isinstance(e, str) else e))
    return out


def run_cascade(
    corpus,
    config: GauntletConfig,
    tiers: Sequence[str] = TIERS,
    journal: str | os.PathLike | None = None,
    verdicts_path: str | os.PathLike | None = None,
    stats: CascadeStats | None = None,
) -> list[GauntletVerdict]:
    """Initial sweep with each engine's default strategy, then escalate survivors.

    Attempts already in ``journal`` are reused instead of relaunched.  Wall
    clock timing is the only nondeterminism; it goes to the journal, never to
    the verdicts.
    """
    for t in tiers:
        if t not in TIERS:
            raise ValueError(f"unknown tier {t!r}")
    items = _as_corpus(corpus)
    ev = Evaluator(make_grid(config.seed))
    jr = Journal(journal)
    stats = stats if stats is not None else CascadeStats()
    # what the engines see: abs guards under log/sqrt/pow bases removed
    submitted = {cid: strip_wrappers(e) for cid, e in items}
    attempts: dict[str, list[Attempt]] = {cid: [] for cid, _ in items}

    def run_tier(tier: str, jobs: list[tuple[str, EngineAdapter, str]]) -> None:
        pending = []
        for cid, eng, strat in jobs:
            text = str(items_by_id[cid])
            key = (cid, text, eng.name, strat, tier)
            rec = jr.get(key)
            if rec is not None:
                stats.skipped += 1
                attempts[cid].append(Attempt(eng.name, strat, tier, rec["outcome"], rec["check"], rec["claimed"]))
            else:
                pending.append((cid, eng, strat, key))
        timeout = config.timeout(tier)
        with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
            futures = []
            for cid, eng, strat, key in pending:
                cmd = eng.command(strat, render_for_engine(submitted[cid], eng.syntax))
                futures.append((cid, eng, strat, key, pool.submit(_timed, cmd, timeout)))
            # collected in submission order so journal order is reproducible
            for cid, eng, strat, key, fut in futures:
                raw, claimed, secs = fut.result()
                stats.launched += 1
                outcome, check = raw, ""
                if raw == SOLVED:
                    if eng.parse_output:
                        check = verify_engine_output(claimed, items_by_id[cid], ev, (submitted[cid],))
                        outcome = {VERIFIED: SOLVED, MISMATCH: FAILED}.get(check, SOLVED_UNVERIFIED)
                    else:
                        outcome = SOLVED_UNVERIFIED
                jr.append({"integrand_id": cid, "integrand": key[1], "engine": eng.name, "strategy": strat,
                           "tier": tier, "outcome": outcome, "check": check, "claimed": claimed,
                           "seconds": round(secs, 3)})
                attempts[cid].append(Attempt(eng.name, strat, tier, outcome, check, claimed))

    items_by_id = dict(items)
    run_tier(INITIAL, [(cid, eng, eng.default_strategy) for cid, _ in items for eng in config.engines])
    if STRESS in tiers:
        survivors = [cid for cid, _ in items
                     if not any(a.outcome in (SOLVED, SOLVED_UNVERIFIED) for a in attempts[cid])]
        run_tier(STRESS, [(cid, eng, s) for cid in survivors for eng in config.engines for s in eng.stress_list()])

    verdicts = []
    for cid, e in items:
        atts = tuple(sorted(attempts[cid], key=Attempt.key))
        cls, failed_initial = classify(atts, config.engines, tiers)
        tier = STRESS if any(a.tier == STRESS for a in atts) else INITIAL
        verdicts.append(GauntletVerdict(cid, str(e), atts, tier, cls, failed_initial))
    if verdicts_path is not None:
        write_verdicts(verdicts, verdicts_path)
    return verdicts


def _timed(cmd: list[str], timeout: float) -> tuple[str, str, float]:
    t0 = time.monotonic()
    raw, claimed = _run_engine(cmd, timeout)
    return raw, claimed, time.monotonic() - t0


def write_verdicts(verdicts: Iterable[GauntletVerdict], path: str | os.PathLike) -> None:
    text = "".join(v.to_json() + "\n" for v in verdicts)
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def read_verdicts(path: str | os.PathLike) -> list[GauntletVerdict]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        d = json.loads(line)
        d["attempts"] = tuple(Attempt(**a) for a in d["attempts"])
        out.append(GauntletVerdict(**d))
    return out


def tally(verdicts: Iterable[GauntletVerdict]) -> dict[str, int]:
    out = {SOLVED: 0, HARD: 0, IMPOSSIBLE: 0, "failed_initial": 0}
    for v in verdicts:
        out[v.classification] += 1
        out["failed_initial"] += v.failed_initial
    return out


def read_corpus(path: str | os.PathLike) -> list[tuple[str, Expr]]:
    """One integrand per line, optionally ``id<TAB>expression``; # comments."""
    out = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "\t" in line:
            cid, text = line.split("\t", 1)
        else:
            cid, text = f"L{n:04d}", line
        out.append((cid.strip(), parse(text.strip())))
    return out
