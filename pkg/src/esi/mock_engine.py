"""Scripted stand-in for a computer-algebra engine.

Usage: ``python -m esi.mock_engine SCRIPT STRATEGY INPUT``

SCRIPT is a JSON file::

    {"default": "fail",
     "integrands": {"2*x*exp(x^2)": {"default": "print:exp(x^2)", "*": "fail"}}}

Actions: ``print:TEXT`` (exit 0), ``fail`` (prints an unevaluated integral,
exit 1), ``sleep:SECONDS`` (then fail), ``garbage`` (prints an unknown
function, exit 0).  Lookup is by exact input text, then strategy, then
``*``, then the script-wide default.
"""
from __future__ import annotations

import json
import sys
import time


def choose_action(script: dict, strategy: str, text: str) -> str:
    per = script.get("integrands", {}).get(text, {})
    return per.get(strategy, per.get("*", script.get("default", "fail")))


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 3:
        print("usage: mock_engine SCRIPT STRATEGY INPUT", file=sys.stderr)
        return 2
    path, strategy, text = argv
    with open(path, encoding="utf-8") as fh:
        script = json.load(fh)
    action = choose_action(script, strategy, text)
    if action.startswith("print:"):
        print(action[len("print:"):])
        return 0
    if action.startswith("sleep:"):
        time.sleep(float(action[len("sleep:"):]))
        return 1
    if action == "garbage":
        print("HypergeometricPFQ(x)")
        return 0
    print(f"Integrate({text}, x)")
    return 1


if __name__ == "__main__":
    sys.exit(main())
