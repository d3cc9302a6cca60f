import io
import subprocess
import sys

import pytest

from esi.atlas import compute_rho
from esi.cli import EXIT_CONSISTENCY, EXIT_EVAL_FAILURE, EXIT_NOT_FOUND, EXIT_OK, EXIT_USAGE, main
from esi.enumeration import Catalogue, read_catalogue, write_catalogue
from esi.expr import get_basis
from esi.report import read_csv
from gauntlet_corpus import ROWS, write_engines
from oracles import brute_rho


def run(*argv):
    buf = io.StringIO()
    code = main([str(a) for a in argv], out=buf)
    return code, buf.getvalue()


@pytest.fixture(scope="module")
def out_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    code, text = run("enumerate", "--basis", "core,core_log", "--k-max", 4, "--out", d)
    assert code == EXIT_OK, text
    return d


def test_enumerate_table(out_dir):
    cat = read_catalogue(out_dir / "catalogue_core_maths.tsv")
    assert cat.k_max == 4 and cat.levels_done == 4
    assert (out_dir / "catalogue_core_log_maths.tsv").exists()


def test_enumerate_resume_is_identical(out_dir):
    before = (out_dir / "catalogue_core_maths.tsv").read_bytes()
    code, text = run("enumerate", "--basis", "core", "--k-max", 4, "--out", out_dir)
    assert code == EXIT_OK
    assert (out_dir / "catalogue_core_maths.tsv").read_bytes() == before
    assert "seed=0x45534931" in text


def test_bad_arguments(tmp_path):
    assert run("enumerate", "--basis", "quaternions", "--out", tmp_path)[0] == EXIT_USAGE
    assert run("enumerate", "--k-max", 40, "--out", tmp_path)[0] == EXIT_USAGE
    assert run("enumerate", "--seed", "banana", "--out", tmp_path)[0] == EXIT_USAGE
    assert run("frobnicate")[0] == EXIT_USAGE
    assert run("atlas", "--out", tmp_path)[0] == EXIT_USAGE  # nothing enumerated yet


def test_seed_mismatch_is_a_consistency_error(out_dir):
    assert run("atlas", "--basis", "core", "--k-max", 4, "--seed", 7, "--out", out_dir)[0] == EXIT_CONSISTENCY


def test_atlas_outputs(out_dir):
    code, _ = run("atlas", "--basis", "core,core_log", "--k-max", 4, "--out", out_dir)
    assert code == EXIT_OK
    comment, rows = read_csv((out_dir / "rho.csv").read_text())
    assert comment.startswith("esi ") and "seed=0x45534931" in comment
    cats = {b: read_catalogue(out_dir / f"catalogue_{b}.tsv") for b in ("core_maths", "core_log_maths")}
    for r in rows:
        cat = cats[r["basis"]]
        n, m = brute_rho(cat.records, int(r["k"]))
        assert (int(r["n_total"]), int(r["n_integrable"])) == (n, m)
        assert float(r["rho"]) == compute_rho(cat, int(r["k"])).rho
    svg = (out_dir / "rho.svg").read_text()
    assert svg.count('class="series"') == 2
    _, dec = read_csv((out_dir / "decomposition.csv").read_text())
    assert {r["partition"] for r in dec} == {"log/exp"}
    for name in ("classes.csv", "growth.csv", "gap.csv"):
        assert (out_dir / name).exists()
    assert run("verify", out_dir / "rho.csv")[0] == EXIT_OK


def test_atlas_is_deterministic(out_dir, tmp_path):
    first = (out_dir / "rho.csv").read_bytes() if (out_dir / "rho.csv").exists() else None
    run("atlas", "--basis", "core,core_log", "--k-max", 4, "--out", out_dir)
    again = (out_dir / "rho.csv").read_bytes()
    run("atlas", "--basis", "core,core_log", "--k-max", 4, "--out", out_dir)
    assert (out_dir / "rho.csv").read_bytes() == again
    assert first is None or first == again


def test_atlas_rejects_empty_catalogue(tmp_path):
    write_catalogue(Catalogue(get_basis("core"), 0x45534931, 1, [], []), tmp_path / "catalogue_core_maths.tsv")
    assert run("atlas", "--basis", "core", "--k-max", 1, "--out", tmp_path)[0] == EXIT_USAGE


def test_integrate_exit_codes(out_dir):
    code, text = run("integrate", "--basis", "core_log", "--out", out_dir, "1/x")
    assert code == EXIT_OK
    assert "primitive: log(x)" in text and "verified: true" in text
    code, text = run("integrate", "--basis", "core_log", "--out", out_dir, "exp(x)")
    assert code == EXIT_NOT_FOUND  # integrands may use operators outside the basis
    code, text = run("integrate", "--basis", "core_log", "--out", out_dir, "exp(x)/(1+x^x)")
    assert code == EXIT_NOT_FOUND and "not a proof" in text
    code, text = run("integrate", "--basis", "core_log", "--out", out_dir, "log(-x)")
    assert code == EXIT_EVAL_FAILURE
    assert run("integrate", "--basis", "core_log", "--out", out_dir, "((x")[0] == EXIT_USAGE


def test_verify_catalogue(out_dir, tmp_path):
    path = out_dir / "catalogue_core_maths.tsv"
    code, text = run("verify", path)
    assert code == EXIT_OK and text.startswith("OK")
    lines = path.read_text().split("\n")
    i = next(n for n, ln in enumerate(lines) if ln.startswith("3\t"))
    cols = lines[i].split("\t")
    cols[4] = "0" * 32
    lines[i] = "\t".join(cols)
    bad = tmp_path / "bad.tsv"
    bad.write_text("\n".join(lines))
    assert run("verify", bad)[0] == EXIT_CONSISTENCY
    assert run("verify", tmp_path / "nothing.tsv")[0] == EXIT_USAGE


def test_env_seed_override(tmp_path, monkeypatch):
    monkeypatch.setenv("ESI_SEED", "0x1234")
    code, text = run("enumerate", "--basis", "core", "--k-max", 2, "--out", tmp_path)
    assert code == EXIT_OK and "seed=0x1234" in text
    assert read_catalogue(tmp_path / "catalogue_core_maths.tsv").seed == 0x1234
    # an explicit flag beats the environment
    code, text = run("enumerate", "--basis", "core", "--k-max", 2, "--seed", 5, "--out", tmp_path / "b")
    assert "seed=0x5" in text


def test_config_file(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text(f"[run]\nbasis = trig\nk_max = 3\nout = {tmp_path / 'o'}\n")
    code, text = run("enumerate", "--config", ini)
    assert code == EXIT_OK and "bases=trig_maths k_max=3" in text
    assert (tmp_path / "o" / "catalogue_trig_maths.tsv").exists()


def test_gauntlet_and_report(out_dir, tmp_path):
    rows = ROWS[:3] + ROWS[16:17]
    cfg = write_engines(tmp_path, rows)
    corpus = tmp_path / "corpus.txt"
    corpus.write_text("".join(f"G{i}\t{r[0]}\n" for i, r in enumerate(rows)))
    code, text = run("gauntlet", "--gauntlet-config", cfg, "--corpus", corpus, "--out", out_dir)
    assert code == EXIT_OK
    assert "solved\t3" in text and "impossible\t1" in text
    assert run("verify", out_dir / "verdicts.jsonl")[0] == EXIT_OK
    code, _ = run("report", "--basis", "core,core_log", "--k-max", 4, "--out", out_dir)
    assert code == EXIT_OK
    report = (out_dir / "report.md").read_text()
    assert "## CAS gauntlet" in report and "## Catalogue core_maths" in report
    assert run("gauntlet", "--corpus", corpus, "--out", out_dir)[0] == EXIT_USAGE


def test_console_script_runs():
    proc = subprocess.run([sys.executable, "-m", "esi.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("esi ")
