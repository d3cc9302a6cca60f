import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esi.atlas import (
    FitRefused,
    alpha_raw,
    complexity_gap_stats,
    compute_rho,
    compute_rho_exact,
    decompose_rho,
    equivalence_classes,
    fit_growth,
    geometric_rate,
    raw_count_oracle,
    rho_curve,
)
from esi.enumeration import Catalogue, CatalogueRecord, catalogue_from_expressions
from esi.expr import OperatorBasis, get_basis
from oracles import brute_rho, tree_counts


def _rec(i, k, fp, d_fp, expr="x", d_status="ok"):
    return CatalogueRecord(i, "core_maths", k, expr, fp, "ONE", d_fp, d_status)


def _toy(records, k_max=3):
    return Catalogue(get_basis("core"), 0x45534931, k_max, records, [])


def test_hand_counted_rho():
    # F: x (d=1), 1/x (d=-1/x^2), x+x (d=2=const), x*x (d=2x = x+x)
    recs = [
        _rec(0, 1, "X", "ONE"),
        _rec(1, 2, "INV", "NEG_INV_SQ"),
        _rec(2, 3, "TWOX", "TWO"),
        _rec(3, 3, "SQ", "TWOX"),
    ]
    cat = _toy(recs)
    assert compute_rho(cat, 1).n_integrable == 0
    p = compute_rho(cat, 3)
    assert (p.n_total, p.n_integrable) == (4, 1)
    assert p.rho == 0.25 and p.rho_err == pytest.approx(math.sqrt(0.25 * 0.75 / 4))
    ex = compute_rho_exact(cat, 3)
    assert (ex.n_total, ex.n_integrable) == (2, 1)


def test_no_matches_gives_zero():
    cat = _toy([_rec(0, 1, "A", "Z"), _rec(1, 2, "B", "Y")], 2)
    p = compute_rho(cat, 2)
    assert p.rho == 0 and p.rho_err == 0


def test_failed_derivatives_stay_in_denominator():
    cat = _toy([_rec(0, 1, "A", "A"), _rec(1, 1, "B", None, d_status="domain_failure")], 1)
    p = compute_rho(cat, 1)
    assert (p.n_total, p.n_integrable) == (2, 1)


def test_k_out_of_range():
    cat = _toy([_rec(0, 1, "A", "A")], 1)
    with pytest.raises(IndexError):
        compute_rho(cat, 2)
    with pytest.raises(IndexError):
        compute_rho(cat, 0)


def test_rho_matches_brute_force(small_core):
    for k in range(1, small_core.k_max + 1):
        n, m = brute_rho(small_core.records, k)
        p = compute_rho(small_core, k)
        assert (p.n_total, p.n_integrable) == (n, m)
    assert [p.rho for p in rho_curve(small_core)] == [compute_rho(small_core, k).rho
                                                       for k in range(1, small_core.k_max + 1)]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 4), st.integers(0, 6), st.integers(0, 8)), min_size=1, max_size=40))
def test_rho_matches_brute_force_on_random_catalogues(rows):
    recs = [_rec(i, k, f"F{i}-{a}" if a > 3 else f"S{a}", f"S{b}") for i, (k, a, b) in enumerate(sorted(rows))]
    # fingerprints are unique within a catalogue
    uniq, seen = [], set()
    for r in recs:
        if r.fp not in seen:
            seen.add(r.fp)
            uniq.append(CatalogueRecord(len(uniq), *[getattr(r, f) for f in ("basis", "complexity", "expr", "fp",
                                                                              "d_expr", "d_fp", "d_status")]))
    cat = _toy(uniq, 4)
    for k in range(1, 5):
        n, m = brute_rho(uniq, k)
        p = compute_rho(cat, k)
        assert (p.n_total, p.n_integrable) == (n, m)


def test_decomposition_buckets():
    cat = catalogue_from_expressions(["log(x)", "exp(x)", "mul(log(x),exp(x))", "x", "inv(x)"], "ext_log")
    k = cat.k_max
    parts = dict(decompose_rho(cat, k))
    assert parts["log_only"].n_total == 1 and parts["exp_only"].n_total == 1 and parts["both"].n_total == 1
    assert parts["neither"].n_total == 2
    assert sum(p.n_total for p in parts.values()) == compute_rho(cat, k).n_total
    assert sum(p.n_integrable for p in parts.values()) == compute_rho(cat, k).n_integrable
    with pytest.raises(ValueError):
        decompose_rho(cat, k, "sinh/cosh")


def test_degenerate_partition_equals_rho(small_core):
    k = small_core.k_max
    parts = dict(decompose_rho(small_core, k))
    assert parts["neither"] == compute_rho(small_core, k)
    assert all(p.n_total == 0 for lab, p in parts.items() if lab != "neither")


def test_partition_sums(small_ext_log):
    for part in ("log/exp", "sin/cos"):
        for k in range(1, small_ext_log.k_max + 1):
            parts = decompose_rho(small_ext_log, k, part)
            assert sum(p.n_total for _, p in parts) == compute_rho(small_ext_log, k).n_total


def test_gap_stats_hand_computed():
    # div(x,x) puts the constant 1 in F, so d/dx x is matched
    cat = catalogue_from_expressions(["x", "inv(x)", "add(x,x)", "mul(x,x)", "log(x)", "div(x,x)"], "core_log")
    g = complexity_gap_stats(cat, cat.k_max)
    by_fp = {r.fp: r.complexity for r in cat.records}
    deltas = [by_fp[r.d_fp] - r.complexity for r in cat.records if r.d_fp in by_fp]
    assert by_fp[cat.records[0].d_fp] == 3  # x -> 1, cheapest 1 is div(x,x)
    assert g.n_matched == len(deltas)
    assert g.n_matched + g.n_unmatched == len(cat.records)
    assert g.mean_delta == pytest.approx(sum(deltas) / len(deltas))
    assert g.frac_nonpositive == pytest.approx(sum(d <= 0 for d in deltas) / len(deltas))


def test_equivalence_classes(small_core):
    classes, summary = equivalence_classes(small_core)
    by_id = {r.id: r for r in small_core.records}
    assert sum(len(c.members) for c in classes) == sum(r.d_status == "ok" for r in small_core.records)
    for c in classes:
        assert len({by_id[i].d_fp for i in c.members}) == 1
        keys = [(by_id[i].complexity, by_id[i].expr) for i in c.members]
        assert keys == sorted(keys)
        assert c.representative_integrand == by_id[c.members[0]].d_expr
    assert summary.n_classes == len(classes)
    assert summary.n_multi == sum(len(c.members) > 1 for c in classes)
    assert len(summary.attractors) == min(20, len(classes))
    top = {c.representative_integrand for c in summary.attractors[:5]}
    assert "ONE" in top


def test_additive_shift_shares_a_class():
    cat = catalogue_from_expressions(["exp(x)", "add(a0,exp(x))"], "ext_log")
    classes, _ = equivalence_classes(cat)
    assert len(classes) == 1 and len(classes[0].members) == 2


def test_alpha_raw_values():
    assert alpha_raw("core") == pytest.approx(1 + 2 * math.sqrt(10))
    assert alpha_raw("ext_log") == pytest.approx(11.32455532)
    assert alpha_raw(OperatorBasis("bare", (), ("add", "sub", "mul", "div", "pow"))) == pytest.approx(6.3245553)


def test_raw_count_oracle():
    assert raw_count_oracle("core", 2) == 2 and raw_count_oracle("core", 3) == 22
    for name in ("core", "ext_log", "trig"):
        b = get_basis(name)
        assert [raw_count_oracle(b, k) for k in range(1, 12)] == tree_counts(b.p0, b.p1, b.p2, 11)
    with pytest.raises(ValueError):
        raw_count_oracle("core", 0)


def test_raw_count_ratio_approaches_alpha_raw():
    b = get_basis("ext")
    ratio = raw_count_oracle(b, 21) / raw_count_oracle(b, 20)
    assert abs(ratio - alpha_raw(b)) / alpha_raw(b) < 0.10


def test_geometric_rate_exact():
    ks = list(range(2, 9))
    assert geometric_rate(ks, [10 * 3**k for k in ks]) == pytest.approx(3.0, abs=1e-9)
    with pytest.raises(FitRefused):
        geometric_rate([1, 2], [3, 9])


def test_fit_growth(small_core):
    g = fit_growth(small_core)
    assert g.fit_range == (2, 5)
    assert 1 < g.alpha_eff < g.alpha_raw
    assert g.ratio == pytest.approx(g.alpha_eff / g.beta)
    with pytest.raises(FitRefused):
        fit_growth(_toy([_rec(0, 1, "A", "A"), _rec(1, 2, "B", "B")], 2))
