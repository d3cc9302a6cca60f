import pytest
from hypothesis import given, settings

from esi.deriv import derivative_record, differentiate, min_complexity_of_derivative
from esi.parse import parse
from oracles import fd_agreement
from test_expr import exprs


@pytest.mark.parametrize(
    "f,df",
    [
        ("x", "ONE"),
        ("a0", "ZERO"),
        ("add(a0,a1)", "ZERO"),
        ("sub(a0,x)", "sub(ZERO,ONE)"),
        ("log(x)", "inv(x)"),
        ("exp(x)", "exp(x)"),
        ("exp(mul(x,x))", "mul(add(x,x),exp(mul(x,x)))"),
        ("inv(x)", "sub(ZERO,inv(mul(x,x)))"),
        ("mul(a0,x)", "a0"),
        ("sq(x)", "add(x,x)"),
        ("sin(x)", "cos(x)"),
        ("cos(x)", "sub(ZERO,sin(x))"),
        ("log(abs(sub(x,a0)))", "inv(sub(x,a0))"),
    ],
)
def test_known_derivatives(f, df):
    assert str(differentiate(parse(f))) == df


def test_parameters_keep_their_indices():
    d = differentiate(parse("mul(a3,exp(mul(a1,x)))"))
    assert "a3" in str(d) and "a1" in str(d)


def test_derivative_record_complexity():
    rec = derivative_record(parse("log(x)"))
    assert rec.derivative_complexity == 2


@pytest.mark.parametrize(
    "f",
    [
        "pow(x,x)",
        "pow(abs(sub(x,a0)),a1)",
        "sqrt(add(x,inv(exp(x))))",
        "div(mul(x,x),cos(x))",
        "abs(sub(x,a0))",
        "mul(exp(x),sqrt(abs(sub(x,inv(exp(x))))))",
        "sqrt(abs(div(sub(x,pow(x,x)),x)))",
        "log(abs(log(x)))",
    ],
)
def test_matches_finite_differences(f, grid):
    _check_fd(parse(f), grid, need=10)


@settings(max_examples=200, deadline=None)
@given(e=exprs(max_leaves=5))
def test_random_trees_match_finite_differences(e, grid):
    _check_fd(e, grid, need=0)


def _check_fd(e, grid, need):
    valid, bad = fd_agreement(e, differentiate(e), grid.xs[:20], grid.params)
    assert not bad, (str(e), bad[:3])
    assert valid >= need


def test_min_complexity_of_derivative(evaluator):
    table = {evaluator.fingerprint(parse("inv(x)")).fingerprint: 2}
    assert min_complexity_of_derivative(parse("log(x)"), table, evaluator) == (2, True)
    k, matched = min_complexity_of_derivative(parse("exp(exp(x))"), table, evaluator)
    assert not matched and k == differentiate(parse("exp(exp(x))")).complexity
