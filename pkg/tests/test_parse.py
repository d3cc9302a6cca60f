import pytest

from esi.expr import get_basis
from esi.parse import OperatorNotInBasis, ParseError, integer_expr, parse

TWO = "add(ONE,ONE)"

# infix text -> expected prefix tree, written out by hand
INFIX_CASES = [
    ("x", "x"),
    ("a0 + x", "add(a0,x)"),
    ("x - a1 - a0", "sub(sub(x,a1),a0)"),
    ("x*x/a0", "div(mul(x,x),a0)"),
    ("x^x", "pow(x,x)"),
    ("x**a0", "pow(x,a0)"),
    ("x^a0^a1", "pow(x,pow(a0,a1))"),
    ("-x^2", f"sub(ZERO,pow(x,{TWO}))"),
    ("(-x)^a0", "pow(sub(ZERO,x),a0)"),
    ("2*x", f"mul({TWO},x)"),
    ("1/x", "div(ONE,x)"),
    ("exp(-x)", "exp(sub(ZERO,x))"),
    ("log(|x - a0|)", "log(abs(sub(x,a0)))"),
    ("ln(x)", "log(x)"),
    ("sqrt(x + exp(x))", "sqrt(add(x,exp(x)))"),
    ("sin(x)*cos(x)", "mul(sin(x),cos(x))"),
    # unary minus binds tighter than / (as in Python)
    ("x^(-1/x)", "pow(x,div(sub(ZERO,ONE),x))"),
    ("a0 + x*a1", "add(a0,mul(x,a1))"),
    ("3/2", f"div(add({TWO},ONE),{TWO})"),
    ("inv(x) + sq(x)", "add(inv(x),sq(x))"),
]


@pytest.mark.parametrize("text,tree", INFIX_CASES)
def test_infix_matches_hand_built_tree(text, tree):
    assert str(parse(text)) == tree


def test_prefix_and_infix_agree():
    assert parse("add(a0,mul(x,x))") == parse("a0 + x*x")


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 7, 10, 16, 100])
def test_integer_literals_have_the_right_value(n, evaluator):
    assert evaluator.values(integer_expr(n))[0] == n


def test_integer_literals_stay_small():
    assert integer_expr(1000).size < 60


@pytest.mark.parametrize("text", ["", "x +", "add(x)", "foo(x)", "(x", "x)", "a99", "exp x", "x $ x", "|x"])
def test_malformed_input(text):
    with pytest.raises(ParseError):
        parse(text)


def test_parse_error_reports_position():
    with pytest.raises(ParseError) as info:
        parse("x + $")
    assert info.value.position == 4


def test_basis_restriction():
    core = get_basis("core")
    assert str(parse("inv(add(x,a0))", core)) == "inv(add(x,a0))"
    with pytest.raises(OperatorNotInBasis) as info:
        parse("exp(x)", core)
    assert info.value.operator == "exp"
    # constants and numeric literals are always allowed
    parse("2*x - 1", core)
    with pytest.raises(OperatorNotInBasis):
        parse("x + sin(x)", ["add", "x"])
