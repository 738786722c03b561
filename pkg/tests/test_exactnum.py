"""Exact arithmetic layer: Bernoulli values, polynomial ring, linear solver."""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intobs.exactnum import (
    MultiPoly,
    bernoulli_number,
    bernoulli_poly,
    bernoulli_poly_cleared,
    double_factorial,
    invert_matrix,
    monomial_text,
    multinomial,
    rat_from_str,
    rat_to_str,
    rref_exact,
    solve_exact,
)

F = Fraction


def test_bernoulli_values():
    assert bernoulli_number(0) == 1
    assert bernoulli_number(1) == F(-1, 2)
    assert bernoulli_number(2) == F(1, 6)
    assert bernoulli_number(4) == F(-1, 30)
    assert bernoulli_number(6) == F(1, 42)
    assert bernoulli_number(12) == F(-691, 2730)


def test_bernoulli_odd_vanish():
    for m in range(3, 31, 2):
        assert bernoulli_number(m) == 0


def test_bernoulli_poly_small():
    x = MultiPoly.variable(("x",), "x")
    assert bernoulli_poly(1, x) == x - F(1, 2)
    assert bernoulli_poly(2, F(0)) == F(1, 6)
    # B_2(x) = x^2 - x + 1/6
    assert bernoulli_poly(2, x) == x * x - x + F(1, 6)


def test_bernoulli_poly_endpoints():
    for m in range(2, 13):
        assert bernoulli_poly(m, F(0)) == bernoulli_number(m)
        assert bernoulli_poly(m, F(1)) == bernoulli_number(m)


def test_bernoulli_poly_derivative_identity():
    x = MultiPoly.variable(("x",), "x")
    for m in range(0, 12):
        lhs = bernoulli_poly(m + 1, x).derivative("x")
        assert lhs == (m + 1) * bernoulli_poly(m, x)


@given(st.integers(0, 10), st.fractions(), st.fractions(min_value=F(1, 7), max_value=7))
def test_bernoulli_poly_cleared_matches_rational(m, num, den):
    assert bernoulli_poly_cleared(m, num, den) == bernoulli_poly(m, num / den) * den ** m


def test_multinomial():
    assert multinomial(0, []) == 1
    assert multinomial(4, [2, 2]) == 6
    assert multinomial(6, [1, 2, 3]) == 60
    with pytest.raises(ValueError):
        multinomial(5, [2, 2])
    with pytest.raises(ValueError):
        multinomial(2, [-1, 3])


def test_double_factorial():
    assert double_factorial(-1) == 1
    assert double_factorial(0) == 1
    assert double_factorial(5) == 15
    assert double_factorial(6) == 48
    assert double_factorial(9) == 945


def test_rat_serialization():
    assert rat_to_str(F(3, 4)) == "3/4"
    assert rat_to_str(F(-5)) == "-5"
    assert rat_from_str(" -7/3 ") == F(-7, 3)
    assert rat_from_str("12") == F(12)


VARS = ("x", "y", "z")


def polys(vars=VARS, max_terms=5, max_exp=4):
    exps = st.tuples(*[st.integers(0, max_exp)] * len(vars))
    coeff = st.fractions(min_value=-9, max_value=9)
    return st.dictionaries(exps, coeff, max_size=max_terms).map(
        lambda d: MultiPoly(vars, d)
    )


@given(polys(), polys(), polys())
@settings(max_examples=60)
def test_ring_axioms(p, q, r):
    assert (p + q) + r == p + (q + r)
    assert p + q == q + p
    assert p * q == q * p
    assert (p * q) * r == p * (q * r)
    assert p * (q + r) == p * q + p * r
    assert p - p == MultiPoly.zero(VARS)


@given(polys())
def test_pow_matches_repeated_product(p):
    assert p ** 0 == MultiPoly.const(VARS, 1)
    assert p ** 1 == p
    assert p ** 3 == p * p * p


@given(polys())
def test_poly_serialization_round_trip(p):
    assert MultiPoly.from_obj(VARS, p.to_obj()) == p


def test_from_obj_rejects_unknown_fields():
    with pytest.raises(ValueError):
        MultiPoly.from_obj(("x",), [{"exponents": [1], "coeff": "1", "extra": 0}])


def test_to_text_grammar():
    p = MultiPoly(("x1", "x2", "x3"), {(2, 1, 0): 1, (1, 1, 1): 2})
    assert p.to_text() == "x1^2*x2 + 2*x1*x2*x3"
    q = MultiPoly(("a",), {(0,): F(-1, 2), (3,): 1})
    assert q.to_text() == "a^3 - 1/2"
    assert MultiPoly.zero(("a",)).to_text() == "0"
    assert monomial_text(("a", "b"), (0, 0)) == "1"


def test_coeff_section_and_truncate():
    p = MultiPoly(("a", "b"), {(2, 0): 3, (2, 1): 5, (0, 2): 7})
    sec = p.coeff_section({"b": 0})
    assert sec == MultiPoly(("a", "b"), {(2, 0): 3})
    assert p.truncate("b", 1) == MultiPoly(("a", "b"), {(2, 0): 3, (2, 1): 5})
    assert p.degree_in(["a"]) == 2
    assert p.homogeneous_part(3) == MultiPoly(("a", "b"), {(2, 1): 5})


@given(polys(max_terms=3, max_exp=3))
@settings(max_examples=30)
def test_substitute_composes_with_eval(p):
    vals = {"x": F(2), "y": F(-1, 3), "z": F(0)}
    images = {v: MultiPoly.const(("t",), c) for v, c in vals.items()}
    assert p.substitute(images, ("t",)).eval({"t": 0}) == p.eval(vals)


def test_substitute_identity_on_missing_vars():
    p = MultiPoly(("x", "y"), {(1, 2): 1})
    q = p.substitute({"x": MultiPoly.const(("y",), 5)}, ("y",))
    assert q == MultiPoly(("y",), {(2,): 5})


def test_solve_exact_unique():
    rows = [[F(2), F(1)], [F(1), F(-1)]]
    status, x = solve_exact(rows, [F(5), F(1)])
    assert status == "ok"
    assert x == [F(2), F(1)]


def test_solve_exact_inconsistent():
    rows = [[F(1), F(1)], [F(2), F(2)]]
    assert solve_exact(rows, [F(1), F(3)]) == ("inconsistent", None)


def test_solve_exact_underdetermined():
    rows = [[F(1), F(1)]]
    assert solve_exact(rows, [F(1)]) == ("underdetermined", None)
    assert solve_exact([], [], ncols=2) == ("underdetermined", None)
    assert solve_exact([], []) == ("ok", [])


def test_solve_exact_overdetermined_consistent():
    rows = [[F(1), F(0)], [F(0), F(1)], [F(1), F(1)]]
    status, x = solve_exact(rows, [F(3), F(4), F(7)])
    assert status == "ok" and x == [F(3), F(4)]


def test_rref_pivots():
    red, pivots = rref_exact([[F(0), F(2)], [F(3), F(1)]])
    assert pivots == [0, 1]
    assert red == [[F(1), F(0)], [F(0), F(1)]]


def test_invert_matrix():
    m = [[F(1), F(2)], [F(3), F(5)]]
    inv = invert_matrix(m)
    assert inv == [[F(-5), F(2)], [F(3), F(-1)]]
    with pytest.raises(ValueError):
        invert_matrix([[F(1), F(2)], [F(2), F(4)]])
