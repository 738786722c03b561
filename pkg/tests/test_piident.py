"""Dilaton pushforward polynomials and their four Bernoulli identities."""

import json
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intobs.exactnum import MultiPoly, bernoulli_number, bernoulli_poly
from intobs.piident import (
    UNIT,
    FormalClassRing,
    GenKey,
    RatFunc,
    all_pass,
    build_PQ,
    build_f_exponent,
    gen_label,
    stable_splits,
    verify_dilaton_identities,
)


def rf_eval(ring, rf, values):
    den = ring.dfull.eval(values)
    return rf.num.eval(values) / den**rf.den_pow


# -- pushforward polynomial displays ----------------------------------------


def test_p1_kappa0_collapses_to_ab():
    ring = FormalClassRing(3)
    pq = build_PQ(2, 3, 1, ring=ring)
    got = pq.P.coeff(GenKey("kappa", 0))
    # B_2 - B_2(atot / (atot+b)) simplifies by hand to atot*b / (atot+b)^2
    want = RatFunc(ring.atot * ring.b_var(), 2)
    assert ring.equal(got, want)


def test_p1_has_no_boundary_generators():
    pq = build_PQ(2, 3, 1)
    assert all(key.kind != "edge" for key in pq.P.coeffs)
    assert any(key.kind == "edge" for key in pq.Q.coeffs)


def test_q_kappa_coefficient_is_weighted_bernoulli_number():
    ring = FormalClassRing(2)
    for m in range(1, 5):
        pq = build_PQ(1, 2, m, ring=ring)
        got = pq.Q.coeff(GenKey("kappa", m))
        assert ring.equal(got, RatFunc(ring.atot * bernoulli_number(m + 1), 0))


@given(st.lists(st.integers(1, 9), min_size=3, max_size=3), st.integers(1, 9))
@settings(max_examples=25)
def test_p2_psi_coefficient_matches_rational_evaluation(avals, bval):
    ring = FormalClassRing(3)
    pq = build_PQ(1, 3, 2, ring=ring)
    values = {"a1": avals[0], "a2": avals[1], "a3": avals[2], "b": bval}
    atot = sum(avals)
    d = atot + bval
    for i in (1, 2, 3):
        got = rf_eval(ring, pq.P.coeff(GenKey("psi", 1, i)), values)
        want = bernoulli_poly(3, F(atot - avals[i - 1], d)) - bernoulli_poly(
            3, F(d - avals[i - 1], d)
        )
        assert got == want


@given(st.lists(st.integers(1, 9), min_size=2, max_size=2), st.integers(1, 9))
@settings(max_examples=25)
def test_q_psi_coefficient_matches_rational_evaluation(avals, bval):
    ring = FormalClassRing(2)
    pq = build_PQ(2, 2, 3, ring=ring)
    values = {"a1": avals[0], "a2": avals[1], "b": bval}
    atot = sum(avals)
    d = atot + bval
    for i in (1, 2):
        ai = avals[i - 1]
        got = rf_eval(ring, pq.Q.coeff(GenKey("psi", 3, i)), values)
        want = -(
            (atot - ai) * bernoulli_poly(4, F(d - ai, d))
            + ai * bernoulli_poly(4, F(atot - ai, d))
        )
        assert got == want


def test_build_pq_rejects_bad_input():
    with pytest.raises(ValueError):
        build_PQ(1, 2, 0)
    with pytest.raises(ValueError):
        build_PQ(1, 2, 1, variant="nonsense")
    with pytest.raises(ValueError):
        build_PQ(1, 3, 1, ring=FormalClassRing(2))


# -- the exponent on the (n+1) pointed space --------------------------------


def test_f_exponent_level_one_coefficients():
    f = build_f_exponent(2, 2, 2)
    ring = f.ring
    # kappa_1 picks up -(atot+b)/2 times B_2
    want = RatFunc(ring.dfull * F(-1, 12), 0)
    assert ring.equal(f.coeff(GenKey("kappa", 1)), want)
    # psi at the extra marking: +(atot+b)/2 times B_2(atot/(atot+b)),
    # expanded by hand from B_2(x) = x^2 - x + 1/6
    a, d = ring.atot, ring.dfull
    num = (a * a - a * d + d * d * F(1, 6)) * F(1, 2)
    assert ring.equal(f.coeff(GenKey("psi", 1, 3)), RatFunc(num, 1))


def test_f_exponent_psi_restricts_to_weight_sum_argument():
    f = build_f_exponent(1, 2, 1)
    ring = f.ring
    got = ring.at_zero(f.coeff(GenKey("psi", 1, 1)))
    a1 = ring.a_var(1)
    num = ((ring.atot - a1) ** 2 - (ring.atot - a1) * ring.atot + ring.atot**2 * F(1, 6)) * F(
        1, 2
    )
    assert ring.equal(got, RatFunc(num, 1), at_zero=True)


def test_f_exponent_edge_weight_two_cases():
    f = build_f_exponent(1, 2, 1)
    ring = f.ring
    c_half = F(-1, 4)
    # extra marking (index 3) on the half edge side: weight b - a1
    key_in = GenKey("edge", 1, 0, 0, (1, 3))
    w_in = ring.b_var() - ring.a_var(1)
    want_in = ring.scale(ring.over_base(ring.bpoly(2, w_in), -1), c_half)
    assert ring.equal(f.coeff(key_in), want_in)
    # extra marking on the far side: weight a1
    key_out = GenKey("edge", 1, 0, 1, (1,))
    want_out = ring.scale(ring.over_base(ring.bpoly(2, ring.a_var(1)), -1), c_half)
    assert ring.equal(f.coeff(key_out), want_out)


def test_f_exponent_respects_stability():
    f = build_f_exponent(1, 2, 1)
    assert GenKey("edge", 1, 0, 0, ()) not in f.coeffs
    assert GenKey("edge", 1, 0, 1, ()) in f.coeffs
    with pytest.raises(ValueError):
        build_f_exponent(1, 2, 0)


def test_stable_splits_two_sided():
    splits = set(stable_splits(1, 3))
    # a genus zero side needs two markings besides the node
    assert (0, ()) not in splits and (0, (1,)) not in splits
    assert (1, ()) in splits
    # orientation doubles every geometric divisor
    assert (0, (1, 2)) in splits and (1, (3,)) in splits


# -- the four identities -----------------------------------------------------


def test_verify_all_pass_at_desk_scale():
    report = verify_dilaton_identities(2, 3, 6)
    assert all_pass(report)
    assert {entry["identity"] for entry in report} == {"i", "ii", "iii", "iv"}
    assert max(entry["m"] for entry in report) == 6


def test_report_entries_are_json_ready():
    report = verify_dilaton_identities(1, 2, 2)
    blob = json.loads(json.dumps(report))
    assert blob == report
    for entry in report:
        assert set(entry) == {"identity", "m", "generator", "status", "residual"}
        assert entry["status"] == "pass"
        assert entry["residual"] == "0"


def test_identity_one_from_public_pieces():
    # d/db P_1 at b = 0, with kappa_0 rewritten as 2g - 2 + n, must land on
    # 2g over the weight sum; assembled here from coefficient arithmetic
    # rather than through the report path.
    for g, n in ((3, 1), (2, 4)):
        ring = FormalClassRing(n)
        pq = build_PQ(g, n, 1, ring=ring)
        kap = ring.at_zero(ring.deriv_b(pq.P.coeff(GenKey("kappa", 0))))
        unit = ring.at_zero(ring.deriv_b(pq.P.coeff(UNIT)))
        total = ring.add(ring.scale(kap, 2 * g - 2 + n), unit, at_zero=True)
        want = ring.over_base(ring.const(2 * g), 1)
        assert ring.equal(total, want, at_zero=True)


def test_lowered_boundary_control_fails_on_edges():
    report = verify_dilaton_identities(2, 3, 3, variant="lowered-boundary")
    fails = [entry for entry in report if entry["status"] == "fail"]
    assert fails
    assert all(entry["generator"].startswith("edge") for entry in fails)
    # the level one residual on the split I = {1, 2} comes out by hand as
    # a_I a_J^2 over the cubed weight sum
    hit = [
        entry
        for entry in fails
        if entry["identity"] == "iii" and entry["m"] == 1 and "I=(1,2)" in entry["generator"]
    ]
    assert hit and hit[0]["residual"] == "(a1*a3^2 + a2*a3^2)/(a1+...+a3)^3"
    # the same range is clean without the perturbation
    assert all_pass(verify_dilaton_identities(2, 3, 3))


def test_verify_rejects_bad_input():
    with pytest.raises(ValueError):
        verify_dilaton_identities(0, 2, 3)
    with pytest.raises(ValueError):
        verify_dilaton_identities(1, 2, 0)
    with pytest.raises(ValueError):
        verify_dilaton_identities(1, 2, 1, variant="tweaked")


def test_generator_labels():
    assert gen_label(UNIT) == "1"
    assert gen_label(GenKey("kappa", 3)) == "kappa_3"
    assert gen_label(GenKey("psi", 2, 4)) == "psi_4^2"
    assert gen_label(GenKey("edge", 2, 0, 1, (1, 3))) == "edge[g1=1,I=(1,3),s^2]"


# -- coefficient calculus ----------------------------------------------------


@st.composite
def linear_forms(draw):
    ring = FormalClassRing(2)
    coeffs = {
        name: draw(st.integers(-3, 3)) for name in ("a1", "a2", "b")
    }
    if all(c == 0 for c in coeffs.values()):
        coeffs["a1"] = 1
    return ring, MultiPoly.linear_form(ring.vars, coeffs)


@given(linear_forms(), st.integers(2, 6))
@settings(max_examples=40)
def test_derivative_commutes_with_clearing(ring_and_num, k):
    ring, num = ring_and_num
    # quotient rule on the cleared form against the chain rule
    # d/db B_k(N/D) = k B_{k-1}(N/D) (N' D - N) / D^2
    via_quotient = ring.deriv_b(ring.bpoly(k, num))
    chain_num = ring.bpoly(k - 1, num).num * (num.derivative("b") * ring.dfull - num) * k
    via_chain = RatFunc(chain_num, k + 1)
    assert ring.equal(via_quotient, via_chain)


@given(st.integers(1, 5), st.integers(1, 4), st.integers(1, 4))
@settings(max_examples=20, deadline=None)
def test_identities_hold_across_small_ranges(g, n, m_max):
    if 2 * g - 2 + n <= 0:
        return
    assert all_pass(verify_dilaton_identities(g, n, m_max))
