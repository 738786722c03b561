from fractions import Fraction
from functools import lru_cache

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import psi_twin_all_splits
from intobs.correlators import CorrelatorTable, TableRequired
from intobs.diffpoly import DiffPoly, d_x, substitute_solution
from intobs.hierarchy import (
    FluxSet,
    HierarchyError,
    HierarchySpec,
    build_flux_DR,
    build_flux_R,
    build_tau,
    check_commutation,
    fcohft_from_pcohft,
    flow_derivative,
    hodge_demo,
    kdv_demo,
    miura_O_to_DR,
    normal_miura,
)
from intobs.trees import TableObservable

F = Fraction


@lru_cache(maxsize=None)
def spec2():
    return HierarchySpec(eps_trunc=2)


@lru_cache(maxsize=None)
def spec4():
    return HierarchySpec(eps_trunc=4)


@lru_cache(maxsize=None)
def specf():
    return HierarchySpec(eps_trunc=2, source="fcohft")


@lru_cache(maxsize=None)
def flux4():
    return build_flux_R(spec4(), 2)


# -- tau data ------------------------------------------------------------------


def test_tau_goldens():
    tau = build_tau(spec4())
    assert tau.F.coeff(0, ((1, 0),) * 3) == F(1, 6)
    assert tau.F.coeff(0, ((1, 0), (1, 0), (1, 0), (1, 1))) == F(1, 6)
    assert tau.F.coeff(2, ((1, 1),)) == F(1, 24)
    assert tau.F.coeff(4, ((1, 4),)) == F(1, 1152)


def test_string_equation():
    for tau in (build_tau(spec4()), build_tau(specf())):
        assert all(d.is_zero() for d in tau.string_defects())


def test_dilaton_equation_with_anomaly():
    tau = build_tau(spec4())
    defects, consts = tau.dilaton_defects()
    assert all(d.is_zero() for d in defects)
    assert consts == [{2: F(1, 24)}]
    tauf = build_tau(specf())
    defects, consts = tauf.dilaton_defects()
    assert all(d.is_zero() for d in defects)
    assert consts == [{}]


def test_topological_solution_triangular():
    tau = build_tau(spec4())
    for d in range(4):
        jet = tau.w_top_jet(1, d)
        assert jet.coeff(0, ()) == (1 if d == 1 else 0)
        for k in range(5):
            assert jet.coeff(0, ((1, k),)) == (1 if k == d else 0)
        for k1 in range(3):
            for k2 in range(3):
                if k1 + k2 <= d:
                    assert jet.coeff(0, ((1, k1), (1, k2))) == 0


def test_fcohft_round_trip():
    tf = build_tau(specf())
    tp = build_tau(spec2())
    diff = tp.F.deriv_t(1, 0) - tf.X[0]
    assert all(len(times) >= tp.spec.t_trunc for (_, times) in diff.coeffs)


# -- fluxes from the two-frozen-slot classes -----------------------------------


def test_kdv_flux_exact():
    assert flux4().flux(1, 1, 1).to_text() == "1/2*(w[1,0])^2 + 1/12*eps^2*w[1,2]"


def test_second_flux_exact():
    text = (
        "1/6*(w[1,0])^3 + 1/12*eps^2*w[1,0]*w[1,2] + 1/24*eps^2*(w[1,1])^2"
        " + 1/240*eps^4*w[1,4]"
    )
    assert flux4().flux(1, 1, 2).to_text() == text


def test_unit_time_flux_is_the_field():
    assert flux4().flux(1, 1, 0) == DiffPoly.jet(1, 1, 0, 4)


def test_flux_grading():
    fx = flux4()
    for comp in fx.fluxes.values():
        for dp in comp:
            for (eps, jets), _ in dp.terms.items():
                assert sum(d for _, d in jets) == eps


def test_hamiltonian_density_golden():
    text = (
        "1/6*(w[1,0])^3 + 1/12*eps^2*w[1,0]*w[1,2] + 1/24*eps^2*(w[1,1])^2"
        " + 1/240*eps^4*w[1,4]"
    )
    assert flux4().ham(1, 1).to_text() == text
    assert flux4().ham(1, 0).to_text() == "1/2*(w[1,0])^2 + 1/12*eps^2*w[1,2]"


def test_flux_routes_agree_between_sources():
    fxp = build_flux_R(spec2(), 1)
    fxf = build_flux_R(specf(), 1)
    assert fxp.fluxes == fxf.fluxes
    assert fxf.hams is None


def test_series_route_needs_room():
    with pytest.raises(HierarchyError):
        build_flux_R(HierarchySpec(eps_trunc=0), 2)


def test_dual_route_mismatch_detected():
    with pytest.raises(HierarchyError):
        build_flux_R(HierarchySpec(eps_trunc=0, n_cap=1, t_trunc=5), 1)


def test_nontrivial_table_needs_cap():
    tbl = psi_twin_all_splits([3, 4])
    spec = HierarchySpec(eps_trunc=0, observable=TableObservable(tbl))
    with pytest.raises(HierarchyError):
        build_flux_R(spec, 0)


def test_evolution_reconstruction():
    spec = HierarchySpec(eps_trunc=2, t_trunc=8)
    fx = build_flux_R(spec, 1)
    tau = build_tau(spec)
    lhs = tau.w_top[0].deriv_t(1, 1)
    rhs = substitute_solution(d_x(fx.flux(1, 1, 1)), tau.w_top)
    for eps in (0, 2):
        for key, c in lhs.coeffs.items():
            if key[0] == eps and len(key[1]) <= 3:
                assert rhs.coeff(eps, key[1]) == c, key
        for key, c in rhs.coeffs.items():
            if key[0] == eps and len(key[1]) <= 3:
                assert lhs.coeff(eps, key[1]) == c, key


# -- DR fluxes -----------------------------------------------------------------


def test_dr_dispersionless_goldens():
    dr = build_flux_DR(HierarchySpec(eps_trunc=0), 2)
    assert dr.flux(1, 1, 1).to_text() == "1/2*(w[1,0])^2"
    assert dr.flux(1, 1, 2).to_text() == "1/6*(w[1,0])^3"
    assert dr.ham(1, 0).to_text() == "1/2*(w[1,0])^2"
    assert dr.ham(1, -1) == DiffPoly.jet(1, 1, 0, 0)
    assert dr.normal_map.exprs[1] == DiffPoly.jet(1, 1, 0, 0)


def test_dr_needs_table_beyond_genus_zero():
    with pytest.raises(TableRequired):
        build_flux_DR(HierarchySpec(eps_trunc=2), 1)


# -- Miura maps ----------------------------------------------------------------


def test_miura_maps_are_identity_for_trivial_data():
    ident = DiffPoly.jet(1, 1, 0, 4)
    assert all(e == ident for e in normal_miura(spec4()).exprs.values())
    assert all(e == ident for e in miura_O_to_DR(spec4()).exprs.values())


# -- commutation ---------------------------------------------------------------


def test_flows_commute():
    rep = check_commutation(flux4(), [((1, 1), (1, 2)), ((1, 0), (1, 1))])
    assert all(e["commutes"] for e in rep)


def test_commutation_detects_tampering():
    fx = flux4()
    bad = dict(fx.fluxes)
    extra = F(1, 13) * DiffPoly.eps_power(1, 2, 4) * DiffPoly.jet(1, 1, 2, 4)
    bad[(1, 2)] = [bad[(1, 2)][0] + extra]
    tampered = FluxSet(1, "w", 4, bad)
    rep = check_commutation(tampered, [((1, 1), (1, 2))])
    assert not rep[0]["commutes"]
    assert rep[0]["defect_texts"][0] != "0"


# -- demos ---------------------------------------------------------------------


def test_kdv_demo_report():
    rep = kdv_demo()
    assert rep["flux_text"] == "1/2*(w[1,0])^2 + 1/12*eps^2*w[1,2]"
    assert rep["evolution_text"] == "w[1,0]*w[1,1] + 1/12*eps^2*w[1,3]"
    assert rep["contributions"] == {"M_{0,4}": "1", "M_{1,3}": "1/12"}


def test_hodge_demo():
    two = hodge_demo(2)
    assert two["term_text"] == "(x1^2*x2 + x1*x2^2)/362880"
    assert not two["vanishes"]
    assert two["pairing_integral"] == "1/362880"
    three = hodge_demo(3)
    assert "2*x1*x2*x3" in three["term_text"]
    assert three["term_text"].endswith("/362880")
    one = hodge_demo(1)
    assert one["vanishes"] and one["term_text"] == "0"
    with pytest.raises(ValueError):
        hodge_demo(0)


# -- dispersionless universality ------------------------------------------------


def test_dispersionless_fluxes_independent_of_observable():
    twin = psi_twin_all_splits([3, 4, 5, 6])
    base = HierarchySpec(eps_trunc=0, t_trunc=6)
    table = HierarchySpec(
        eps_trunc=0, t_trunc=6, observable=TableObservable(twin), n_cap=4
    )
    fx_psi = build_flux_R(base, 3)
    fx_tbl = build_flux_R(table, 3)
    assert fx_psi.fluxes == fx_tbl.fluxes


# -- canonical output contraction ------------------------------------------------


def test_fcohft_view_rotates_and_contracts():
    base = CorrelatorTable("cohft_psi", 2, [[1, 0], [0, 3]], complete=[(0, 3)])
    plain = {"tag": "plain"}
    base.add_entry(0, [1, 1, 2], [0, 0, 0], plain, 5)
    base.add_entry(0, [1, 2, 2], [0, 0, 0], plain, 7)
    base.add_entry(0, [1, 1, 2], [1, 0, 0], plain, 11)
    view = fcohft_from_pcohft(base)
    assert view.kind == "fcohft_psi"
    assert view.correlator(0, [2, 1, 1], [0, 0, 0]) == F(5, 3)
    assert view.correlator(0, [2, 1, 2], [0, 0, 0]) == F(7, 3)
    assert view.correlator(0, [1, 1, 2], [0, 1, 0]) == F(11, 1)


def test_fcohft_view_rejects_wrong_kind():
    twin = psi_twin_all_splits([3])
    with pytest.raises(ValueError):
        fcohft_from_pcohft(twin)


# -- properties ------------------------------------------------------------------


def _small_diffpoly(seed: list) -> DiffPoly:
    terms = {}
    for eps, d1, d2, num in seed:
        key = (eps, ((1, d1), (1, d2)))
        terms[key] = terms.get(key, 0) + F(num, 3)
    return DiffPoly(1, 4, terms)


@given(
    st.lists(
        st.tuples(
            st.integers(min_value=0, max_value=2),
            st.integers(min_value=0, max_value=2),
            st.integers(min_value=0, max_value=2),
            st.integers(min_value=-4, max_value=4),
        ),
        max_size=4,
    ),
    st.lists(
        st.tuples(
            st.integers(min_value=0, max_value=2),
            st.integers(min_value=0, max_value=2),
            st.integers(min_value=0, max_value=2),
            st.integers(min_value=-4, max_value=4),
        ),
        max_size=4,
    ),
)
@settings(max_examples=60, deadline=None)
def test_flow_derivative_is_a_derivation(seed1, seed2):
    p, q = _small_diffpoly(seed1), _small_diffpoly(seed2)
    flux = [flux4().flux(1, 1, 1)]
    lhs = flow_derivative(p * q, flux)
    rhs = flow_derivative(p, flux) * q + p * flow_derivative(q, flux)
    assert lhs == rhs
