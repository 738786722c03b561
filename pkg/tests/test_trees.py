"""Leveled tree enumeration, assembled observable classes, relation checks."""

import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intobs.correlators import (
    CorrelatorTable,
    TableRequired,
    psi_correlator,
    psi_correlator_genus0,
)
from intobs.exactnum import MultiPoly, compositions
from intobs.trees import (
    PsiObservable,
    TableObservable,
    Vertex,
    assemble_B,
    assemble_Upsilon,
    assemble_Xi,
    check_gmaster,
    check_lrt,
    check_master,
    degree_function_values,
    enumerate_levels,
    enumerate_trees,
)

F = Fraction

OBS = PsiObservable()


# -- enumeration oracle -------------------------------------------------------


def oracle_tree_encs(g, n, m):
    """Enumerate stable rooted trees by brute force over parent maps.

    Vertices are 0..k-1 with 0 the root and parent[i] < i.  Every genus
    composition and every assignment of legs to vertices is tried, stability
    is checked per vertex, and the labeled tree is collapsed to its canonical
    encoding so isomorphic relabelings count once.
    """
    encs = set()
    kmax = max(1, 2 * g + n + m - 2)
    for k in range(1, kmax + 1):
        for parent in itertools.product(*(range(i) for i in range(1, k))):
            kids = {v: [] for v in range(k)}
            for i, p in enumerate(parent, start=1):
                kids[p].append(i)
            for genera in compositions(g, k):
                for owner in itertools.product(range(k), repeat=n):
                    legs = {v: [] for v in range(k)}
                    for leg, v in enumerate(owner, start=1):
                        legs[v].append(leg)
                    ok = True
                    for v in range(k):
                        he = len(legs[v]) + len(kids[v])
                        he += m if v == 0 else 1
                        if 2 * genera[v] - 2 + he <= 0:
                            ok = False
                            break
                    if not ok:
                        continue

                    def build(v):
                        return Vertex(genera[v], legs[v], [build(c) for c in kids[v]])

                    encs.add(build(0).enc)
    return encs


@pytest.mark.parametrize(
    "g,n,m",
    [
        (0, 3, 0),
        (0, 4, 0),
        (0, 2, 1),
        (0, 3, 1),
        (0, 2, 2),
        (0, 3, 2),
        (0, 4, 1),
        (0, 4, 2),
        (1, 1, 0),
        (1, 2, 0),
        (1, 3, 0),
        (1, 4, 0),
        (1, 1, 1),
        (1, 2, 1),
        (1, 1, 2),
        (1, 2, 2),
        (1, 3, 1),
        (2, 1, 0),
        (2, 2, 0),
        (2, 1, 1),
        (2, 1, 2),
        (2, 2, 1),
    ],
)
def test_enumeration_matches_parent_map_oracle(g, n, m):
    trees = enumerate_trees(g, n, m)
    encs = [t.enc for t in trees]
    assert len(encs) == len(set(encs)), "duplicate canonical trees"
    assert set(encs) == oracle_tree_encs(g, n, m)


def test_enumeration_rejects_degenerate_input():
    with pytest.raises(ValueError):
        enumerate_trees(0, 2, 0)
    with pytest.raises(ValueError):
        enumerate_trees(-1, 3, 0)
    with pytest.raises(ValueError):
        enumerate_trees(0, -1, 2)


def test_single_vertex_tree_always_present():
    for g, n, m in [(0, 3, 0), (1, 1, 0), (2, 0, 1), (1, 0, 2)]:
        trees = enumerate_trees(g, n, m)
        singles = [t for t in trees if len(t.paths()) == 1]
        assert len(singles) == 1
        assert singles[0].vertex(()).genus == g


# -- level functions ----------------------------------------------------------


def oracle_level_count(tree):
    """Count level functions via a strict-chain DP plus surjectivity sieve.

    f(v, l) counts strictly increasing labelings of the subtree at v with v
    labeled l, labels drawn from 1..t; inclusion-exclusion over t then keeps
    the onto ones.
    """
    paths = tree.paths()
    nonroot = [p for p in paths if p]
    if not nonroot:
        return 1
    kids = {p: [q for q in paths if q[:-1] == p and len(q) == len(p) + 1] for p in paths}

    def count_at_most(t):
        def f(p, l):
            acc = 1
            for q in kids[p]:
                acc *= sum(f(q, l2) for l2 in range(l + 1, t + 1))
            return acc

        total = 1
        for q in kids[()]:
            total *= sum(f(q, l) for l in range(1, t + 1))
        return total

    kmax = len(nonroot)
    total = 0
    for t in range(1, kmax + 1):
        onto = 0
        for j in range(t + 1):
            sign = -1 if (t - j) % 2 else 1
            onto += sign * _binom(t, j) * count_at_most(j)
        total += onto
    return total


def _binom(n, k):
    out = 1
    for i in range(k):
        out = out * (n - i) // (i + 1)
    return out


def test_level_counts_match_surjection_oracle():
    for g, n, m in [(1, 2, 1), (0, 4, 1), (1, 1, 2), (2, 1, 1), (0, 4, 2)]:
        for tree in enumerate_trees(g, n, m):
            assert len(enumerate_levels(tree)) == oracle_level_count(tree)


def test_level_functions_are_onto_and_strict():
    for tree in enumerate_trees(1, 2, 1):
        for lv in enumerate_levels(tree):
            assert lv[()] == 0
            used = sorted(set(lv[p] for p in lv if p))
            if used:
                assert used == list(range(1, len(used) + 1))
            for parent, child in tree.edges():
                assert lv[parent] < lv[child]


def test_degree_functions_respect_level_bound():
    m = 1
    for tree in enumerate_trees(1, 2, m):
        caps = {p: 3 for p in tree.paths()}
        for lv in enumerate_levels(tree):
            top = max(lv.values())
            for dd in degree_function_values(tree, lv, m, caps):
                for i in range(top):
                    below = [p for p in tree.paths() if lv[p] <= i]
                    dsum = sum(dd[p] for p in below) + len(below) - 1
                    gsum = sum(tree.vertex(p).genus for p in below)
                    assert dsum <= 2 * gsum - 2 + m


# -- assembled class goldens --------------------------------------------------


def test_assembled_psi_goldens():
    b = assemble_B(0, 3, 0, OBS)
    assert b.poly().to_text() == "1"

    b = assemble_B(0, 4, 0, OBS)
    assert b.poly().to_text() == "a1 + a2 + a3 + a4"

    b = assemble_B(1, 1, 0, OBS)
    assert b.poly().to_text() == "1/24*a1"

    b = assemble_B(1, 1, 1, OBS)
    assert b.poly().to_text() == "1/24*a1^2 + 1/24*a1*b1 + 1/24*b1^2"


def test_assembly_worker_count_does_not_change_result():
    lone = assemble_B(1, 2, 1, OBS, workers=1)
    four = assemble_B(1, 2, 1, OBS, workers=4)
    assert lone.data == four.data


def test_b_section_extraction():
    b = assemble_B(1, 1, 1, OBS)
    sec = b.b_section([0])
    assert sec.to_text() == "1/24*a1^2"
    sec = b.b_section([2])
    assert sec.to_text() == "1/24"


def test_homogeneity_of_assembled_class():
    for g, n, m in [(0, 4, 0), (1, 2, 0), (1, 1, 2), (2, 2, 0), (1, 2, 2)]:
        dim = 3 * g - 3 + n + m
        poly = assemble_B(g, n, m, OBS).poly()
        degs = {sum(e) for e in poly.terms}
        assert degs <= {dim}


def test_homogeneity_with_pads():
    g, n, m = 1, 2, 1
    dim = 3 * g - 3 + n + m
    for pads in [(1, 0, 0), (0, 2, 0), (1, 1, 1)]:
        poly = assemble_B(g, n, m, OBS, pads=pads).poly()
        degs = {sum(e) for e in poly.terms}
        assert degs <= {dim - sum(pads)}


def test_genus0_assembly_matches_closed_form_correlators():
    for n in (3, 4, 5):
        poly = assemble_B(0, n, 0, OBS).poly()
        dim = n - 3
        for d in itertools.product(range(dim + 1), repeat=n):
            if sum(d) != dim:
                continue
            assert poly.coeff(d) == psi_correlator_genus0(list(d))


def test_saturated_pads_leave_the_bare_correlator():
    for g, n in [(1, 2), (0, 4), (1, 1)]:
        dim = 3 * g - 3 + n
        for pads in itertools.product(range(dim + 1), repeat=n):
            if sum(pads) != dim:
                continue
            poly = assemble_B(g, n, 0, OBS, pads=pads).poly()
            assert poly.coeff((0,) * n) == psi_correlator(g, list(pads))


# -- dual route through an observable table -----------------------------------


def psi_twin_table(slot_counts, m):
    """An obs_O table replaying the psi observable at genus zero.

    Each entry fixes per-slot a- and b-exponents at zero pads; the stored
    value is the bare psi intersection number with those exponents.
    """
    tbl = CorrelatorTable("obs_O", 1, [[1]], complete=[(0, k) for k in slot_counts])
    for k in slot_counts:
        dim = k - 3
        nr = k - m
        for e in compositions(dim, k):
            val = psi_correlator(0, list(e))
            cls_ = {"tag": "obs_o", "a": list(e[:nr]), "b": list(e[nr:])}
            tbl.add_entry(0, [1] * k, [0] * k, cls_, val)
    return tbl


def test_table_observable_matches_builtin_psi_route():
    m = 1
    tbl = psi_twin_table([3, 4, 5], m)
    route_a = assemble_B(0, 4, m, OBS)
    route_b = assemble_B(0, 4, m, TableObservable(tbl))
    assert route_a.data == route_b.data


def test_table_observable_requires_completeness():
    tbl = CorrelatorTable("obs_O", 1, [[1]], complete=[(0, 3)])
    with pytest.raises(TableRequired):
        assemble_B(0, 4, 1, TableObservable(tbl))


def test_table_observable_rejects_wrong_kind():
    with pytest.raises(ValueError):
        TableObservable(CorrelatorTable.trivial_table())


# -- push-forward chain ---------------------------------------------------------


def b0(g, n, m, pads):
    return assemble_B(g, n, m, OBS, pads=pads).b_section([0] * m)


def decrement_sum(g, n, m, pads):
    ring = None
    acc = None
    for j in range(n + m - 1):
        if pads[j] < 1:
            continue
        down = tuple(pads[k] - (1 if k == j else 0) for k in range(n + m - 1))
        part = b0(g, n, m - 1, down)
        acc = part if acc is None else acc + part
        ring = part.vars
    if acc is None:
        zero_src = b0(g, n, m - 1, tuple(pads))
        acc = MultiPoly.zero(zero_src.vars)
    return acc


@pytest.mark.parametrize("g,n", [(0, 2), (0, 3), (1, 1), (1, 2), (1, 3)])
def test_chain_level_two_integrates_to_zero(g, n):
    sec = b0(g, n, 2, (0,) * (n + 2))
    assert not sec.terms


@pytest.mark.parametrize("g,n", [(0, 1), (0, 2), (0, 3), (1, 1), (1, 2)])
def test_chain_level_three_integrates_to_level_two(g, n):
    lhs = b0(g, n, 3, (0,) * (n + 3))
    prev = b0(g, n, 2, (0,) * (n + 2))
    ring = lhs.vars
    bold_a = MultiPoly.linear_form(ring, {f"a{i}": 1 for i in range(1, n + 1)})
    rhs = bold_a * MultiPoly(ring, {e: c for e, c in prev.terms.items()})
    assert lhs.terms == rhs.terms


@pytest.mark.parametrize("g,n,m", [(0, 2, 2), (0, 3, 2), (1, 1, 2), (0, 2, 3), (1, 1, 3)])
def test_chain_string_decrement_at_saturated_pads(g, n, m):
    dim = 3 * g - 3 + n + m
    for pads in compositions(dim, n + m - 1):
        lhs = b0(g, n, m, tuple(pads) + (0,))
        rhs = decrement_sum(g, n, m, tuple(pads))
        assert lhs.terms == rhs.terms, f"pads {pads}"


# -- master relation checks -----------------------------------------------------


def test_xi_needs_a_frozen_leg():
    with pytest.raises(ValueError):
        assemble_Xi(0, 3, 0, OBS)


def test_xi_level_one_genus0_vanishes():
    for n in (2, 3, 4):
        xi = assemble_Xi(0, n, 1, OBS)
        sec = xi.b_section([0])
        assert not sec.terms


def test_xi_level_two_genus0_kills_positive_a_degree():
    xi = assemble_Xi(0, 3, 2, OBS)
    poly = xi.poly()
    for exps, val in poly.terms.items():
        if sum(exps[:3]) > 0:
            assert val == 0


def test_check_master_examples_pass():
    rep = check_master(1, 0, 2, OBS)
    assert rep["status"] == "PASS" and rep["violations"] == []
    rep = check_master(2, 0, 3, OBS)
    assert rep["status"] == "PASS"


def test_check_lrt_small_cases_pass():
    assert check_lrt(1, 0, 2, OBS)["status"] == "PASS"
    assert check_lrt(1, 0, 3, OBS)["status"] == "PASS"
    assert check_lrt(2, 0, 2, OBS)["status"] == "PASS"
    assert check_lrt(2, 1, 1, OBS, strict_b=True)["status"] == "PASS"
    assert check_lrt(3, 0, 2, OBS)["status"] == "PASS"


def test_check_gmaster_small_case_passes():
    rep = check_gmaster(1, 0, 3, OBS)
    assert rep["status"] == "PASS"
    assert rep["relation"] == "GM-1"


def test_report_schema():
    rep = check_master(2, 0, 3, OBS)
    assert set(rep) == {"relation", "g", "n", "m", "status", "violations"}
    assert rep["relation"] == "M-2"
    assert (rep["g"], rep["n"], rep["m"]) == (0, 3, 2)


class SkewedPsi(PsiObservable):
    """Deliberately wrong observable for the negative control."""

    def vertex_value(self, gv, slots, d_target, cohft, ring):
        val = super().vertex_value(gv, slots, d_target, cohft, ring)
        if gv == 0 and len(slots) == 3:
            val = val + MultiPoly.const(ring, F(1, 7))
        return val


def test_negative_control_flags_violation():
    rep = check_master(2, 0, 3, SkewedPsi())
    assert rep["status"] == "FAIL"
    assert rep["violations"]
    first = rep["violations"][0]
    assert set(first) == {"monomial", "value"}
    assert first["value"] != "0"


# -- property checks ------------------------------------------------------------


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1), st.integers(1, 3), st.integers(0, 2))
def test_enumeration_is_deterministic(g, n, m):
    if 2 * g - 2 + n + m <= 0:
        return
    one = [t.enc for t in enumerate_trees(g, n, m)]
    two = [t.enc for t in enumerate_trees(g, n, m)]
    assert one == two


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 1), st.integers(1, 3), st.integers(1, 2))
def test_edges_all_carry_positive_leg_weight_or_die(g, n, m):
    if 2 * g - 2 + n + m <= 0:
        return
    for tree in enumerate_trees(g, n, m):
        for _, child in tree.edges():
            legs = tree.legs_below(child)
            assert isinstance(legs, frozenset)
