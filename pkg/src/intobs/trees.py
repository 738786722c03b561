"""Leveled rooted trees and the tree-sum observable classes built on them.

The central objects are stable rooted trees with numbered legs and a block of
frozen legs at the root, level functions on them, and the integrated classes
assembled by summing over (tree, level, degree) data: the B-classes, the
master density Xi and its graded refinement Upsilon.  Everything is exact;
coefficients live in MultiPoly rings over the leg variables a_1..a_n and the
frozen variables b_1..b_m.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .exactnum import MultiPoly, compositions, monomial_text, rat_to_str
from .correlators import (
    CorrelatorTable,
    TableRequired,
    TRIVIAL_COHFT,
    a1_correlator,
    dr_correlator,
)


# ---------------------------------------------------------------------------
# Stable rooted trees
# ---------------------------------------------------------------------------


class Vertex:
    """One vertex: a genus, its own legs, and an ordered tuple of children.

    Children are kept sorted by canonical encoding so that equal trees get
    equal encodings regardless of construction order.
    """

    __slots__ = ("genus", "legs", "children", "enc")

    def __init__(self, genus: int, legs: Sequence[int], children: Sequence["Vertex"]):
        self.genus = int(genus)
        self.legs = tuple(sorted(int(l) for l in legs))
        self.children = tuple(sorted(children, key=lambda v: v.enc))
        self.enc = (self.genus, self.legs, tuple(v.enc for v in self.children))

    def __repr__(self):
        return f"Vertex(g={self.genus}, legs={self.legs}, kids={len(self.children)})"


class StableRootedTree:
    """A stable rooted tree for (g, n, m): legs 1..n, m frozen legs at the root.

    Vertices are addressed by paths: the root is (), its i-th child is (i,),
    and so on.  Paths rather than vertex objects are the keys everywhere, so
    that identical legless sibling subtrees stay distinguishable.
    """

    def __init__(self, root: Vertex, g: int, n: int, m: int):
        self.root = root
        self.g = g
        self.n = n
        self.m = m
        self._paths = []
        self._vertex = {}
        self._legs_below = {}

        def walk(path, v):
            self._paths.append(path)
            self._vertex[path] = v
            for i, c in enumerate(v.children):
                walk(path + (i,), c)

        walk((), root)
        for path in reversed(self._paths):
            v = self._vertex[path]
            below = set(v.legs)
            for i in range(len(v.children)):
                below |= self._legs_below[path + (i,)]
            self._legs_below[path] = below

    def paths(self) -> list[tuple]:
        return list(self._paths)

    def vertex(self, path: tuple) -> Vertex:
        return self._vertex[path]

    def edges(self) -> list[tuple[tuple, tuple]]:
        return [(p[:-1], p) for p in self._paths if p]

    def legs_below(self, path: tuple) -> frozenset:
        return frozenset(self._legs_below[path])

    def halfedges(self, path: tuple) -> int:
        v = self._vertex[path]
        extra = self.m if path == () else 1
        return len(v.legs) + len(v.children) + extra

    @property
    def enc(self):
        return self.root.enc

    def __repr__(self):
        return f"StableRootedTree(g={self.g}, n={self.n}, m={self.m}, enc={self.enc})"


def _subsets(items: tuple) -> Iterable[tuple]:
    for r in range(len(items) + 1):
        yield from itertools.combinations(items, r)


def _subtrees(g: int, legs: tuple, memo: dict) -> list[Vertex]:
    """All stable subtrees hanging off a parent edge with the given totals."""
    key = (g, legs)
    if key in memo:
        return memo[key]
    out = []
    for g_own in range(g + 1):
        for own in _subsets(legs):
            rest = tuple(l for l in legs if l not in own)
            bare = g_own == 0 and not own
            for kids in _kid_multisets(g - g_own, rest, None, memo, forbid_full=bare):
                he = len(own) + len(kids) + 1
                if 2 * g_own - 2 + he > 0:
                    out.append(Vertex(g_own, own, kids))
    out.sort(key=lambda v: v.enc)
    memo[key] = out
    return out


def _kid_multisets(g: int, legs: tuple, min_enc, memo: dict, forbid_full=False) -> Iterable[tuple]:
    """Multisets of child subtrees consuming exactly the given genus and legs.

    Children are emitted in nondecreasing encoding order, which makes each
    multiset appear exactly once.  With forbid_full, the lone child devouring
    the whole budget is skipped: a bare genus-zero parent would be unstable
    with a single child, and cutting the branch here also keeps the recursion
    well founded.
    """
    if g == 0 and not legs:
        yield ()
        return
    for g_c in range(g + 1):
        for legs_c in _subsets(legs):
            if g_c == 0 and not legs_c:
                continue
            if forbid_full and g_c == g and len(legs_c) == len(legs):
                continue
            rest = tuple(l for l in legs if l not in legs_c)
            for t in _subtrees(g_c, legs_c, memo):
                if min_enc is not None and t.enc < min_enc:
                    continue
                for tail in _kid_multisets(g - g_c, rest, t.enc, memo):
                    yield (t,) + tail


def enumerate_trees(g: int, n: int, m: int) -> list[StableRootedTree]:
    """All stable rooted trees for (g, n, m), deduplicated up to isomorphism
    fixing the legs, in a deterministic order."""
    if g < 0 or n < 0 or m < 0:
        raise ValueError("g, n, m must be nonnegative")
    if 2 * g - 2 + n + m <= 0:
        raise ValueError(f"unstable ambient space (g={g}, n={n}, m={m})")
    legs = tuple(range(1, n + 1))
    memo: dict = {}
    out = []
    for g_own in range(g + 1):
        for own in _subsets(legs):
            rest = tuple(l for l in legs if l not in own)
            for kids in _kid_multisets(g - g_own, rest, None, memo):
                he = len(own) + len(kids) + m
                if 2 * g_own - 2 + he > 0:
                    out.append(StableRootedTree(Vertex(g_own, own, kids), g, n, m))
    out.sort(key=lambda t: t.enc)
    return out


# ---------------------------------------------------------------------------
# Level and degree functions
# ---------------------------------------------------------------------------


def enumerate_levels(tree: StableRootedTree) -> list[dict]:
    """All level functions: root at 0, strictly increasing along paths,
    every level between 0 and the maximum occupied."""
    nonroot = [p for p in tree.paths() if p]
    if not nonroot:
        return [{(): 0}]
    out = []
    for top in range(1, len(nonroot) + 1):
        want = set(range(1, top + 1))
        for assign in itertools.product(range(1, top + 1), repeat=len(nonroot)):
            if set(assign) != want:
                continue
            lv = dict(zip(nonroot, assign))
            lv[()] = 0
            if all(lv[p] > lv[p[:-1]] for p in nonroot):
                out.append(lv)
    return out


def degree_function_values(tree, levels: Mapping, m: int, caps: Mapping) -> Iterable[dict]:
    """Degree assignments d(v) <= cap(v) obeying the level-degree constraint
    at every level strictly below the top one."""
    paths = tree.paths()
    top = max(levels.values())
    ranges = [range(caps[p] + 1) for p in paths]
    genus = {p: tree.vertex(p).genus for p in paths}
    for vals in itertools.product(*ranges):
        dd = dict(zip(paths, vals))
        ok = True
        for i in range(top):
            below = [p for p in paths if levels[p] <= i]
            d_lvl = sum(dd[p] for p in below) + len(below) - 1
            g_lvl = sum(genus[p] for p in below)
            if d_lvl > 2 * g_lvl - 2 + m:
                ok = False
                break
        if ok:
            yield dd


# ---------------------------------------------------------------------------
# Observable plugins
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Slot:
    """One moduli slot of a vertex as seen by an observable plugin.

    Exactly one of the shapes applies: an argument slot carries a linear form
    in the a-variables, a frozen slot carries a b-variable name, and a slot
    with neither is evaluated at argument zero (the parent edge).  The pad is
    an extra psi exponent integrated against at this slot.
    """

    field: int
    pad: int
    form: MultiPoly | None = None
    bvar: str | None = None


class PsiObservable:
    """The product-of-psi-series observable.

    At a vertex it contributes, for each slot with argument x, the series
    1/(1 - x psi); frozen slots take their b-variable as the argument and
    zero-argument slots contribute 1.
    """

    name = "Psi"

    def vertex_value(self, gv, slots, d_target, cohft, ring) -> MultiPoly:
        dim = 3 * gv - 3 + len(slots)
        budget = dim - sum(s.pad for s in slots)
        zero = MultiPoly.zero(ring)
        if budget < 0:
            return zero
        arg = [i for i, s in enumerate(slots) if s.form is not None]
        froz = [i for i, s in enumerate(slots) if s.bvar is not None]
        fields = [s.field for s in slots]
        acc = zero
        d_vals = range(budget + 1) if d_target is None else (
            [d_target] if d_target <= budget else []
        )
        for d in d_vals:
            for e in compositions(d, len(arg)):
                rem = budget - d
                f_sums = [rem] if cohft.trivial else range(rem + 1)
                for fs in f_sums:
                    for f in compositions(fs, len(froz)):
                        psi = [s.pad for s in slots]
                        for i, ei in zip(arg, e):
                            psi[i] += ei
                        for i, fi in zip(froz, f):
                            psi[i] += fi
                        val = cohft.correlator(gv, fields, psi)
                        if not val:
                            continue
                        mono = MultiPoly.const(ring, val)
                        for i, ei in zip(arg, e):
                            if ei:
                                mono = mono * slots[i].form ** ei
                        for i, fi in zip(froz, f):
                            if fi:
                                mono = mono * MultiPoly.variable(ring, slots[i].bvar) ** fi
                        acc = acc + mono
        return acc


class TableObservable:
    """Observable backed by an obs_O correlator table.

    A vertex value is assembled by matching stored entries against the slot
    pattern; the table must declare the (genus, slot count) pair complete so
    that absent keys honestly mean zero.
    """

    name = "Table"

    def __init__(self, table: CorrelatorTable):
        if table.kind != "obs_O":
            raise ValueError(f"observable table must have kind obs_O, got {table.kind}")
        self.table = table

    def vertex_value(self, gv, slots, d_target, cohft, ring) -> MultiPoly:
        if not self.table.covers(gv, len(slots)):
            raise TableRequired(
                f"table required: observable not complete at (g={gv}, slots={len(slots)})"
            )
        reg = [i for i, s in enumerate(slots) if s.bvar is None]
        froz = [i for i, s in enumerate(slots) if s.bvar is not None]
        acc = MultiPoly.zero(ring)
        for key, value in self.table.entries.items():
            tag, g_e, regular, frozen = key
            if tag != "obs_o" or g_e != gv:
                continue
            if len(regular) != len(reg) or len(frozen) != len(froz):
                continue
            fexp = []
            for i, (fld, ps, be) in zip(froz, frozen):
                s = slots[i]
                if fld != s.field or ps != s.pad:
                    fexp = None
                    break
                fexp.append(be)
            if fexp is None:
                continue
            for aexp in self._assignments(regular, [slots[i] for i in reg]):
                if d_target is not None and sum(aexp) != d_target:
                    continue
                mono = MultiPoly.const(ring, value)
                for i, k in zip(reg, aexp):
                    if k:
                        mono = mono * slots[i].form ** k
                for i, fe in zip(froz, fexp):
                    if fe:
                        mono = mono * MultiPoly.variable(ring, slots[i].bvar) ** fe
                acc = acc + mono
        return acc

    @staticmethod
    def _assignments(triples, slot_list):
        """Distinct ways to hand the canonical (field, psi, a-exp) triples to
        the ordered slots, respecting field, pad, and zero-argument slots."""
        nt = len(triples)
        used = [False] * nt
        out = []

        def rec(i, acc):
            if i == len(slot_list):
                out.append(tuple(acc))
                return
            s = slot_list[i]
            for j in range(nt):
                if used[j]:
                    continue
                if j > 0 and triples[j] == triples[j - 1] and not used[j - 1]:
                    continue
                fld, ps, ae = triples[j]
                if fld != s.field or ps != s.pad:
                    continue
                if s.form is None and ae != 0:
                    continue
                used[j] = True
                rec(i + 1, acc + [ae])
                used[j] = False

        rec(0, [])
        return out


class _CachedPlugin:
    """Per-assembly memo around a plugin: identical vertex evaluations recur
    across level and degree choices."""

    def __init__(self, plugin, cohft, ring):
        self.plugin = plugin
        self.cohft = cohft
        self.ring = ring
        self.cache = {}

    @staticmethod
    def _slot_sig(s: Slot):
        form = None if s.form is None else tuple(sorted(s.form.terms.items()))
        return (s.field, s.pad, form, s.bvar)

    def value(self, gv, slots, d_target) -> MultiPoly:
        key = (gv, tuple(self._slot_sig(s) for s in slots), d_target)
        hit = self.cache.get(key)
        if hit is None:
            hit = self.plugin.vertex_value(gv, slots, d_target, self.cohft, self.ring)
            self.cache[key] = hit
        return hit


# ---------------------------------------------------------------------------
# Integrated classes
# ---------------------------------------------------------------------------


@dataclass
class IntegratedBClass:
    """Integrated tree-sum class as exact polynomial data.

    For each assignment of field indices to the n + m ambient slots the value
    is a MultiPoly in a_1..a_n, b_1..b_m.  The pads record the extra psi
    exponents the class was integrated against.
    """

    g: int
    n: int
    m: int
    nfields: int
    ring: tuple
    pads: tuple
    data: dict

    @property
    def avars(self):
        return self.ring[: self.n]

    @property
    def bvars(self):
        return self.ring[self.n :]

    def poly(self, fields: Sequence[int] | None = None) -> MultiPoly:
        fv = tuple(fields) if fields is not None else (1,) * (self.n + self.m)
        return self.data[fv]

    def b_section(self, b_exps: Sequence[int], fields: Sequence[int] | None = None) -> MultiPoly:
        """The coefficient of prod b_i^{e_i} as a MultiPoly in the a-variables."""
        if len(b_exps) != self.m:
            raise ValueError("need one exponent per frozen variable")
        sec = self.poly(fields).coeff_section(
            {f"b{i + 1}": int(e) for i, e in enumerate(b_exps)}
        )
        out = MultiPoly.zero(self.avars)
        out.terms = {exps[: self.n]: c for exps, c in sec.terms.items()}
        return out


def _ring_vars(n: int, m: int) -> tuple:
    return tuple(f"a{i}" for i in range(1, n + 1)) + tuple(f"b{j}" for j in range(1, m + 1))


def _field_vectors(nfields: int, slots: int):
    return list(itertools.product(range(1, nfields + 1), repeat=slots))


def _edge_color_choices(eta, nedges: int):
    nf = len(eta.rows)
    pairs = [
        (mu, nu, eta.inv(mu, nu))
        for mu in range(1, nf + 1)
        for nu in range(1, nf + 1)
        if eta.inv(mu, nu)
    ]
    return list(itertools.product(pairs, repeat=nedges))


def _vertex_slots(tree, path, fv, pads, colors, ring, forms):
    """Slot list for one vertex: own legs, then child edges, then the frozen
    block at the root or the zero-argument parent slot elsewhere."""
    v = tree.vertex(path)
    n, m = tree.n, tree.m
    slots = []
    for leg in v.legs:
        slots.append(
            Slot(field=fv[leg - 1], pad=pads[leg - 1], form=forms["leg"][leg])
        )
    for i in range(len(v.children)):
        child = path + (i,)
        mu, _ = colors[child]
        slots.append(Slot(field=mu, pad=0, form=forms["edge"][child]))
    if path == ():
        for j in range(1, m + 1):
            slots.append(Slot(field=fv[n + j - 1], pad=pads[n + j - 1], bvar=f"b{j}"))
    else:
        _, nu = colors[path]
        slots.append(Slot(field=nu, pad=0))
    return slots


def assemble_B(
    g: int,
    n: int,
    m: int,
    obs,
    cohft: CorrelatorTable | None = None,
    pads: Sequence[int] | None = None,
    workers: int | None = None,
) -> IntegratedBClass:
    """Integrate the level-m tree-sum class against the CohFT.

    The sum runs over stable rooted trees, level functions, and degree
    assignments obeying the level-degree constraint; each term carries the
    sign (-1)^(top level), the product of edge weights, and an explicit sum
    over dual-basis indices at every edge.
    """
    cohft = cohft if cohft is not None else TRIVIAL_COHFT
    ring = _ring_vars(n, m)
    pads = tuple(int(p) for p in pads) if pads is not None else (0,) * (n + m)
    if len(pads) != n + m or any(p < 0 for p in pads):
        raise ValueError("pads must give one nonnegative exponent per ambient slot")
    plug = _CachedPlugin(obs, cohft, ring)
    trees = enumerate_trees(g, n, m)

    items = []
    for tree in trees:
        forms = _tree_forms(tree, ring)
        if any(f is None for f in forms["edge"].values()):
            continue
        caps = {}
        dead = False
        for path in tree.paths():
            v = tree.vertex(path)
            padsum = sum(pads[l - 1] for l in v.legs)
            if path == ():
                padsum += sum(pads[n + j] for j in range(m))
            caps[path] = 3 * v.genus - 3 + tree.halfedges(path) - padsum
            if caps[path] < 0:
                dead = True
                break
        if dead:
            continue
        for levels in enumerate_levels(tree):
            sign = -1 if max(levels.values()) % 2 else 1
            for dd in degree_function_values(tree, levels, m, caps):
                items.append((tree, forms, sign, dd))

    fvs = _field_vectors(cohft.N, n + m)
    colorings = {}

    def term(fv, item) -> MultiPoly:
        tree, forms, sign, dd = item
        edges = tree.edges()
        key = tree.enc
        if key not in colorings:
            colorings[key] = _edge_color_choices(cohft.eta, len(edges))
        acc = MultiPoly.zero(ring)
        for choice in colorings[key]:
            weight = Fraction(sign)
            colors = {}
            for (_, child), (mu, nu, w) in zip(edges, choice):
                colors[child] = (mu, nu)
                weight *= w
            part = MultiPoly.const(ring, weight)
            for _, child in edges:
                part = part * forms["edge"][child]
            for path in tree.paths():
                val = plug.value(
                    tree.vertex(path).genus,
                    tuple(_vertex_slots(tree, path, fv, pads, colors, ring, forms)),
                    dd[path],
                )
                if not val.terms:
                    part = MultiPoly.zero(ring)
                    break
                part = part * val
            acc = acc + part
        return acc

    data = _accumulate(fvs, items, term, ring, workers)
    return IntegratedBClass(g, n, m, cohft.N, ring, pads, data)


def _tree_forms(tree, ring):
    """Leg and edge argument forms; an edge over no legs gets None (its
    weight vanishes, killing the whole tree)."""
    leg = {l: MultiPoly.variable(ring, f"a{l}") for l in range(1, tree.n + 1)}
    edge = {}
    for _, child in tree.edges():
        below = sorted(tree.legs_below(child))
        if below:
            edge[child] = MultiPoly.linear_form(ring, {f"a{l}": 1 for l in below})
        else:
            edge[child] = None
    return {"leg": leg, "edge": edge}


def _accumulate(fvs, items, term, ring, workers):
    jobs = [(fv, item) for fv in fvs for item in items]
    if workers and workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda j: term(*j), jobs))
    else:
        results = [term(*j) for j in jobs]
    data = {fv: MultiPoly.zero(ring) for fv in fvs}
    for (fv, _), val in zip(jobs, results):
        data[fv] = data[fv] + val
    return data


# ---------------------------------------------------------------------------
# The master density Xi and its graded refinement Upsilon
# ---------------------------------------------------------------------------


def _dr_role(dr_tables, role: str):
    if dr_tables is None:
        return None
    if isinstance(dr_tables, CorrelatorTable):
        return dr_tables if role == "d" else None
    return dr_tables.get(role)


def _d_child_poly(gc, leg_list, fields, psis, nu, dr, cohft, ring, forms):
    """Integrated D-class at a leaf child: a polynomial in its own leg
    variables, with the special slot on the parent edge."""
    dim = 3 * gc - 3 + len(leg_list) + 1
    k_total = dim - sum(psis)
    if k_total < 0:
        return MultiPoly.zero(ring)
    acc = MultiPoly.zero(ring)
    for k in compositions(k_total, len(leg_list)):
        val = dr_correlator(
            gc, list(fields) + [nu], list(psis) + [0], k, table=dr, cohft=cohft
        )
        if not val:
            continue
        mono = MultiPoly.const(ring, val)
        for leg, ke in zip(leg_list, k):
            if ke:
                mono = mono * forms["leg"][leg] ** ke
        acc = acc + mono
    return acc


def _set_partitions(items: list, blocks: int):
    if blocks == 0:
        if not items:
            yield []
        return
    if len(items) < blocks:
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest, blocks - 1):
        yield [[first]] + part
    for part in _set_partitions(rest, blocks):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1 :]


def _xi_D_part(g, n, m, fv, pads, dr, cohft, ring) -> MultiPoly:
    if m != 1:
        return MultiPoly.zero(ring)
    dim = 3 * g - 3 + n + 1
    k_total = dim - sum(pads)
    if k_total < 0:
        return MultiPoly.zero(ring)
    acc = MultiPoly.zero(ring)
    fields = list(fv[:n]) + [fv[n]]
    psis = list(pads[:n]) + [pads[n]]
    for k in compositions(k_total, n):
        val = dr_correlator(g, fields, psis, k, table=dr, cohft=cohft)
        if not val:
            continue
        exps = tuple(k) + (0,)
        acc = acc + MultiPoly.monomial(ring, exps, val)
    return acc


def _xi_OT_part(g, n, m, fv, pads, obs, cohft, dr, ring) -> MultiPoly:
    """O-term plus the height-one tree terms of the master density, for one
    field vector and one pad vector."""
    plug = _CachedPlugin(obs, cohft, ring)
    forms = {"leg": {l: MultiPoly.variable(ring, f"a{l}") for l in range(1, n + 1)}}

    o_slots = [
        Slot(field=fv[l - 1], pad=pads[l - 1], form=forms["leg"][l])
        for l in range(1, n + 1)
    ]
    for j in range(1, m + 1):
        o_slots.append(Slot(field=fv[n + j - 1], pad=pads[n + j - 1], bvar=f"b{j}"))
    acc = plug.value(g, tuple(o_slots), None)

    nf = cohft.N
    eta_pairs = [
        (mu, nu, cohft.eta.inv(mu, nu))
        for mu in range(1, nf + 1)
        for nu in range(1, nf + 1)
        if cohft.eta.inv(mu, nu)
    ]
    legs = list(range(1, n + 1))
    for croot in _subsets(tuple(legs)):
        child_legs = [l for l in legs if l not in croot]
        for c in range(1, len(child_legs) + 1):
            for blocks in _set_partitions(child_legs, c):
                blocks = [sorted(b) for b in blocks]
                for gsplit in compositions(g, c + 1):
                    g_r, g_cs = gsplit[0], gsplit[1:]
                    if 2 * g_r - 2 + len(croot) + c + m <= 0:
                        continue
                    if any(
                        2 * gc - 2 + len(b) + 1 <= 0 for gc, b in zip(g_cs, blocks)
                    ):
                        continue
                    edge_forms = [
                        MultiPoly.linear_form(ring, {f"a{l}": 1 for l in b})
                        for b in blocks
                    ]
                    for choice in itertools.product(eta_pairs, repeat=c):
                        weight = Fraction(1)
                        for _, _, w in choice:
                            weight *= w
                        part = MultiPoly.const(ring, weight)
                        for ef in edge_forms:
                            part = part * ef
                        slots = [
                            Slot(field=fv[l - 1], pad=pads[l - 1], form=forms["leg"][l])
                            for l in croot
                        ]
                        for (mu, _, _), ef in zip(choice, edge_forms):
                            slots.append(Slot(field=mu, pad=0, form=ef))
                        for j in range(1, m + 1):
                            slots.append(
                                Slot(field=fv[n + j - 1], pad=pads[n + j - 1], bvar=f"b{j}")
                            )
                        part = part * plug.value(g_r, tuple(slots), None)
                        for (_, nu, _), gc, b in zip(choice, g_cs, blocks):
                            if not part.terms:
                                break
                            part = part * _d_child_poly(
                                gc,
                                b,
                                [fv[l - 1] for l in b],
                                [pads[l - 1] for l in b],
                                nu,
                                dr,
                                cohft,
                                ring,
                                forms,
                            )
                        acc = acc + part
    return acc


def assemble_Xi(
    g: int,
    n: int,
    m: int,
    obs,
    cohft: CorrelatorTable | None = None,
    dr_tables=None,
    pads: Sequence[int] | None = None,
) -> IntegratedBClass:
    """Integrate the master density: the D-term (only at m = 1), the O-term,
    and the height-one tree terms with D-classes at the leaf children."""
    if m < 1:
        raise ValueError("the master density needs at least one frozen leg")
    cohft = cohft if cohft is not None else TRIVIAL_COHFT
    dr = _dr_role(dr_tables, "d")
    ring = _ring_vars(n, m)
    pads = tuple(int(p) for p in pads) if pads is not None else (0,) * (n + m)
    if len(pads) != n + m or any(p < 0 for p in pads):
        raise ValueError("pads must give one nonnegative exponent per ambient slot")
    data = {}
    for fv in _field_vectors(cohft.N, n + m):
        data[fv] = _xi_D_part(g, n, m, fv, pads, dr, cohft, ring) + _xi_OT_part(
            g, n, m, fv, pads, obs, cohft, dr, ring
        )
    return IntegratedBClass(g, n, m, cohft.N, ring, pads, data)


def assemble_Upsilon(
    g: int,
    n: int,
    m: int,
    obs,
    cohft: CorrelatorTable | None = None,
    dr_tables=None,
    pads: Sequence[int] | None = None,
) -> IntegratedBClass:
    """The graded master density: the O-term and tree terms pick up a factor
    prod_i (1 - b_i psi) over the frozen slots, realized as signed psi shifts;
    the D-term does not."""
    if m < 1:
        raise ValueError("the graded master density needs at least one frozen leg")
    cohft = cohft if cohft is not None else TRIVIAL_COHFT
    dr = _dr_role(dr_tables, "d")
    ring = _ring_vars(n, m)
    pads = tuple(int(p) for p in pads) if pads is not None else (0,) * (n + m)
    if len(pads) != n + m or any(p < 0 for p in pads):
        raise ValueError("pads must give one nonnegative exponent per ambient slot")
    data = {}
    for fv in _field_vectors(cohft.N, n + m):
        acc = _xi_D_part(g, n, m, fv, pads, dr, cohft, ring)
        for subset in _subsets(tuple(range(m))):
            shifted = list(pads)
            bmono = [0] * (n + m)
            for j in subset:
                shifted[n + j] += 1
                bmono[n + j] = 1
            sign = -1 if len(subset) % 2 else 1
            part = _xi_OT_part(g, n, m, fv, tuple(shifted), obs, cohft, dr, ring)
            acc = acc + part * MultiPoly.monomial(ring, tuple(bmono), sign)
        data[fv] = acc
    return IntegratedBClass(g, n, m, cohft.N, ring, pads, data)


# ---------------------------------------------------------------------------
# Relation checks
# ---------------------------------------------------------------------------


def _a1_poly(g, n, fv, dr_tables, cohft, ring) -> MultiPoly:
    a1 = _dr_role(dr_tables, "a1")
    dim = 3 * g - 3 + n + 1
    acc = MultiPoly.zero(ring)
    fields = list(fv[:n]) + [fv[n]]
    psis = [0] * (n + 1)
    for k in compositions(dim, n):
        val = a1_correlator(g, fields, psis, k, table=a1, cohft=cohft)
        if val:
            acc = acc + MultiPoly.monomial(ring, tuple(k) + (0,), val)
    return acc


def _violations(poly: MultiPoly, ring, keep) -> list[dict]:
    out = []
    for exps, c in poly.sorted_terms():
        if keep(exps):
            out.append({"monomial": monomial_text(ring, exps), "value": rat_to_str(c)})
    return out


def _report(relation, g, n, m, violations) -> dict:
    return {
        "relation": relation,
        "g": g,
        "n": n,
        "m": m,
        "status": "PASS" if not violations else "FAIL",
        "violations": violations,
    }


def check_lrt(
    ltype,
    g: int,
    n: int,
    obs,
    cohft: CorrelatorTable | None = None,
    dr_tables=None,
    m: int | None = None,
    strict_b: bool = False,
    workers: int | None = None,
) -> dict:
    """Check one leveled-rooted-tree degree bound and report violations.

    ltype 1: the b-free part of the level-one class minus the A^1 expansion
    has a-degree at most 2g - 1.  ltype 2: each section of the level-two
    class at b_2-exponent zero has a-degree at most 2g (with strict_b, every
    b-monomial obeys the bound).  ltype "m" with m >= 2: the level-m class
    has a-degree at most 2g - 2 + m.
    """
    cohft = cohft if cohft is not None else TRIVIAL_COHFT
    if isinstance(ltype, int) and ltype > 2:
        ltype, m = "m", ltype
    if ltype == 1:
        bcl = assemble_B(g, n, 1, obs, cohft, workers=workers)
        ring = bcl.ring
        na = n
        violations = []
        for fv in sorted(bcl.data):
            diff = bcl.data[fv].coeff_section({"b1": 0}) - _a1_poly(
                g, n, fv, dr_tables, cohft, ring
            )
            violations += _violations(
                diff, ring, lambda e: sum(e[:na]) > 2 * g - 1
            )
        return _report("LRT-1", g, n, 1, violations)
    if ltype == 2:
        bcl = assemble_B(g, n, 2, obs, cohft, workers=workers)
        ring = bcl.ring
        na = n
        if strict_b:
            keep = lambda e: sum(e[:na]) > 2 * g
        else:
            keep = lambda e: e[na + 1] == 0 and sum(e[:na]) > 2 * g
        violations = []
        for fv in sorted(bcl.data):
            violations += _violations(bcl.data[fv], ring, keep)
        return _report("LRT-2", g, n, 2, violations)
    if ltype == "m":
        if m is None or m < 2:
            raise ValueError("the generic bound needs an explicit m >= 2")
        bcl = assemble_B(g, n, m, obs, cohft, workers=workers)
        ring = bcl.ring
        na = n
        violations = []
        for fv in sorted(bcl.data):
            violations += _violations(
                bcl.data[fv], ring, lambda e: sum(e[:na]) > 2 * g - 2 + m
            )
        return _report(f"LRT-{m}", g, n, m, violations)
    raise ValueError(f"unknown relation type {ltype!r}")


def check_master(
    m: int,
    g: int,
    n: int,
    obs,
    cohft: CorrelatorTable | None = None,
    dr_tables=None,
) -> dict:
    """Degree bound for the integrated master density: a-degree at most
    2g - 2 + m, where for m = 1 only the b-free part is constrained (with
    the sharper bound 2g - 1)."""
    cohft = cohft if cohft is not None else TRIVIAL_COHFT
    xi = assemble_Xi(g, n, m, obs, cohft, dr_tables)
    ring = xi.ring
    na = n
    if m == 1:
        keep = lambda e: e[na] == 0 and sum(e[:na]) > 2 * g - 1
    else:
        keep = lambda e: sum(e[:na]) > 2 * g - 2 + m
    violations = []
    for fv in sorted(xi.data):
        violations += _violations(xi.data[fv], ring, keep)
    return _report(f"M-{m}", g, n, m, violations)


def check_gmaster(
    m: int,
    g: int,
    n: int,
    obs,
    cohft: CorrelatorTable | None = None,
    dr_tables=None,
) -> dict:
    """Degree bound for the graded master density, probed through psi pads.

    A pad vector with total below g - 1 + n isolates the part of the class
    in degrees above 2g - 2 + m; any surviving monomial of total degree
    above the bound is a violation.
    """
    cohft = cohft if cohft is not None else TRIVIAL_COHFT
    violations = []
    bound = 2 * g - 2 + m
    pad_total_max = g + n - 2
    ring = _ring_vars(n, m)
    for total in range(max(pad_total_max, -1) + 1):
        for pads in compositions(total, n + m):
            ups = assemble_Upsilon(g, n, m, obs, cohft, dr_tables, pads=pads)
            for fv in sorted(ups.data):
                for exps, c in ups.data[fv].sorted_terms():
                    if sum(exps) > bound:
                        text = monomial_text(ring, exps)
                        for i, p in enumerate(pads):
                            if p:
                                text += f"*psi{i + 1}^{p}" if p > 1 else f"*psi{i + 1}"
                        violations.append({"monomial": text, "value": rat_to_str(c)})
    return _report(f"GM-{m}", g, n, m, violations)
