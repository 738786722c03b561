"""Integrable hierarchies built from integrated tree-sum classes.

The pipeline goes from a correlator source and an observable to exact
hierarchy data.  Tau data collects the generating series of integrated
observable correlators together with its topological solution.  Fluxes come
from the two-frozen-slot tree classes and are cross-checked against the
series route by exact linear matching.  The DR fluxes use the integrated
D-class pairings instead and give Hamiltonian densities plus the map to
normal coordinates.  Miura maps between the coordinate systems come from the
one- and zero-frozen-slot classes.

All arithmetic is exact.  Truncation orders are explicit in the spec object
and every assembled object records the truncation it was built at.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .correlators import (
    TRIVIAL_COHFT,
    CorrelatorTable,
    dr_correlator,
    hodge_reduce,
    lambda_top_triple,
)
from .diffpoly import (
    DiffPoly,
    FormalSeries,
    MatchError,
    MiuraMap,
    d_x,
    match_diffpoly,
)
from .exactnum import MultiPoly, compositions, rat_to_str
from .trees import PsiObservable, Slot, assemble_B

__all__ = [
    "HierarchyError",
    "HierarchySpec",
    "TauData",
    "FluxSet",
    "CanonicalFView",
    "build_tau",
    "build_flux_R",
    "build_flux_DR",
    "miura_O_to_DR",
    "normal_miura",
    "flow_derivative",
    "check_commutation",
    "kdv_demo",
    "hodge_demo",
    "fcohft_from_pcohft",
]

SOURCES = ("pcohft", "fcohft")

# Fallback slot-count scan for the Miura generators, whose sharp slot count
# is never positive for dimension-matched data.
_MIURA_N_DEFAULT = 2


class HierarchyError(Exception):
    """Inconsistent hierarchy data or a violated post-condition."""


class HierarchyDataError(HierarchyError):
    """The requested computation needs data or bounds that were not given."""


@dataclass
class HierarchySpec:
    """Configuration for one hierarchy run.

    The correlator table is a pairing source of kind cohft_psi; the fcohft
    source reuses it through the canonical output contraction.  The
    observable is anything with the vertex_value protocol.  When n_cap is
    None the slot count per genus is the sharp one for dimension-matched
    data, which requires a trivial pairing and the psi-series observable;
    other inputs must set an explicit cap.
    """

    nfields: int = 1
    cohft: CorrelatorTable | None = None
    observable: object | None = None
    source: str = "pcohft"
    dr_table: CorrelatorTable | None = None
    eps_trunc: int = 4
    t_trunc: int | None = None
    n_cap: int | None = None
    workers: int | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if self.eps_trunc < 0 or self.eps_trunc % 2:
            raise ValueError("eps_trunc must be even and nonnegative")
        if self.cohft is None:
            self.cohft = TRIVIAL_COHFT
        if self.cohft.kind != "cohft_psi":
            raise ValueError(f"pairing source must be cohft_psi, got {self.cohft.kind}")
        if self.nfields != self.cohft.N:
            raise ValueError("nfields does not match the pairing table")
        if self.observable is None:
            self.observable = PsiObservable()
        if self.dr_table is not None and self.dr_table.kind != "dr_D":
            raise ValueError(f"dr_table must be dr_D, got {self.dr_table.kind}")
        if self.t_trunc is None:
            self.t_trunc = self.eps_trunc + 4

    @property
    def eta(self):
        return self.cohft.eta

    @property
    def genus_max(self) -> int:
        return self.eps_trunc // 2

    def bdata(self, g: int, n: int, m: int):
        key = (g, n, m)
        hit = self._cache.get(key)
        if hit is None:
            hit = assemble_B(g, n, m, self.observable, cohft=self.cohft, workers=self.workers)
            self._cache[key] = hit
        return hit

    def sharp_slots(self) -> bool:
        return self.cohft.trivial and isinstance(self.observable, PsiObservable)

    def slot_counts(self, target: int):
        """Slot counts to scan for a coefficient whose sharp count is target."""
        if self.n_cap is not None:
            return range(1, self.n_cap + 1)
        if not self.sharp_slots():
            raise HierarchyDataError(
                "n_cap required: slot counts are only sharp for the trivial "
                "pairing with the psi-series observable"
            )
        return [target] if target >= 1 else []


def _vertex_ring(n: int) -> tuple:
    return tuple(f"a{i}" for i in range(1, n + 1))


def _accumulate(acc: dict, eps: int, jets, value: Fraction):
    key = (eps, tuple(sorted(jets)))
    s = acc.get(key, Fraction(0)) + value
    if s:
        acc[key] = s
    else:
        acc.pop(key, None)


# ---------------------------------------------------------------------------
# tau data


@dataclass
class TauData:
    """Generating series of a hierarchy source with its topological solution.

    For a pcohft source F is the single scalar series; for an fcohft source X
    holds one vector potential component per field.  w_top lists the
    topological solution components, one series per field.
    """

    spec: HierarchySpec
    F: FormalSeries | None
    X: list[FormalSeries] | None
    w_top: list[FormalSeries]

    @property
    def nfields(self) -> int:
        return self.spec.nfields

    def w_top_jet(self, alpha: int, d: int) -> FormalSeries:
        out = self.w_top[alpha - 1]
        for _ in range(d):
            out = out.deriv_t(1, 0)
        return out

    def _drop_long(self, series: FormalSeries) -> FormalSeries:
        out = series._like()
        out.coeffs = {
            k: c for k, c in series.coeffs.items() if len(k[1]) < self.spec.t_trunc
        }
        return out

    def _times_grad(self, series: FormalSeries, shift: int) -> FormalSeries:
        """sum over alpha, k of t[alpha, k + shift] d/dt[alpha, k] applied to series."""
        kmax = max((k for (_, times) in series.coeffs for _, k in times), default=-1)
        out = series._like()
        for alpha in range(1, self.nfields + 1):
            for k in range(kmax + 1):
                part = series.deriv_t(alpha, k)
                if part.is_zero():
                    continue
                out = out + FormalSeries.time(
                    self.nfields, alpha, k + shift, series.eps_trunc, series.t_trunc
                ) * part
        return out

    def string_defects(self) -> list[FormalSeries]:
        """Defect of the string equation, one series per checked component.

        Keys at the t-degree truncation boundary are dropped since their
        sources lie beyond the stored order.
        """
        N = self.nfields
        if self.spec.source == "pcohft":
            F = self.F
            quad = F._like()
            qc = {}
            for a in range(1, N + 1):
                for b in range(1, N + 1):
                    v = self.spec.eta.of(a, b) / 2
                    if v:
                        key = (0, tuple(sorted(((a, 0), (b, 0)))))
                        qc[key] = qc.get(key, Fraction(0)) + v
            quad.coeffs = {k: c for k, c in qc.items() if c}
            defect = F.deriv_t(1, 0) - quad - self._times_grad(F, 1)
            return [self._drop_long(defect)]
        out = []
        for alpha in range(1, N + 1):
            X = self.X[alpha - 1]
            lead = FormalSeries.time(N, alpha, 0, X.eps_trunc, X.t_trunc)
            defect = X.deriv_t(1, 0) - lead - self._times_grad(X, 1)
            out.append(self._drop_long(defect))
        return out

    def dilaton_defects(self) -> tuple[list[FormalSeries], list[dict]]:
        """Defects of the dilaton equation, split off the constant keys.

        Returns the per-component defect restricted to keys with at least one
        time factor, plus one dict per component mapping eps exponents to the
        constant-key residue.  The eps^2 residue is the usual genus-one
        anomaly, equal to the coefficient of t[1,1] in the series itself, and
        is reported rather than treated as a failure.
        """
        if self.spec.source == "pcohft":
            F = self.F
            raw = F.deriv_t(1, 1) - self._times_grad(F, 0) - F.eps_euler() + 2 * F
            raws = [raw]
        else:
            raws = []
            for alpha in range(1, self.nfields + 1):
                X = self.X[alpha - 1]
                raws.append(X.deriv_t(1, 1) - self._times_grad(X, 0) - X.eps_euler() + X)
        defects, consts = [], []
        for raw in raws:
            raw = self._drop_long(raw)
            split = raw._like()
            split.coeffs = {k: c for k, c in raw.coeffs.items() if k[1]}
            defects.append(split)
            consts.append({k[0]: c for k, c in raw.coeffs.items() if not k[1]})
        return defects, consts


def build_tau(spec: HierarchySpec) -> TauData:
    """Assemble the generating series of the source up to the truncations.

    Each coefficient is one integrated vertex value of the bare observable
    against the pairing; no trees enter here.  Constant terms (no time
    factors) are dropped throughout.
    """
    hit = spec._cache.get("tau")
    if hit is not None:
        return hit
    N = spec.nfields
    obs = spec.observable
    eps_t, t_t = spec.eps_trunc, spec.t_trunc

    def vertex_series(extra_field: int | None) -> dict:
        """Coefficients of the series with an optional bare output slot."""
        acc: dict = {}
        for g in range(spec.genus_max + 1):
            for n in range(1, t_t + 1):
                npts = n + (0 if extra_field is None else 1)
                if 2 * g - 2 + npts <= 0:
                    continue
                ring = _vertex_ring(n)
                forms = [MultiPoly.variable(ring, v) for v in ring]
                for fv in itertools.product(range(1, N + 1), repeat=n):
                    slots = [Slot(fv[i], 0, form=forms[i]) for i in range(n)]
                    if extra_field is not None:
                        slots = [Slot(extra_field, 0)] + slots
                    poly = obs.vertex_value(g, slots, None, spec.cohft, ring)
                    if poly.is_zero():
                        continue
                    scale = Fraction(1, _factorial(n))
                    for exps, c in poly.terms.items():
                        times = tuple((fv[i], exps[i]) for i in range(n))
                        key = (2 * g, tuple(sorted(times)))
                        s = acc.get(key, Fraction(0)) + c * scale
                        if s:
                            acc[key] = s
                        else:
                            acc.pop(key, None)
        return acc

    if spec.source == "pcohft":
        F = FormalSeries(N, eps_t, t_t, vertex_series(None))
        w_top = []
        for alpha in range(1, N + 1):
            s = FormalSeries.zero(N, eps_t, t_t)
            for mu in range(1, N + 1):
                v = spec.eta.inv(alpha, mu)
                if v:
                    s = s + v * F.deriv_t(1, 0).deriv_t(mu, 0)
            w_top.append(s)
        out = TauData(spec, F, None, w_top)
    else:
        X = []
        for alpha in range(1, N + 1):
            s = FormalSeries.zero(N, eps_t, t_t)
            for mu in range(1, N + 1):
                v = spec.eta.inv(alpha, mu)
                if v:
                    s = s + v * FormalSeries(N, eps_t, t_t, vertex_series(mu))
            X.append(s)
        w_top = [x.deriv_t(1, 0) for x in X]
        out = TauData(spec, None, X, w_top)
    spec._cache["tau"] = out
    return out


def _factorial(n: int) -> int:
    out = 1
    for i in range(2, n + 1):
        out *= i
    return out


# ---------------------------------------------------------------------------
# fluxes from the two-frozen-slot classes


@dataclass
class FluxSet:
    """Flux and Hamiltonian data of one hierarchy.

    fluxes maps (beta, p) to the list of flux components indexed by the upper
    field; hams maps (beta, p) to the Hamiltonian density.  coord records the
    jet coordinate system the differential polynomials live in.
    """

    nfields: int
    coord: str
    eps_trunc: int
    fluxes: dict
    hams: dict | None = None
    normal_map: MiuraMap | None = None

    def flux(self, alpha: int, beta: int, p: int) -> DiffPoly:
        return self.fluxes[(beta, p)][alpha - 1]

    def ham(self, beta: int, p: int) -> DiffPoly:
        if self.hams is None:
            raise HierarchyError("no Hamiltonian data in this flux set")
        return self.hams[(beta, p)]


def _strip_const(p: DiffPoly) -> DiffPoly:
    out = DiffPoly(p.nfields, p.trunc)
    out.terms = {k: c for k, c in p.terms.items() if k[1]}
    return out


def _flux_route_series(tau: TauData, beta: int, p: int) -> list[FormalSeries]:
    spec = tau.spec
    N = spec.nfields
    out = []
    for alpha in range(1, N + 1):
        if spec.source == "pcohft":
            s = FormalSeries.zero(N, spec.eps_trunc, spec.t_trunc)
            for mu in range(1, N + 1):
                v = spec.eta.inv(alpha, mu)
                if v:
                    s = s + v * tau.F.deriv_t(beta, p).deriv_t(mu, 0)
        else:
            s = tau.X[alpha - 1].deriv_t(beta, p)
        out.append(s)
    return out


def build_flux_R(spec: HierarchySpec, p_max: int, verify: bool = True) -> FluxSet:
    """Fluxes of the observable hierarchy from the two-frozen-slot classes.

    For each (beta, p) the flux component with upper field alpha collects the
    coefficient of b1^p b2^0 and an a-monomial of total weight 2g, with the
    second frozen field contracted through the inverse pairing.  With verify
    on, each flux is re-derived from the generating series by exact matching
    and the two routes must agree up to constant terms, which the series
    route keeps and the assembly route normalizes away.
    """
    N = spec.nfields
    eps_t = spec.eps_trunc
    accs = {(beta, p, alpha): {} for beta in range(1, N + 1) for p in range(p_max + 1) for alpha in range(1, N + 1)}
    ham_accs = {(beta, p): {} for beta in range(1, N + 1) for p in range(p_max + 1)}

    for p in range(p_max + 1):
        for g in range(spec.genus_max + 1):
            for n in set(spec.slot_counts(p - g + 1)) | set(spec.slot_counts(p - g + 2)):
                bd = spec.bdata(g, n, 2)
                for fv, _ in bd.data.items():
                    legs, (f1, f2) = fv[: bd.n], fv[bd.n :]
                    sec = bd.b_section((p, 0), fv)
                    for exps, c in sec.terms.items():
                        if sum(exps) != 2 * g:
                            continue
                        jets = tuple(zip(legs, exps))
                        val = c / _factorial(n)
                        for alpha in range(1, N + 1):
                            w = spec.eta.inv(alpha, f2)
                            if w:
                                _accumulate(accs[(f1, p, alpha)], 2 * g, jets, w * val)
                    if f2 == 1:
                        sec = bd.b_section((p + 1, 0), fv)
                        for exps, c in sec.terms.items():
                            if sum(exps) != 2 * g:
                                continue
                            jets = tuple(zip(legs, exps))
                            _accumulate(ham_accs[(f1, p)], 2 * g, jets, c / _factorial(n))

    fluxes = {}
    for beta in range(1, N + 1):
        for p in range(p_max + 1):
            comp = []
            for alpha in range(1, N + 1):
                dp = DiffPoly(N, eps_t, accs[(beta, p, alpha)])
                for (eps, jets), _ in dp.terms.items():
                    if sum(d for _, d in jets) != eps:
                        raise HierarchyError(
                            f"grading violation in flux ({alpha};{beta},{p})"
                        )
                comp.append(dp)
            fluxes[(beta, p)] = comp

    for alpha in range(1, N + 1):
        if fluxes[(1, 0)][alpha - 1] != DiffPoly.jet(N, alpha, 0, eps_t):
            raise HierarchyError("the (1,0) flux must be the undifferentiated field")

    if verify:
        if spec.t_trunc < p_max + 3:
            raise HierarchyDataError(
                "t_trunc must be at least p_max + 3 to support the series route"
            )
        tau = build_tau(spec)
        for beta in range(1, N + 1):
            for p in range(p_max + 1):
                series = _flux_route_series(tau, beta, p)
                for alpha in range(1, N + 1):
                    try:
                        matched = match_diffpoly(series[alpha - 1], tau.w_top, 0)
                    except MatchError as exc:
                        raise HierarchyError(
                            f"series route failed for flux ({alpha};{beta},{p}): {exc}"
                        ) from exc
                    if _strip_const(matched) != fluxes[(beta, p)][alpha - 1]:
                        raise HierarchyError(
                            "inconsistency between direct assembly and series "
                            f"matching for flux ({alpha};{beta},{p})"
                        )

    hams = None
    if spec.source == "pcohft":
        hams = {}
        for (beta, p), acc in ham_accs.items():
            hams[(beta, p)] = DiffPoly(N, eps_t, acc)
    return FluxSet(N, "w", eps_t, fluxes, hams)


# ---------------------------------------------------------------------------
# DR fluxes from the D-class pairings


def _dr_vertex(spec: HierarchySpec, g, n, d, beta, p, legs, mu) -> Fraction:
    """One integrated D-class pairing with the zero-weight slot first."""
    fields = [beta] + list(legs) + [mu]
    base = [p] + [0] * n
    total = Fraction(0)
    total += dr_correlator(g, fields, base + [0], (0,) + tuple(d), spec.dr_table, spec.cohft)
    for j in range(n):
        if d[j] >= 1:
            shifted = list(d)
            shifted[j] -= 1
            total += dr_correlator(
                g, fields, base + [1], (0,) + tuple(shifted), spec.dr_table, spec.cohft
            )
    return -total


def build_flux_DR(spec: HierarchySpec, p_max: int) -> FluxSet:
    """DR hierarchy fluxes, Hamiltonian densities, and the normal map.

    The flux with upper field alpha and times label (beta, p) pairs the
    fixed-genus D-class carrying psi^p on its zero-weight slot against the
    pairing table, with the special slot contracted through the inverse
    pairing.  Densities satisfy h[beta, p] = eta_{1 mu} Q^mu[beta, p+1] and
    the p = -1 densities give the change to normal coordinates.
    """
    N = spec.nfields
    eps_t = spec.eps_trunc
    q_accs = {
        (beta, p, alpha): {}
        for beta in range(1, N + 1)
        for p in range(p_max + 2)
        for alpha in range(1, N + 1)
    }
    for p in range(p_max + 2):
        for g in range(spec.genus_max + 1):
            for n in spec.slot_counts(p - g + 1):
                for d in _weight_vectors(n, 2 * g):
                    for legs in itertools.product(range(1, N + 1), repeat=n):
                        jets = tuple(zip(legs, d))
                        for beta in range(1, N + 1):
                            for mu in range(1, N + 1):
                                val = _dr_vertex(spec, g, n, d, beta, p, legs, mu)
                                if not val:
                                    continue
                                val = val / _factorial(n)
                                for alpha in range(1, N + 1):
                                    w = spec.eta.inv(alpha, mu)
                                    if w:
                                        _accumulate(
                                            q_accs[(beta, p, alpha)], 2 * g, jets, w * val
                                        )

    q_flux = {}
    for beta in range(1, N + 1):
        for p in range(p_max + 2):
            q_flux[(beta, p)] = [
                DiffPoly(N, eps_t, q_accs[(beta, p, alpha)]) for alpha in range(1, N + 1)
            ]

    hams = {}
    for beta in range(1, N + 1):
        for p in range(-1, p_max + 1):
            dens = DiffPoly.zero(N, eps_t)
            for mu in range(1, N + 1):
                v = spec.eta.of(1, mu)
                if v:
                    dens = dens + v * q_flux[(beta, p + 1)][mu - 1]
            hams[(beta, p)] = dens

    exprs = []
    for alpha in range(1, N + 1):
        e = DiffPoly.zero(N, eps_t)
        for mu in range(1, N + 1):
            v = spec.eta.inv(alpha, mu)
            if v:
                e = e + v * hams[(mu, -1)]
        exprs.append(e)
    normal = MiuraMap(N, eps_t, exprs)
    if not normal.is_second_kind():
        raise HierarchyError("grading violation in the normal coordinates map")

    fluxes = {k: v for k, v in q_flux.items() if k[1] <= p_max}
    return FluxSet(N, "u", eps_t, fluxes, hams, normal)


def _weight_vectors(n: int, total: int):
    return compositions(total, n)


def _miura_span(spec: HierarchySpec):
    if spec.n_cap is not None:
        return range(1, spec.n_cap + 1)
    if not spec.sharp_slots():
        raise HierarchyError(
            "n_cap required: slot counts are only sharp for the trivial "
            "pairing with the psi-series observable"
        )
    return range(1, _MIURA_N_DEFAULT + 1)


# ---------------------------------------------------------------------------
# Miura maps


def miura_O_to_DR(spec: HierarchySpec) -> MiuraMap:
    """Change of coordinates from the normal to the natural DR chart.

    The correction generator collects the one-frozen-slot class coefficients
    of b1^0 and a-weight 2g - 1 with the frozen field contracted through the
    inverse pairing; the map subtracts its x-derivative from each field.
    """
    N = spec.nfields
    eps_t = spec.eps_trunc
    accs = {alpha: {} for alpha in range(1, N + 1)}
    for g in range(spec.genus_max + 1):
        for n in _miura_span(spec):
            if 2 * g - 2 + n + 1 <= 0:
                continue
            bd = spec.bdata(g, n, 1)
            for fv, _ in bd.data.items():
                legs, (f1,) = fv[: bd.n], fv[bd.n :]
                sec = bd.b_section((0,), fv)
                for exps, c in sec.terms.items():
                    if sum(exps) != 2 * g - 1:
                        continue
                    jets = tuple(zip(legs, exps))
                    val = c / _factorial(n)
                    for alpha in range(1, N + 1):
                        w = spec.eta.inv(alpha, f1)
                        if w:
                            _accumulate(accs[alpha], 2 * g, jets, w * val)
    exprs = []
    for alpha in range(1, N + 1):
        gen = DiffPoly(N, eps_t, accs[alpha])
        exprs.append(DiffPoly.jet(N, alpha, 0, eps_t) - d_x(gen))
    out = MiuraMap(N, eps_t, exprs)
    if not out.is_second_kind():
        raise HierarchyError("grading violation in the DR chart map")
    return out


def normal_miura(spec: HierarchySpec) -> MiuraMap:
    """Change of coordinates from the observable chart to the normal chart.

    The generator is the zero-frozen-slot class at a-weight 2g - 2; the
    correction contracts its jet gradient against prolonged x-derivatives of
    the p = 0 fluxes.
    """
    N = spec.nfields
    eps_t = spec.eps_trunc
    acc: dict = {}
    for g in range(spec.genus_max + 1):
        for n in _miura_span(spec):
            if 2 * g - 2 + n <= 0:
                continue
            bd = spec.bdata(g, n, 0)
            for fv, poly in bd.data.items():
                for exps, c in poly.terms.items():
                    if sum(exps) != 2 * g - 2:
                        continue
                    _accumulate(acc, 2 * g, tuple(zip(fv, exps)), c / _factorial(n))
    gen = DiffPoly(N, eps_t, acc)
    flux0 = build_flux_R(spec, 0, verify=False).fluxes
    exprs = []
    for alpha in range(1, N + 1):
        corr = DiffPoly.zero(N, eps_t)
        for mu in range(1, N + 1):
            v = spec.eta.inv(alpha, mu)
            if not v:
                continue
            inner = DiffPoly.zero(N, eps_t)
            for zeta in range(1, N + 1):
                kmax = max(
                    (dd for (_, jets) in gen.terms for a, dd in jets if a == zeta),
                    default=-1,
                )
                der = d_x(flux0[(mu, 0)][zeta - 1])
                for k in range(kmax + 1):
                    part = gen.partial(zeta, k)
                    if not part.is_zero():
                        inner = inner + part * der
                    der = d_x(der)
            corr = corr + v * d_x(inner)
        exprs.append(DiffPoly.jet(N, alpha, 0, eps_t) - corr)
    out = MiuraMap(N, eps_t, exprs)
    if not out.is_second_kind():
        raise HierarchyError("grading violation in the normal chart map")
    return out


# ---------------------------------------------------------------------------
# commutation


def flow_derivative(p: DiffPoly, flux: Sequence[DiffPoly]) -> DiffPoly:
    """Derivative of p along the flow with the given flux components.

    The flow moves the jet w[gamma, k] by the k-th prolonged x-derivative of
    the gamma component's spatial derivative.
    """
    if len(flux) != p.nfields:
        raise ValueError("one flux component per field required")
    out = DiffPoly.zero(p.nfields, p.trunc)
    for gamma in range(1, p.nfields + 1):
        kmax = max((d for (_, jets) in p.terms for a, d in jets if a == gamma), default=-1)
        der = d_x(flux[gamma - 1])
        for k in range(kmax + 1):
            part = p.partial(gamma, k)
            if not part.is_zero():
                out = out + part * der
            der = d_x(der)
    return out


def check_commutation(flux: FluxSet, pairs: Sequence[tuple]) -> list[dict]:
    """Pairwise flow commutators as report entries.

    Each entry records the pair, whether all components vanish, and the text
    of any nonzero defect.  A defect that vanishes identically means the two
    flows commute, since both sides vanish on the zero jet and their
    difference is a total x-derivative kernel element.
    """
    report = []
    for t1, t2 in pairs:
        f1 = [flux.flux(a, *t1) for a in range(1, flux.nfields + 1)]
        f2 = [flux.flux(a, *t2) for a in range(1, flux.nfields + 1)]
        defects = []
        for alpha in range(flux.nfields):
            d = flow_derivative(f2[alpha], f1) - flow_derivative(f1[alpha], f2)
            defects.append(d)
        ok = all(d.is_zero() for d in defects)
        report.append(
            {
                "pair": (tuple(t1), tuple(t2)),
                "commutes": ok,
                "defect_texts": [d.to_text() for d in defects],
            }
        )
    return report


# ---------------------------------------------------------------------------
# demos


def kdv_demo() -> dict:
    """The first dispersive flow of the scalar psi-series hierarchy.

    Returns the flux and evolution texts with the two moduli contributions
    that produce them, everything exact.
    """
    spec = HierarchySpec(eps_trunc=2)
    fx = build_flux_R(spec, 1)
    flux = fx.flux(1, 1, 1)
    c04 = spec.bdata(0, 2, 2).b_section((1, 0), (1, 1, 1, 1)).coeff((0, 0))
    c13 = spec.bdata(1, 1, 2).b_section((1, 0), (1, 1, 1)).coeff((2,))
    return {
        "flux_text": flux.to_text(),
        "evolution_text": d_x(flux).to_text(),
        "hamiltonian_text": fx.ham(1, 1).to_text(),
        "contributions": {"M_{0,4}": rat_to_str(c04), "M_{1,3}": rat_to_str(c13)},
    }


def hodge_demo(M: int) -> dict:
    """Leading correction of the normal chart map for the total Hodge pairing.

    The pairing multiplies the correlators by one Hodge factor per parameter
    x_i, M factors in all.  The first correction to the normal chart sits at
    eps^6 on the fourth jet and its parameter polynomial is assembled here
    from exact lambda-class reductions:

    * degree-three lambda monomials from the product of Hodge factors are
      lambda_3 (from x_i^3), lambda_2 lambda_1 (from x_i^2 x_j), and
      lambda_1^3 (from x_i x_j x_k);
    * lambda_1^3 reduces to 2 lambda_2 lambda_1 and lambda_3 pairs to zero
      against the lambda_3 already present, so only mixed monomials survive,
      which forces vanishing at M = 1;
    * the surviving pairing integrates lambda_3 lambda_2 lambda_1 psi_1 over
      the genus-three one-pointed space, evaluated by the dilaton pushdown
      and the top intersection of lambda_2^3.
    """
    if M < 1:
        raise ValueError("need at least one Hodge factor")
    red111 = hodge_reduce([1, 1, 1], 3)
    if red111 != {(2, 1): Fraction(2)}:
        raise HierarchyError("lambda_1^3 reduction changed")
    if hodge_reduce([3, 3], 3):
        raise HierarchyError("lambda_3^2 must vanish")
    red222 = hodge_reduce([2, 2, 2], 3)
    if red222 != {(3, 2, 1): Fraction(2)}:
        raise HierarchyError("lambda_2^3 reduction changed")
    top = lambda_top_triple(3) / red222[(3, 2, 1)]
    pairing = 4 * top
    ring = tuple(f"x{i}" for i in range(1, M + 1))
    poly = MultiPoly.zero(ring)
    for i in range(M):
        for j in range(M):
            if i != j:
                exps = [0] * M
                exps[i] = 2
                exps[j] = 1
                poly = poly + MultiPoly.monomial(ring, tuple(exps), 1)
    triple = red111[(2, 1)]
    for combo in itertools.combinations(range(M), 3):
        exps = [0] * M
        for i in combo:
            exps[i] = 1
        poly = poly + MultiPoly.monomial(ring, tuple(exps), triple)
    scaled = poly * pairing
    denom = 1 / pairing
    term = "0" if poly.is_zero() else f"({poly.to_text()})/{denom}"
    return {
        "M": M,
        "vanishes": poly.is_zero(),
        "term_text": term,
        "jet_text": "eps^6*w[1,4]",
        "pairing_integral": rat_to_str(pairing),
        "generator": scaled,
    }


# ---------------------------------------------------------------------------
# canonical output contraction


class CanonicalFView:
    """Read-only output-contraction view of a pairing table.

    The output slot is the first field; its value contracts the inverse
    pairing against the base correlator with the output moved to the last
    slot, carrying its psi exponent along.
    """

    kind = "fcohft_psi"

    def __init__(self, base: CorrelatorTable):
        if base.kind != "cohft_psi":
            raise ValueError("base must be a cohft_psi table")
        self.base = base
        self.N = base.N
        self.eta = base.eta
        self.trivial = base.trivial

    def covers(self, g: int, nslots: int) -> bool:
        return self.base.covers(g, nslots)

    def correlator(self, g: int, fields: Sequence[int], psi: Sequence[int]) -> Fraction:
        if not fields:
            raise ValueError("need an output slot")
        out = Fraction(0)
        rot_f = list(fields[1:])
        rot_p = list(psi[1:]) + [psi[0]]
        for mu in range(1, self.N + 1):
            v = self.eta.inv(fields[0], mu)
            if v:
                out += v * self.base.correlator(g, rot_f + [mu], rot_p)
        return out


def fcohft_from_pcohft(table: CorrelatorTable) -> CanonicalFView:
    """The canonical output contraction of a pairing table."""
    return CanonicalFView(table)
