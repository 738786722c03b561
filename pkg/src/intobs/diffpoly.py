"""Differential polynomials in jet variables w[alpha, d], exact over Q.

A term is eps^e times a monomial in jets; eps powers beyond a configurable
truncation order are dropped, which keeps genus expansions finite.  On top of
the ring sit local functionals (densities modulo total x-derivatives, with an
exact normal form), a constant Poisson pairing, Miura-type changes of jet
coordinates, formal series in the times t[alpha, k], and a matcher that
reconstructs a differential polynomial from its evaluation on a solution
series.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import groupby
from typing import Mapping, Sequence, Union

from .exactnum import (
    RatLike,
    invert_matrix,
    rat_from_str,
    rat_to_str,
    rref_exact,
    solve_exact,
)

DEFAULT_EPS_TRUNC = 6

Jet = tuple[int, int]  # (field index, counted from 1; x-derivative order)


class MatchError(Exception):
    """No differential polynomial reproduces the given series."""


class MetricEta:
    """Constant nondegenerate symmetric pairing on the fields."""

    __slots__ = ("rows", "inv_rows")

    def __init__(self, rows: Sequence[Sequence[RatLike]]):
        self.rows = tuple(tuple(Fraction(x) for x in r) for r in rows)
        n = len(self.rows)
        if any(len(r) != n for r in self.rows):
            raise ValueError("eta must be square")
        if any(self.rows[i][j] != self.rows[j][i] for i in range(n) for j in range(i)):
            raise ValueError("eta must be symmetric")
        self.inv_rows = tuple(tuple(r) for r in invert_matrix(self.rows))

    @classmethod
    def identity(cls, n: int) -> "MetricEta":
        return cls([[1 if i == j else 0 for j in range(n)] for i in range(n)])

    @property
    def n(self) -> int:
        return len(self.rows)

    def of(self, a: int, b: int) -> Fraction:
        return self.rows[a - 1][b - 1]

    def inv(self, a: int, b: int) -> Fraction:
        return self.inv_rows[a - 1][b - 1]

    def to_obj(self) -> list:
        return [[rat_to_str(x) for x in r] for r in self.rows]

    @classmethod
    def from_obj(cls, obj: list) -> "MetricEta":
        return cls([[rat_from_str(str(x)) for x in r] for r in obj])

    def __eq__(self, other):
        return isinstance(other, MetricEta) and self.rows == other.rows

    __hash__ = None


class DiffPoly:
    """Polynomial in jets w[alpha, d] with eps-graded rational coefficients.

    Terms map (eps exponent, sorted jet tuple) to nonzero Fractions.  All
    operations drop eps powers beyond ``trunc``.
    """

    __slots__ = ("nfields", "trunc", "terms")

    def __init__(
        self,
        nfields: int,
        trunc: int = DEFAULT_EPS_TRUNC,
        terms: Mapping[tuple, RatLike] | None = None,
    ):
        if nfields < 1:
            raise ValueError("need at least one field")
        self.nfields = nfields
        self.trunc = trunc
        clean: dict[tuple, Fraction] = {}
        if terms:
            for (eps, jets), c in terms.items():
                c = Fraction(c)
                if c == 0 or eps > trunc:
                    continue
                if eps < 0:
                    raise ValueError("negative eps power")
                jets = tuple(sorted((int(a), int(d)) for a, d in jets))
                for a, d in jets:
                    if not (1 <= a <= nfields) or d < 0:
                        raise ValueError(f"bad jet ({a},{d})")
                key = (eps, jets)
                clean[key] = clean.get(key, Fraction(0)) + c
                if clean[key] == 0:
                    del clean[key]
        self.terms = clean

    # -- constructors --------------------------------------------------------

    @classmethod
    def zero(cls, nfields: int, trunc: int = DEFAULT_EPS_TRUNC) -> "DiffPoly":
        return cls(nfields, trunc)

    @classmethod
    def const(cls, nfields: int, c: RatLike, trunc: int = DEFAULT_EPS_TRUNC) -> "DiffPoly":
        return cls(nfields, trunc, {(0, ()): c})

    @classmethod
    def jet(cls, nfields: int, alpha: int, d: int, trunc: int = DEFAULT_EPS_TRUNC) -> "DiffPoly":
        return cls(nfields, trunc, {(0, ((alpha, d),)): 1})

    @classmethod
    def eps_power(cls, nfields: int, e: int, trunc: int = DEFAULT_EPS_TRUNC) -> "DiffPoly":
        return cls(nfields, trunc, {(e, ()): 1})

    # -- predicates ----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other):
        if isinstance(other, DiffPoly):
            return self.nfields == other.nfields and self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self == DiffPoly.const(self.nfields, other, self.trunc)
        return NotImplemented

    __hash__ = None

    # -- ring operations -----------------------------------------------------

    def _check(self, other: "DiffPoly"):
        if self.nfields != other.nfields:
            raise ValueError("field count mismatch")

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = DiffPoly.const(self.nfields, other, self.trunc)
        if not isinstance(other, DiffPoly):
            return NotImplemented
        self._check(other)
        trunc = min(self.trunc, other.trunc)
        out = {k: c for k, c in self.terms.items() if k[0] <= trunc}
        for k, c in other.terms.items():
            if k[0] > trunc:
                continue
            s = out.get(k, Fraction(0)) + c
            if s:
                out[k] = s
            else:
                out.pop(k, None)
        p = DiffPoly(self.nfields, trunc)
        p.terms = out
        return p

    def __radd__(self, other):
        return self.__add__(other)

    def __neg__(self):
        p = DiffPoly(self.nfields, self.trunc)
        p.terms = {k: -c for k, c in self.terms.items()}
        return p

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = DiffPoly.const(self.nfields, other, self.trunc)
        return self.__add__(other.__neg__())

    def __rsub__(self, other):
        return self.__neg__().__add__(other)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if other == 0:
                return DiffPoly(self.nfields, self.trunc)
            p = DiffPoly(self.nfields, self.trunc)
            p.terms = {k: c * other for k, c in self.terms.items()}
            return p
        if not isinstance(other, DiffPoly):
            return NotImplemented
        self._check(other)
        trunc = min(self.trunc, other.trunc)
        out: dict[tuple, Fraction] = {}
        for (e1, j1), c1 in self.terms.items():
            for (e2, j2), c2 in other.terms.items():
                e = e1 + e2
                if e > trunc:
                    continue
                key = (e, tuple(sorted(j1 + j2)))
                s = out.get(key, Fraction(0)) + c1 * c2
                if s:
                    out[key] = s
                else:
                    del out[key]
        p = DiffPoly(self.nfields, trunc)
        p.terms = out
        return p

    def __rmul__(self, other):
        return self.__mul__(other)

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        out = DiffPoly.const(self.nfields, 1, self.trunc)
        for _ in range(k):
            out = out * self
        return out

    # -- calculus ------------------------------------------------------------

    def x_derivative(self) -> "DiffPoly":
        """Total x-derivative: Leibniz over jet factors, each d -> d + 1."""
        out: dict[tuple, Fraction] = {}
        for (eps, jets), c in self.terms.items():
            for i, (a, d) in enumerate(jets):
                key = (eps, tuple(sorted(jets[:i] + ((a, d + 1),) + jets[i + 1:])))
                s = out.get(key, Fraction(0)) + c
                if s:
                    out[key] = s
                else:
                    del out[key]
        p = DiffPoly(self.nfields, self.trunc)
        p.terms = out
        return p

    def partial(self, alpha: int, d: int) -> "DiffPoly":
        """d/d(w[alpha, d]) treating every jet as an independent variable."""
        jet = (alpha, d)
        out: dict[tuple, Fraction] = {}
        for (eps, jets), c in self.terms.items():
            m = jets.count(jet)
            if not m:
                continue
            rest = list(jets)
            rest.remove(jet)
            key = (eps, tuple(rest))
            s = out.get(key, Fraction(0)) + m * c
            if s:
                out[key] = s
            else:
                del out[key]
        p = DiffPoly(self.nfields, self.trunc)
        p.terms = out
        return p

    def var_derivative(self, alpha: int) -> "DiffPoly":
        """Variational derivative sum_d (-d_x)^d of partial(alpha, d)."""
        max_d = max(
            (d for (_, jets) in self.terms for a, d in jets if a == alpha),
            default=-1,
        )
        acc = DiffPoly(self.nfields, self.trunc)
        for d in range(max_d + 1):
            p = self.partial(alpha, d)
            for _ in range(d):
                p = p.x_derivative()
            acc = acc + (p if d % 2 == 0 else -p)
        return acc

    def substitute(self, images: Mapping[int, "DiffPoly"]) -> "DiffPoly":
        """Replace w[alpha, d] by the d-th x-derivative of images[alpha]."""
        cache: dict[Jet, DiffPoly] = {}

        def image(a: int, d: int) -> DiffPoly:
            if (a, d) not in cache:
                cache[(a, d)] = image(a, d - 1).x_derivative() if d else images[a]
            return cache[(a, d)]

        acc = DiffPoly(self.nfields, self.trunc)
        for (eps, jets), c in self.terms.items():
            term = DiffPoly(self.nfields, self.trunc, {(eps, ()): c})
            for a, d in jets:
                term = term * image(a, d)
            acc = acc + term
        return acc

    # -- structure -----------------------------------------------------------

    def coeff(self, eps: int, jets: Sequence[Jet]) -> Fraction:
        return self.terms.get((eps, tuple(sorted(jets))), Fraction(0))

    def eps_component(self, e: int) -> "DiffPoly":
        p = DiffPoly(self.nfields, self.trunc)
        p.terms = {k: c for k, c in self.terms.items() if k[0] == e}
        return p

    def max_eps(self) -> int:
        return max((k[0] for k in self.terms), default=-1)

    # -- rendering / serialization -------------------------------------------

    @staticmethod
    def _sort_key(key: tuple) -> tuple:
        eps, jets = key
        return (eps, len(jets), jets)

    def to_text(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for (eps, jets), c in sorted(self.terms.items(), key=lambda kv: self._sort_key(kv[0])):
            factors = []
            if eps:
                factors.append("eps" if eps == 1 else f"eps^{eps}")
            for jet, grp in groupby(jets):
                m = len(list(grp))
                base = f"w[{jet[0]},{jet[1]}]"
                factors.append(base if m == 1 else f"({base})^{m}")
            ac = abs(c)
            if not factors:
                body = rat_to_str(ac)
            elif ac == 1:
                body = "*".join(factors)
            else:
                body = "*".join([rat_to_str(ac)] + factors)
            parts.append((c < 0, body))
        out = ("-" if parts[0][0] else "") + parts[0][1]
        for neg, body in parts[1:]:
            out += (" - " if neg else " + ") + body
        return out

    __repr__ = to_text

    def to_obj(self) -> list:
        return [
            {"eps": eps, "jets": [list(j) for j in jets], "coeff": rat_to_str(c)}
            for (eps, jets), c in sorted(self.terms.items(), key=lambda kv: self._sort_key(kv[0]))
        ]

    @classmethod
    def from_obj(cls, nfields: int, obj: list, trunc: int = DEFAULT_EPS_TRUNC) -> "DiffPoly":
        terms = {}
        for entry in obj:
            if set(entry) != {"eps", "jets", "coeff"}:
                raise ValueError(f"bad term fields: {sorted(entry)}")
            key = (entry["eps"], tuple((a, d) for a, d in entry["jets"]))
            terms[key] = terms.get(key, Fraction(0)) + rat_from_str(entry["coeff"])
        return cls(nfields, trunc, terms)


def d_x(p: DiffPoly) -> DiffPoly:
    return p.x_derivative()


def var_derivative(p: DiffPoly, alpha: int) -> DiffPoly:
    return p.var_derivative(alpha)


def is_null_lagrangian(p: DiffPoly) -> bool:
    """True when the density integrates to zero: all variational derivatives
    vanish and there is no jet-free term."""
    if any(not jets for (_, jets) in p.terms):
        return False
    return all(p.var_derivative(a).is_zero() for a in range(1, p.nfields + 1))


# ---------------------------------------------------------------------------
# Local functionals
# ---------------------------------------------------------------------------


def _cell_monomials(alphas: tuple[int, ...], total_d: int) -> list[tuple[Jet, ...]]:
    """Jet monomials with the given field-label multiset and total x-order."""
    seen: set[tuple[Jet, ...]] = set()

    def rec(i: int, remaining: int, acc: list[Jet]):
        if i == len(alphas):
            if remaining == 0:
                seen.add(tuple(sorted(acc)))
            return
        for d in range(remaining + 1):
            acc.append((alphas[i], d))
            rec(i + 1, remaining - d, acc)
            acc.pop()

    rec(0, total_d, [])
    return sorted(seen)


class LocalFunctional:
    """A density considered up to total x-derivatives.

    The normal form reduces each graded cell (eps, field multiset, total
    x-order) against the image of d_x by exact Gaussian elimination, so
    equality of local functionals is decidable.
    """

    __slots__ = ("density",)

    def __init__(self, density: DiffPoly):
        self.density = density

    def normal_form(self) -> DiffPoly:
        dens = self.density
        cells: dict[tuple, dict] = {}
        for (eps, jets), c in dens.terms.items():
            alphas = tuple(sorted(a for a, _ in jets))
            total_d = sum(d for _, d in jets)
            cells.setdefault((eps, alphas, total_d), {})[jets] = c
        out: dict[tuple, Fraction] = {}
        for (eps, alphas, total_d), comp in cells.items():
            if not alphas or total_d == 0:
                for jets, c in comp.items():
                    out[(eps, jets)] = c
                continue
            basis = _cell_monomials(alphas, total_d)
            index = {m: i for i, m in enumerate(basis)}
            gens = []
            for m in _cell_monomials(alphas, total_d - 1):
                dm = DiffPoly(dens.nfields, dens.trunc, {(0, m): 1}).x_derivative()
                row = [Fraction(0)] * len(basis)
                for (_, jets), c in dm.terms.items():
                    row[index[jets]] = c
                gens.append(row)
            red, pivots = rref_exact(gens)
            vec = [comp.get(m, Fraction(0)) for m in basis]
            for row, piv in zip(red, pivots):
                f = vec[piv]
                if f:
                    vec = [x - f * y for x, y in zip(vec, row)]
            for m, c in zip(basis, vec):
                if c:
                    out[(eps, m)] = c
        p = DiffPoly(dens.nfields, dens.trunc)
        p.terms = out
        return p

    def is_zero(self) -> bool:
        return self.normal_form().is_zero()

    def __eq__(self, other):
        if isinstance(other, LocalFunctional):
            if self.density.nfields != other.density.nfields:
                return False
            return LocalFunctional(self.density - other.density).is_zero()
        return NotImplemented

    __hash__ = None

    def __repr__(self):
        return f"int({self.density.to_text()}) dx"


def poisson_bracket(f1, f2, eta) -> LocalFunctional:
    """Bracket of two local functionals for the pairing {w^a, w^b} = eta^{ab} delta'.

    Density: sum_{a,b} (delta f1 / delta w^a) eta^{ab} d_x (delta f2 / delta w^b),
    with eta^{ab} the inverse pairing.  Accepts LocalFunctional or bare
    densities, and eta as a MetricEta or a plain matrix.
    """
    if not isinstance(eta, MetricEta):
        eta = MetricEta(eta)
    d1 = f1.density if isinstance(f1, LocalFunctional) else f1
    d2 = f2.density if isinstance(f2, LocalFunctional) else f2
    d1._check(d2)
    n = d1.nfields
    v1 = [d1.var_derivative(a) for a in range(1, n + 1)]
    v2 = [d2.var_derivative(b).x_derivative() for b in range(1, n + 1)]
    acc = DiffPoly(n, min(d1.trunc, d2.trunc))
    for a in range(n):
        for b in range(n):
            c = eta.inv_rows[a][b]
            if c:
                acc = acc + c * (v1[a] * v2[b])
    return LocalFunctional(acc)


# ---------------------------------------------------------------------------
# Miura-type coordinate changes
# ---------------------------------------------------------------------------


class MiuraMap:
    """Change of jet coordinates what^a = exprs[a](w).

    ``apply`` pulls a differential polynomial in the new coordinates back to
    the old ones.  Maps of the second kind (what^a = w^a plus terms carrying
    eps) invert by fixed-point iteration, exactly modulo the eps truncation.
    """

    __slots__ = ("nfields", "trunc", "exprs", "kind")

    def __init__(self, nfields: int, trunc: int, exprs, kind: str = "second-kind"):
        self.nfields = nfields
        self.trunc = trunc
        self.kind = kind
        if not isinstance(exprs, Mapping):
            exprs = {a + 1: e for a, e in enumerate(exprs)}
        self.exprs = {}
        for a in range(1, nfields + 1):
            e = exprs[a]
            if e.nfields != nfields:
                raise ValueError("expression in wrong ring")
            self.exprs[a] = e

    def apply(self, p: DiffPoly) -> DiffPoly:
        return p.substitute(self.exprs)

    def is_second_kind(self) -> bool:
        for a in range(1, self.nfields + 1):
            rest = self.exprs[a] - DiffPoly.jet(self.nfields, a, 0, self.trunc)
            if any(eps < 1 for (eps, _) in rest.terms):
                return False
        return True

    def invert(self) -> "MiuraMap":
        if not self.is_second_kind():
            raise ValueError("only second-kind maps invert")
        ident = {
            a: DiffPoly.jet(self.nfields, a, 0, self.trunc)
            for a in range(1, self.nfields + 1)
        }
        u = {a: self.exprs[a] - ident[a] for a in ident}
        cur = dict(ident)
        for _ in range(self.trunc + 1):
            cur = {a: ident[a] - u[a].substitute(cur) for a in ident}
        return MiuraMap(self.nfields, self.trunc, cur)


def apply_miura(m: MiuraMap, p: DiffPoly) -> DiffPoly:
    return m.apply(p)


def invert_miura(m: MiuraMap) -> MiuraMap:
    return m.invert()


# ---------------------------------------------------------------------------
# Formal series in the times
# ---------------------------------------------------------------------------


class FormalSeries:
    """Formal power series in times t[alpha, k] with eps-graded coefficients.

    Keys are (eps exponent, sorted tuple of (alpha, k)); terms beyond the eps
    truncation or the t-degree truncation are dropped.
    """

    __slots__ = ("nfields", "eps_trunc", "t_trunc", "coeffs")

    def __init__(
        self,
        nfields: int,
        eps_trunc: int = DEFAULT_EPS_TRUNC,
        t_trunc: int | None = None,
        coeffs: Mapping[tuple, RatLike] | None = None,
    ):
        self.nfields = nfields
        self.eps_trunc = eps_trunc
        self.t_trunc = eps_trunc + 4 if t_trunc is None else t_trunc
        clean: dict[tuple, Fraction] = {}
        if coeffs:
            for (eps, times), c in coeffs.items():
                c = Fraction(c)
                if c == 0 or eps > self.eps_trunc or len(times) > self.t_trunc:
                    continue
                if eps < 0:
                    raise ValueError("negative eps power")
                times = tuple(sorted((int(a), int(k)) for a, k in times))
                for a, k in times:
                    if not (1 <= a <= nfields) or k < 0:
                        raise ValueError(f"bad time ({a},{k})")
                key = (eps, times)
                clean[key] = clean.get(key, Fraction(0)) + c
                if clean[key] == 0:
                    del clean[key]
        self.coeffs = clean

    # -- constructors --------------------------------------------------------

    @classmethod
    def zero(cls, nfields: int, eps_trunc: int = DEFAULT_EPS_TRUNC, t_trunc: int | None = None):
        return cls(nfields, eps_trunc, t_trunc)

    @classmethod
    def const(cls, nfields: int, c: RatLike, eps_trunc: int = DEFAULT_EPS_TRUNC, t_trunc: int | None = None):
        return cls(nfields, eps_trunc, t_trunc, {(0, ()): c})

    @classmethod
    def time(cls, nfields: int, alpha: int, k: int, eps_trunc: int = DEFAULT_EPS_TRUNC, t_trunc: int | None = None):
        return cls(nfields, eps_trunc, t_trunc, {(0, ((alpha, k),)): 1})

    def _like(self) -> "FormalSeries":
        return FormalSeries(self.nfields, self.eps_trunc, self.t_trunc)

    # -- predicates ----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.coeffs

    def __eq__(self, other):
        if isinstance(other, FormalSeries):
            return self.nfields == other.nfields and self.coeffs == other.coeffs
        if isinstance(other, (int, Fraction)):
            return self == FormalSeries.const(self.nfields, other, self.eps_trunc, self.t_trunc)
        return NotImplemented

    __hash__ = None

    # -- ring operations -----------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = FormalSeries.const(self.nfields, other, self.eps_trunc, self.t_trunc)
        if not isinstance(other, FormalSeries):
            return NotImplemented
        if self.nfields != other.nfields:
            raise ValueError("field count mismatch")
        out = self._like()
        out.eps_trunc = min(self.eps_trunc, other.eps_trunc)
        out.t_trunc = min(self.t_trunc, other.t_trunc)
        acc = {k: c for k, c in self.coeffs.items() if k[0] <= out.eps_trunc and len(k[1]) <= out.t_trunc}
        for k, c in other.coeffs.items():
            if k[0] > out.eps_trunc or len(k[1]) > out.t_trunc:
                continue
            s = acc.get(k, Fraction(0)) + c
            if s:
                acc[k] = s
            else:
                acc.pop(k, None)
        out.coeffs = acc
        return out

    def __radd__(self, other):
        return self.__add__(other)

    def __neg__(self):
        out = self._like()
        out.coeffs = {k: -c for k, c in self.coeffs.items()}
        return out

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = FormalSeries.const(self.nfields, other, self.eps_trunc, self.t_trunc)
        return self.__add__(other.__neg__())

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            out = self._like()
            if other != 0:
                out.coeffs = {k: c * other for k, c in self.coeffs.items()}
            return out
        if not isinstance(other, FormalSeries):
            return NotImplemented
        if self.nfields != other.nfields:
            raise ValueError("field count mismatch")
        eps_trunc = min(self.eps_trunc, other.eps_trunc)
        t_trunc = min(self.t_trunc, other.t_trunc)
        acc: dict[tuple, Fraction] = {}
        for (e1, t1), c1 in self.coeffs.items():
            for (e2, t2), c2 in other.coeffs.items():
                e = e1 + e2
                if e > eps_trunc or len(t1) + len(t2) > t_trunc:
                    continue
                key = (e, tuple(sorted(t1 + t2)))
                s = acc.get(key, Fraction(0)) + c1 * c2
                if s:
                    acc[key] = s
                else:
                    del acc[key]
        out = FormalSeries(self.nfields, eps_trunc, t_trunc)
        out.coeffs = acc
        return out

    def __rmul__(self, other):
        return self.__mul__(other)

    # -- calculus / grading --------------------------------------------------

    def deriv_t(self, alpha: int, k: int) -> "FormalSeries":
        """d/d t[alpha, k]."""
        var = (alpha, k)
        acc: dict[tuple, Fraction] = {}
        for (eps, times), c in self.coeffs.items():
            m = times.count(var)
            if not m:
                continue
            rest = list(times)
            rest.remove(var)
            key = (eps, tuple(rest))
            s = acc.get(key, Fraction(0)) + m * c
            if s:
                acc[key] = s
            else:
                del acc[key]
        out = self._like()
        out.coeffs = acc
        return out

    def shift_eps(self, e: int) -> "FormalSeries":
        out = self._like()
        out.coeffs = {
            (eps + e, times): c
            for (eps, times), c in self.coeffs.items()
            if eps + e <= self.eps_trunc
        }
        return out

    def eps_euler(self) -> "FormalSeries":
        """eps d/d eps: scales each term by its eps exponent."""
        out = self._like()
        out.coeffs = {k: c * k[0] for k, c in self.coeffs.items() if k[0]}
        return out

    def coeff(self, eps: int, times: Sequence[tuple[int, int]]) -> Fraction:
        return self.coeffs.get((eps, tuple(sorted(times))), Fraction(0))

    # -- serialization -------------------------------------------------------

    def to_obj(self) -> list:
        return [
            {"eps": eps, "times": [list(t) for t in times], "coeff": rat_to_str(c)}
            for (eps, times), c in sorted(self.coeffs.items())
        ]

    @classmethod
    def from_obj(cls, nfields: int, obj: list, eps_trunc: int = DEFAULT_EPS_TRUNC, t_trunc: int | None = None):
        coeffs = {}
        for entry in obj:
            if set(entry) != {"eps", "times", "coeff"}:
                raise ValueError(f"bad series entry fields: {sorted(entry)}")
            key = (entry["eps"], tuple((a, k) for a, k in entry["times"]))
            coeffs[key] = coeffs.get(key, Fraction(0)) + rat_from_str(entry["coeff"])
        return cls(nfields, eps_trunc, t_trunc, coeffs)


def substitute_solution(
    p: DiffPoly, sols: Sequence[FormalSeries], x_role: tuple[int, int] = (1, 0)
) -> FormalSeries:
    """Evaluate a differential polynomial on a solution series.

    The jet w[alpha, q] maps to the q-th derivative of sols[alpha - 1] with
    respect to the time playing the role of x (t[1, 0] by default), and eps
    exponents add.
    """
    if p.nfields != len(sols):
        raise ValueError("one solution series per field required")
    model = sols[0]
    deep = max((d for (_, jets) in p.terms for _, d in jets), default=0)
    if deep > model.t_trunc:
        raise ValueError("truncation overflow: jets exceed the stored t-degree")
    images: dict[Jet, FormalSeries] = {}

    def image(a: int, q: int) -> FormalSeries:
        if (a, q) not in images:
            images[(a, q)] = image(a, q - 1).deriv_t(*x_role) if q else sols[a - 1]
        return images[(a, q)]

    acc = FormalSeries.zero(model.nfields, model.eps_trunc, model.t_trunc)
    for (eps, jets), c in p.terms.items():
        term = FormalSeries.const(model.nfields, c, model.eps_trunc, model.t_trunc)
        for a, q in jets:
            term = term * image(a, q)
        acc = acc + term.shift_eps(eps)
    return acc


def _jet_monomials(nfields: int, total_q: int, max_factors: int) -> list[tuple[Jet, ...]]:
    """Sorted jet multisets with x-orders summing to total_q, at most
    max_factors factors, at least one factor."""
    pool = [(a, d) for a in range(1, nfields + 1) for d in range(total_q + 1)]
    out: list[tuple[Jet, ...]] = []

    def rec(start: int, remaining: int, acc: list[Jet]):
        if remaining == 0 and acc:
            out.append(tuple(acc))
        if len(acc) == max_factors:
            return
        for i in range(start, len(pool)):
            a, d = pool[i]
            if d > remaining:
                continue
            acc.append((a, d))
            rec(i, remaining - d, acc)
            acc.pop()

    rec(0, total_q, [])
    return sorted(set(out))


def match_diffpoly(
    series: FormalSeries,
    sols: Sequence[FormalSeries],
    grading_bound: int,
    max_jet_factors: int | None = None,
) -> DiffPoly:
    """Reconstruct P with substitute_solution(P, sols) == series.

    grading_bound is the deg_dx grading of the target: the eps^(2g) part of
    the ansatz runs over jet monomials of total x-order 2g + grading_bound.
    Coefficients come from one exact linear solve over the series keys whose
    time orders sum to at most eps + grading_bound; the result is verified by
    resubstitution on those keys.  Raises MatchError when the system is
    inconsistent or underdetermined.
    """
    nfields = len(sols)
    cap = series.t_trunc if max_jet_factors is None else max_jet_factors
    unknowns: list[tuple] = []
    for g in range(series.eps_trunc // 2 + 1):
        s = 2 * g + grading_bound
        if s < 0:
            continue
        if s == 0:
            unknowns.append((2 * g, ()))
        for jets in _jet_monomials(nfields, s, cap):
            unknowns.append((2 * g, jets))
    columns = []
    for key in unknowns:
        mono = DiffPoly(nfields, series.eps_trunc, {key: 1})
        columns.append(substitute_solution(mono, sols))

    def eligible(key):
        eps, times = key
        return sum(k for _, k in times) <= eps + grading_bound

    keys = {k for k in series.coeffs if eligible(k)}
    for col in columns:
        keys.update(k for k in col.coeffs if eligible(k))
    keys = sorted(keys)
    rows = [[col.coeffs.get(k, Fraction(0)) for col in columns] for k in keys]
    rhs = [series.coeffs.get(k, Fraction(0)) for k in keys]
    status, x = solve_exact(rows, rhs, ncols=len(unknowns))
    if status == "inconsistent":
        raise MatchError("no differential polynomial matches the series")
    if status == "underdetermined":
        raise MatchError("solution data does not determine the coefficients")
    result = DiffPoly(nfields, series.eps_trunc, dict(zip(unknowns, x)))
    check = substitute_solution(result, sols)
    for k in keys:
        if check.coeffs.get(k, Fraction(0)) != series.coeffs.get(k, Fraction(0)):
            raise MatchError("resubstitution check failed")
    return result
