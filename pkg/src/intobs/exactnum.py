"""Exact rational arithmetic: Bernoulli numbers and polynomials, multinomial
coefficients, sparse multivariate polynomials over Q, and a small exact
linear solver.

Every quantity is a fractions.Fraction.  Serialization renders rationals as
"p/q" (the "/q" omitted for integers) so table files and reports stay exact.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb, factorial
from typing import Iterable, Mapping, Sequence, Union

Rational = Fraction
RatLike = Union[Fraction, int]


def rat_to_str(x: RatLike) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def rat_from_str(s: str) -> Fraction:
    return Fraction(s.strip())


# ---------------------------------------------------------------------------
# Bernoulli numbers and polynomials
# ---------------------------------------------------------------------------

_bernoulli: list[Fraction] = [Fraction(1)]


def bernoulli_number(m: int) -> Fraction:
    """B_m in the convention B_1 = -1/2.

    Computed once by the defining recurrence sum_{j<=m} C(m+1,j) B_j = 0
    and cached for the life of the process.
    """
    if m < 0:
        raise ValueError("Bernoulli index must be nonnegative")
    while len(_bernoulli) <= m:
        k = len(_bernoulli)
        acc = Fraction(0)
        for j in range(k):
            acc += comb(k + 1, j) * _bernoulli[j]
        _bernoulli.append(-acc / (k + 1))
    return _bernoulli[m]


def bernoulli_poly(m: int, x):
    """B_m(x) = sum_k C(m,k) B_k x^(m-k).

    ``x`` may be a Fraction, an int, or anything with ring operations
    (a MultiPoly in particular).
    """
    if m < 0:
        raise ValueError("Bernoulli index must be nonnegative")
    acc = None
    for k in range(m + 1):
        term = comb(m, k) * bernoulli_number(k) * x ** (m - k)
        acc = term if acc is None else acc + term
    return acc


def bernoulli_poly_cleared(m: int, num, den):
    """Numerator of B_m(num/den) after clearing the denominator.

    Returns N with N / den^m = B_m(num/den); num and den live in any common
    ring.  Keeps everything polynomial when den is itself a polynomial.
    """
    acc = None
    for k in range(m + 1):
        term = comb(m, k) * bernoulli_number(k) * num ** (m - k) * den ** k
        acc = term if acc is None else acc + term
    return acc


def multinomial(total: int, parts: Sequence[int]) -> int:
    """total! / prod(parts!) with sum(parts) == total enforced."""
    if any(p < 0 for p in parts):
        raise ValueError("multinomial parts must be nonnegative")
    if sum(parts) != total:
        raise ValueError("multinomial parts must sum to the total")
    out = 1
    rest = total
    for p in parts:
        out *= comb(rest, p)
        rest -= p
    return out


def compositions(total: int, k: int):
    """Yield all k-tuples of nonnegative integers summing to total."""
    if k == 0:
        if total == 0:
            yield ()
        return
    if k == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, k - 1):
            yield (first,) + rest


def double_factorial(k: int) -> int:
    """k!! for k >= -1 ((-1)!! = 1)."""
    if k < -1:
        raise ValueError("double factorial needs k >= -1")
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


# ---------------------------------------------------------------------------
# Sparse multivariate polynomials
# ---------------------------------------------------------------------------


class MultiPoly:
    """Sparse polynomial over Q in a fixed, ordered tuple of variables.

    Terms map exponent tuples (one entry per variable) to nonzero Fractions.
    The variable tuple is part of the identity: operations require both
    operands to share it.
    """

    __slots__ = ("vars", "terms")

    def __init__(self, vars: Sequence[str], terms: Mapping[tuple, RatLike] | None = None):
        self.vars = tuple(vars)
        clean: dict[tuple, Fraction] = {}
        if terms:
            nv = len(self.vars)
            for exps, c in terms.items():
                c = Fraction(c)
                if c == 0:
                    continue
                exps = tuple(int(e) for e in exps)
                if len(exps) != nv or any(e < 0 for e in exps):
                    raise ValueError(f"bad exponent tuple {exps} for {self.vars}")
                clean[exps] = clean.get(exps, Fraction(0)) + c
                if clean[exps] == 0:
                    del clean[exps]
        self.terms = clean

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, vars: Sequence[str]) -> "MultiPoly":
        return cls(vars)

    @classmethod
    def const(cls, vars: Sequence[str], c: RatLike) -> "MultiPoly":
        return cls(vars, {(0,) * len(tuple(vars)): Fraction(c)})

    @classmethod
    def variable(cls, vars: Sequence[str], name: str) -> "MultiPoly":
        vars = tuple(vars)
        i = vars.index(name)
        exps = tuple(1 if j == i else 0 for j in range(len(vars)))
        return cls(vars, {exps: Fraction(1)})

    @classmethod
    def monomial(cls, vars: Sequence[str], exps: Sequence[int], c: RatLike = 1) -> "MultiPoly":
        return cls(vars, {tuple(exps): Fraction(c)})

    @classmethod
    def linear_form(cls, vars: Sequence[str], coeffs: Mapping[str, RatLike]) -> "MultiPoly":
        vars = tuple(vars)
        terms = {}
        for name, c in coeffs.items():
            i = vars.index(name)
            exps = tuple(1 if j == i else 0 for j in range(len(vars)))
            terms[exps] = Fraction(c)
        return cls(vars, terms)

    # -- predicates ---------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, MultiPoly):
            return self.vars == other.vars and self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self == MultiPoly.const(self.vars, other)
        return NotImplemented

    __hash__ = None  # mutable dict inside

    # -- ring operations ----------------------------------------------------

    def _check(self, other: "MultiPoly"):
        if self.vars != other.vars:
            raise ValueError(f"variable mismatch: {self.vars} vs {other.vars}")

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = MultiPoly.const(self.vars, other)
        if not isinstance(other, MultiPoly):
            return NotImplemented
        self._check(other)
        out = dict(self.terms)
        for exps, c in other.terms.items():
            s = out.get(exps, Fraction(0)) + c
            if s:
                out[exps] = s
            else:
                out.pop(exps, None)
        p = MultiPoly(self.vars)
        p.terms = out
        return p

    def __radd__(self, other):
        return self.__add__(other)

    def __neg__(self):
        p = MultiPoly(self.vars)
        p.terms = {e: -c for e, c in self.terms.items()}
        return p

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = MultiPoly.const(self.vars, other)
        return self.__add__(other.__neg__())

    def __rsub__(self, other):
        return self.__neg__().__add__(other)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if other == 0:
                return MultiPoly(self.vars)
            p = MultiPoly(self.vars)
            p.terms = {e: c * other for e, c in self.terms.items()}
            return p
        if not isinstance(other, MultiPoly):
            return NotImplemented
        self._check(other)
        out: dict[tuple, Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                s = out.get(e, Fraction(0)) + c1 * c2
                if s:
                    out[e] = s
                else:
                    del out[e]
        p = MultiPoly(self.vars)
        p.terms = out
        return p

    def __rmul__(self, other):
        return self.__mul__(other)

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power of a polynomial")
        out = MultiPoly.const(self.vars, 1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base if k > 1 else base
            k >>= 1
        return out

    # -- structure ----------------------------------------------------------

    def coeff(self, exps: Sequence[int]) -> Fraction:
        return self.terms.get(tuple(exps), Fraction(0))

    def coeff_section(self, fixed: Mapping[str, int]) -> "MultiPoly":
        """Terms whose exponents in the given variables match exactly,
        with those exponents zeroed out in the result."""
        idx = {self.vars.index(name): e for name, e in fixed.items()}
        out = {}
        for exps, c in self.terms.items():
            if all(exps[i] == e for i, e in idx.items()):
                new = tuple(0 if i in idx else e for i, e in enumerate(exps))
                out[new] = out.get(new, Fraction(0)) + c
        p = MultiPoly(self.vars)
        p.terms = {e: c for e, c in out.items() if c}
        return p

    def truncate(self, name: str, max_deg: int) -> "MultiPoly":
        i = self.vars.index(name)
        p = MultiPoly(self.vars)
        p.terms = {e: c for e, c in self.terms.items() if e[i] <= max_deg}
        return p

    def total_degree(self) -> int:
        """Largest total degree; -1 for the zero polynomial."""
        if not self.terms:
            return -1
        return max(sum(e) for e in self.terms)

    def degree_in(self, names: Iterable[str]) -> int:
        idxs = [self.vars.index(n) for n in names]
        if not self.terms:
            return -1
        return max(sum(e[i] for i in idxs) for e in self.terms)

    def homogeneous_part(self, d: int, names: Iterable[str] | None = None) -> "MultiPoly":
        idxs = range(len(self.vars)) if names is None else [self.vars.index(n) for n in names]
        p = MultiPoly(self.vars)
        p.terms = {e: c for e, c in self.terms.items() if sum(e[i] for i in idxs) == d}
        return p

    def derivative(self, name: str) -> "MultiPoly":
        i = self.vars.index(name)
        out = {}
        for exps, c in self.terms.items():
            if exps[i] == 0:
                continue
            new = tuple(e - 1 if j == i else e for j, e in enumerate(exps))
            out[new] = out.get(new, Fraction(0)) + c * exps[i]
        p = MultiPoly(self.vars)
        p.terms = {e: c for e, c in out.items() if c}
        return p

    def eval(self, values: Mapping[str, RatLike]) -> Fraction:
        vals = [Fraction(values[v]) for v in self.vars]
        acc = Fraction(0)
        for exps, c in self.terms.items():
            t = c
            for v, e in zip(vals, exps):
                if e:
                    t *= v ** e
            acc += t
        return acc

    def substitute(self, values: Mapping[str, "MultiPoly | RatLike"], target: Sequence[str]) -> "MultiPoly":
        """Full composition into the ring over ``target`` variables.

        Variables absent from ``values`` must exist in the target ring and
        map to themselves.
        """
        target = tuple(target)
        images: list[MultiPoly] = []
        for v in self.vars:
            if v in values:
                img = values[v]
                if not isinstance(img, MultiPoly):
                    img = MultiPoly.const(target, img)
                elif img.vars != target:
                    raise ValueError("substitution image in wrong ring")
            else:
                img = MultiPoly.variable(target, v)
            images.append(img)
        acc = MultiPoly.zero(target)
        for exps, c in self.terms.items():
            term = MultiPoly.const(target, c)
            for img, e in zip(images, exps):
                if e:
                    term = term * img ** e
            acc = acc + term
        return acc

    # -- rendering / serialization ------------------------------------------

    def sorted_terms(self) -> list[tuple[tuple, Fraction]]:
        return sorted(self.terms.items(), key=lambda kv: kv[0], reverse=True)

    def to_text(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for exps, c in self.sorted_terms():
            mono = monomial_text(self.vars, exps)
            if mono == "1":
                body = rat_to_str(abs(c))
            elif abs(c) == 1:
                body = mono
            else:
                body = f"{rat_to_str(abs(c))}*{mono}"
            parts.append((c < 0, body))
        out = ("-" if parts[0][0] else "") + parts[0][1]
        for neg, body in parts[1:]:
            out += (" - " if neg else " + ") + body
        return out

    __repr__ = to_text

    def to_obj(self) -> list:
        return [
            {"exponents": list(e), "coeff": rat_to_str(c)}
            for e, c in sorted(self.terms.items())
        ]

    @classmethod
    def from_obj(cls, vars: Sequence[str], obj: list) -> "MultiPoly":
        terms = {}
        for entry in obj:
            if set(entry) != {"exponents", "coeff"}:
                raise ValueError(f"bad polynomial entry fields: {sorted(entry)}")
            terms[tuple(entry["exponents"])] = rat_from_str(entry["coeff"])
        return cls(vars, terms)


def monomial_text(vars: Sequence[str], exps: Sequence[int]) -> str:
    parts = []
    for v, e in zip(vars, exps):
        if e == 1:
            parts.append(v)
        elif e > 1:
            parts.append(f"{v}^{e}")
    return "*".join(parts) if parts else "1"


# ---------------------------------------------------------------------------
# Exact linear algebra
# ---------------------------------------------------------------------------


def rref_exact(rows: list[list[Fraction]]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form over Q. Returns (rows, pivot column list)."""
    mat = [list(map(Fraction, r)) for r in rows]
    if not mat:
        return [], []
    ncols = len(mat[0])
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        pr = next((i for i in range(r, len(mat)) if mat[i][c] != 0), None)
        if pr is None:
            continue
        mat[r], mat[pr] = mat[pr], mat[r]
        pv = mat[r][c]
        mat[r] = [x / pv for x in mat[r]]
        for i in range(len(mat)):
            if i != r and mat[i][c] != 0:
                f = mat[i][c]
                mat[i] = [x - f * y for x, y in zip(mat[i], mat[r])]
        pivots.append(c)
        r += 1
        if r == len(mat):
            break
    return mat[:r], pivots


def solve_exact(
    rows: list[list[Fraction]], rhs: list[Fraction], ncols: int | None = None
) -> tuple[str, list[Fraction] | None]:
    """Solve A x = b exactly.

    Returns ("ok", x) for a unique solution, ("inconsistent", None) when no
    solution exists, ("underdetermined", None) when solutions form a positive-
    dimensional family.
    """
    if not rows:
        if not ncols:
            return "ok", []
        return "underdetermined", None
    ncols = len(rows[0]) if ncols is None else ncols
    aug = [list(map(Fraction, r)) + [Fraction(b)] for r, b in zip(rows, rhs)]
    red, pivots = rref_exact(aug)
    if ncols in pivots:
        return "inconsistent", None
    if len(pivots) < ncols:
        return "underdetermined", None
    x = [Fraction(0)] * ncols
    for row, c in zip(red, pivots):
        x[c] = row[-1]
    return "ok", x


def invert_matrix(rows: Sequence[Sequence[RatLike]]) -> list[list[Fraction]]:
    """Exact inverse of a square matrix; raises ValueError when singular."""
    n = len(rows)
    aug = [
        [Fraction(x) for x in row] + [Fraction(1 if i == j else 0) for j in range(n)]
        for i, row in enumerate(rows)
    ]
    red, pivots = rref_exact(aug)
    if pivots != list(range(n)):
        raise ValueError("matrix is singular")
    return [row[n:] for row in red]
