"""Correlator oracles.

Built-in exact engines for psi-class intersection numbers (seeded by the two
base values and closed by the string equation, the dilaton equation, and a
genus-reducing recursion), the genus-zero closed form, lambda-class product
reduction, and the lambda_{g-1}^3 evaluation.  External data arrives as
JSON-lines correlator tables covering CohFT, observable, DR-type, and
F-CohFT correlators; tables canonicalize keys under simultaneous permutation
and reject schema violations.
"""

from __future__ import annotations

import json
import threading
from fractions import Fraction
from math import factorial
from typing import Mapping, Sequence

from .diffpoly import MetricEta
from .exactnum import (
    RatLike,
    bernoulli_number,
    double_factorial,
    multinomial,
    rat_from_str,
    rat_to_str,
)

F = Fraction


class TableRequired(Exception):
    """A correlator key needs table data that was not supplied."""


# ---------------------------------------------------------------------------
# psi intersection numbers, trivial CohFT
# ---------------------------------------------------------------------------

_psi_cache: dict[tuple, Fraction] = {}
_psi_lock = threading.Lock()


def psi_correlator(g: int, d: Sequence[int]) -> Fraction:
    """<tau_{d_1} ... tau_{d_n}>_g, exact.

    Zero off the dimension constraint sum(d) = 3g-3+n.  Seeded by
    <tau_0^3>_0 = 1 and <tau_1>_1 = 1/24, reduced by the string and dilaton
    equations, and closed by the genus-reducing recursion on the largest
    exponent.
    """
    exps = tuple(sorted(int(x) for x in d))
    n = len(exps)
    if g < 0 or any(x < 0 for x in exps):
        raise ValueError("genus and exponents must be nonnegative")
    if 2 * g - 2 + n <= 0:
        raise ValueError(f"unstable pair (g,n) = ({g},{n})")
    return _psi(g, exps)


def _psi(g: int, exps: tuple[int, ...]) -> Fraction:
    key = (g, exps)
    hit = _psi_cache.get(key)
    if hit is not None:
        return hit
    n = len(exps)
    if sum(exps) != 3 * g - 3 + n:
        val = F(0)
    elif key == (0, (0, 0, 0)):
        val = F(1)
    elif key == (1, (1,)):
        val = F(1, 24)
    elif exps[0] == 0:
        rest = exps[1:]
        val = F(0)
        for j in range(len(rest)):
            if rest[j] >= 1:
                val += _psi(g, tuple(sorted(rest[:j] + (rest[j] - 1,) + rest[j + 1:])))
    elif exps[0] == 1:
        val = (2 * g - 2 + n - 1) * _psi(g, exps[1:])
    else:
        val = _dvv(g, exps)
    with _psi_lock:
        _psi_cache[key] = val
    return val


def _dvv(g: int, exps: tuple[int, ...]) -> Fraction:
    """Recursion on the largest exponent; all exponents here are >= 2."""
    k = exps[-1] - 1
    sigma = exps[:-1]
    total = F(0)
    for j in range(len(sigma)):
        dj = sigma[j]
        rest = sigma[:j] + sigma[j + 1:]
        coeff = F(double_factorial(2 * (k + dj) + 1), double_factorial(2 * dj - 1))
        total += coeff * _psi(g, tuple(sorted(rest + (k + dj,))))
    for a in range(k):
        b = k - 1 - a
        w = F(double_factorial(2 * a + 1) * double_factorial(2 * b + 1), 2)
        if g >= 1 and 2 * (g - 1) - 2 + len(sigma) + 2 > 0:
            total += w * _psi(g - 1, tuple(sorted(sigma + (a, b))))
        for g1 in range(g + 1):
            g2 = g - g1
            for mask in range(1 << len(sigma)):
                part1 = [sigma[i] for i in range(len(sigma)) if mask >> i & 1]
                part2 = [sigma[i] for i in range(len(sigma)) if not mask >> i & 1]
                if 2 * g1 - 2 + len(part1) + 1 <= 0 or 2 * g2 - 2 + len(part2) + 1 <= 0:
                    continue
                total += w * _psi(g1, tuple(sorted(part1 + [a]))) * _psi(
                    g2, tuple(sorted(part2 + [b]))
                )
    return total / double_factorial(2 * k + 3)


def psi_correlator_genus0(d: Sequence[int]) -> Fraction:
    """Closed form (n-3)! / prod(d_i!) on the dimension constraint."""
    exps = [int(x) for x in d]
    n = len(exps)
    if n < 3 or any(x < 0 for x in exps):
        raise ValueError("need n >= 3 nonnegative exponents")
    if sum(exps) != n - 3:
        raise ValueError("exponents must sum to n - 3")
    val = F(factorial(n - 3))
    for x in exps:
        val /= factorial(x)
    return val


# ---------------------------------------------------------------------------
# lambda-class facts
# ---------------------------------------------------------------------------


def hodge_reduce(lambda_indices: Sequence[int], g: int) -> dict[tuple[int, ...], Fraction]:
    """Rewrite a product of lambda classes to square-free normal form.

    Uses lambda_m^2 = 2 sum_{s>=1} (-1)^{s+1} lambda_{m+s} lambda_{m-s}
    (with lambda_0 = 1, lambda_{>g} = 0, so in particular lambda_g^2 = 0)
    until no index repeats.  Returns a map from descending index tuples to
    coefficients; the empty map is zero.
    """
    idx = tuple(sorted((int(i) for i in lambda_indices), reverse=True))
    if any(i < 1 or i > g for i in idx):
        raise ValueError("lambda indices must lie in 1..g")
    work: dict[tuple[int, ...], Fraction] = {idx: F(1)}
    done: dict[tuple[int, ...], Fraction] = {}
    while work:
        mono, c = work.popitem()
        rep = next((mono[i] for i in range(len(mono) - 1) if mono[i] == mono[i + 1]), None)
        if rep is None:
            done[mono] = done.get(mono, F(0)) + c
            continue
        rest = list(mono)
        rest.remove(rep)
        rest.remove(rep)
        for s in range(1, min(g - rep, rep) + 1):
            lo = rep - s
            new = rest + [rep + s] + ([lo] if lo >= 1 else [])
            key = tuple(sorted(new, reverse=True))
            coeff = 2 * c * (1 if s % 2 == 1 else -1)
            work[key] = work.get(key, F(0)) + coeff
            if work[key] == 0:
                del work[key]
    return {k: v for k, v in done.items() if v != 0}


def lambda_top_triple(g: int) -> Fraction:
    """Integral of lambda_{g-1}^3 over the moduli of genus-g curves:
    |B_{2g}| |B_{2g-2}| / (2g (2g-2) (2g-2)!)."""
    if g < 2:
        raise ValueError("defined for g >= 2")
    num = abs(bernoulli_number(2 * g)) * abs(bernoulli_number(2 * g - 2))
    return num / (2 * g * (2 * g - 2) * factorial(2 * g - 2))


# ---------------------------------------------------------------------------
# Correlator tables
# ---------------------------------------------------------------------------

KINDS = ("cohft_psi", "obs_O", "dr_D", "fcohft_psi")

_CLASS_FIELDS = {
    "plain": {"tag"},
    "lambda_insertion": {"tag", "lambdas"},
    "dr_d": {"tag", "a"},
    "obs_o": {"tag", "a", "b"},
}

_KIND_TAGS = {
    "cohft_psi": ("plain", "lambda_insertion"),
    "obs_O": ("obs_o",),
    "dr_D": ("dr_d",),
    "fcohft_psi": ("plain",),
}

PLAIN = {"tag": "plain"}


class CorrelatorTable:
    """Validated correlator data keyed by canonical (permutation-sorted) keys.

    ``complete`` lists (g, total marked points) pairs for which absent keys
    mean zero; other absent keys raise TableRequired.  A trivial cohft_psi
    table delegates plain correlators to psi_correlator.
    """

    __slots__ = ("kind", "N", "eta", "complete", "trivial", "degree_bounds", "entries", "provenance")

    def __init__(
        self,
        kind: str,
        N: int,
        eta,
        complete: Sequence[Sequence[int]] = (),
        trivial: bool = False,
        degree_bounds: Mapping[tuple[int, int], int] | None = None,
        provenance: str = "",
    ):
        if kind not in KINDS:
            raise ValueError(f"unknown table kind {kind!r}")
        if N < 1:
            raise ValueError("N must be positive")
        self.kind = kind
        self.N = N
        self.eta = eta if isinstance(eta, MetricEta) else MetricEta(eta)
        if self.eta.n != N:
            raise ValueError("eta size does not match N")
        comp = set()
        for pair in complete:
            g, n = int(pair[0]), int(pair[1])
            if 2 * g - 2 + n <= 0:
                raise ValueError(f"degenerate completeness pair ({g},{n})")
            comp.add((g, n))
        self.complete = frozenset(comp)
        if trivial:
            if kind != "cohft_psi":
                raise ValueError("trivial flag only applies to cohft_psi tables")
            if N != 1 or self.eta.rows != ((F(1),),):
                raise ValueError("trivial tables have N = 1 and eta = [[1]]")
        self.trivial = bool(trivial)
        self.degree_bounds = dict(degree_bounds or {})
        self.entries: dict[tuple, Fraction] = {}
        self.provenance = provenance

    @classmethod
    def trivial_table(cls) -> "CorrelatorTable":
        return cls("cohft_psi", 1, [[1]], trivial=True)

    # -- keys ----------------------------------------------------------------

    def _normalize(self, g: int, fields, psi, cls_) -> tuple:
        n = len(fields)
        if len(psi) != n:
            raise ValueError("fields and psi lengths differ")
        if n == 0 or 2 * g - 2 + n <= 0 or g < 0:
            raise ValueError(f"degenerate key (g, slots) = ({g},{n})")
        fields = tuple(int(a) for a in fields)
        psi = tuple(int(x) for x in psi)
        if any(not 1 <= a <= self.N for a in fields):
            raise ValueError("field index out of range")
        if any(x < 0 for x in psi):
            raise ValueError("negative psi exponent")
        if not isinstance(cls_, Mapping) or "tag" not in cls_:
            raise ValueError("class must be a mapping with a tag")
        tag = cls_["tag"]
        if tag not in _CLASS_FIELDS or set(cls_) != _CLASS_FIELDS[tag]:
            raise ValueError(f"bad class fields for tag {tag!r}")
        if tag not in _KIND_TAGS[self.kind]:
            raise ValueError(f"class tag {tag!r} not allowed in a {self.kind} table")
        if tag == "plain":
            if self.kind == "fcohft_psi":
                return ("fplain", g, (fields[0], psi[0]), tuple(sorted(zip(fields[1:], psi[1:]))))
            return ("plain", g, tuple(sorted(zip(fields, psi))))
        if tag == "lambda_insertion":
            lams = tuple(sorted(int(j) for j in cls_["lambdas"]))
            if any(not 1 <= j <= g for j in lams):
                raise ValueError("lambda index out of range")
            return ("lambda", g, tuple(sorted(zip(fields, psi))), lams)
        if tag == "dr_d":
            a = tuple(int(x) for x in cls_["a"])
            if len(a) != n - 1 or any(x < 0 for x in a):
                raise ValueError("dr_d needs one nonnegative a-exponent per regular slot")
            regular = tuple(sorted(zip(fields[:-1], psi[:-1], a)))
            return ("dr_d", g, regular, (fields[-1], psi[-1]))
        a = tuple(int(x) for x in cls_["a"])
        b = tuple(int(x) for x in cls_["b"])
        if len(a) + len(b) != n or any(x < 0 for x in a + b):
            raise ValueError("obs_o exponent lists must cover all slots")
        na = len(a)
        regular = tuple(sorted(zip(fields[:na], psi[:na], a)))
        frozen = tuple(zip(fields[na:], psi[na:], b))
        return ("obs_o", g, regular, frozen)

    # -- building ------------------------------------------------------------

    def add_entry(self, g: int, fields, psi, cls_, value: RatLike):
        key = self._normalize(g, fields, psi, cls_)
        value = F(value)
        old = self.entries.get(key)
        if old is not None and old != value:
            raise ValueError(f"symmetry inconsistency at canonical key {key}")
        self.entries[key] = value

    # -- lookup ----------------------------------------------------------------

    def value(self, g: int, fields, psi, cls_=None) -> Fraction:
        cls_ = PLAIN if cls_ is None else cls_
        key = self._normalize(g, fields, psi, cls_)
        if self.trivial and key[0] == "plain":
            return psi_correlator(g, psi)
        hit = self.entries.get(key)
        if hit is not None:
            return hit
        if (g, len(fields)) in self.complete:
            return F(0)
        raise TableRequired(f"table required: no entry for {key}")

    def correlator(self, g: int, fields, psi) -> Fraction:
        return self.value(g, fields, psi, PLAIN)

    def covers(self, g: int, nslots: int) -> bool:
        return (g, nslots) in self.complete

    def iter_entries(self):
        return iter(sorted(self.entries.items()))

    # -- serialization ---------------------------------------------------------

    def header_obj(self) -> dict:
        out = {
            "kind": self.kind,
            "N": self.N,
            "eta": self.eta.to_obj(),
            "complete": [list(p) for p in sorted(self.complete)],
            "trivial": self.trivial,
        }
        if self.degree_bounds:
            out["degree_bounds"] = [
                [g, n, bound] for (g, n), bound in sorted(self.degree_bounds.items())
            ]
        return out

    def _entry_obj(self, key: tuple, value: Fraction) -> dict:
        tag = key[0]
        if tag == "plain":
            _, g, slots = key
            fields, psi = zip(*slots) if slots else ((), ())
            cls_: dict = {"tag": "plain"}
        elif tag == "fplain":
            _, g, zeroth, rest = key
            fields = (zeroth[0],) + tuple(a for a, _ in rest)
            psi = (zeroth[1],) + tuple(d for _, d in rest)
            cls_ = {"tag": "plain"}
        elif tag == "lambda":
            _, g, slots, lams = key
            fields, psi = zip(*slots)
            cls_ = {"tag": "lambda_insertion", "lambdas": list(lams)}
        elif tag == "dr_d":
            _, g, regular, special = key
            fields = tuple(a for a, _, _ in regular) + (special[0],)
            psi = tuple(d for _, d, _ in regular) + (special[1],)
            cls_ = {"tag": "dr_d", "a": [k for _, _, k in regular]}
        else:
            _, g, regular, frozen = key
            fields = tuple(a for a, _, _ in regular) + tuple(a for a, _, _ in frozen)
            psi = tuple(d for _, d, _ in regular) + tuple(d for _, d, _ in frozen)
            cls_ = {"tag": "obs_o", "a": [k for _, _, k in regular], "b": [k for _, _, k in frozen]}
        return {
            "g": g,
            "fields": list(fields),
            "psi": list(psi),
            "class": cls_,
            "value": rat_to_str(value),
        }

    def to_lines(self) -> list[str]:
        lines = [json.dumps(self.header_obj(), sort_keys=True)]
        for key, value in self.iter_entries():
            lines.append(json.dumps(self._entry_obj(key, value), sort_keys=True))
        return lines


_HEADER_REQUIRED = {"kind", "N", "eta", "complete", "trivial"}
_HEADER_OPTIONAL = {"degree_bounds"}
_ENTRY_FIELDS = {"g", "fields", "psi", "class", "value"}


def parse_table(lines: Sequence[str], kind: str, provenance: str = "") -> CorrelatorTable:
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise ValueError("empty table")
    header = json.loads(lines[0])
    extra = set(header) - _HEADER_REQUIRED - _HEADER_OPTIONAL
    missing = _HEADER_REQUIRED - set(header)
    if extra or missing:
        raise ValueError(f"bad header fields: extra {sorted(extra)}, missing {sorted(missing)}")
    if header["kind"] != kind:
        raise ValueError(f"expected kind {kind!r}, file says {header['kind']!r}")
    bounds = {}
    for item in header.get("degree_bounds", []):
        g, n, bound = item
        bounds[(int(g), int(n))] = int(bound)
    table = CorrelatorTable(
        kind,
        int(header["N"]),
        MetricEta.from_obj(header["eta"]),
        header["complete"],
        header["trivial"],
        bounds,
        provenance,
    )
    for ln in lines[1:]:
        entry = json.loads(ln)
        if set(entry) != _ENTRY_FIELDS:
            raise ValueError(f"bad entry fields: {sorted(entry)}")
        table.add_entry(
            entry["g"], entry["fields"], entry["psi"], entry["class"], rat_from_str(entry["value"])
        )
    return table


def load_table(path, kind: str) -> CorrelatorTable:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_table(fh.readlines(), kind, provenance=str(path))


# ---------------------------------------------------------------------------
# DR-type correlators
# ---------------------------------------------------------------------------


def dr_correlator(
    g: int,
    fields: Sequence[int],
    psi: Sequence[int],
    mono: Sequence[int],
    table: CorrelatorTable | None = None,
    cohft: CorrelatorTable | None = None,
) -> Fraction:
    """Coefficient of the a-monomial in the integrated D-class correlator.

    Slots are the n regular points followed by the special point.  Genus 0 is
    built in: the class is a geometric series in the total a-weight times the
    special psi class, so the coefficient of a monomial of total degree K is
    -(-1)^K multinomial(K; mono) times the plain correlator with the special
    psi exponent raised by K.  Higher genus requires a dr_D table.
    """
    n = len(mono)
    if len(fields) != n + 1 or len(psi) != n + 1:
        raise ValueError("need one field and psi exponent per slot, special last")
    if any(int(k) < 0 for k in mono):
        raise ValueError("negative monomial exponent")
    if g == 0:
        pc = cohft if cohft is not None else TRIVIAL_COHFT
        k_total = sum(int(k) for k in mono)
        shifted = list(psi[:-1]) + [psi[-1] + k_total]
        sign = -1 if k_total % 2 == 0 else 1
        return sign * multinomial(k_total, [int(k) for k in mono]) * pc.correlator(
            0, fields, shifted
        )
    if table is None:
        raise TableRequired("table required: DR data for genus >= 1")
    return table.value(g, fields, psi, {"tag": "dr_d", "a": list(mono)})


def a1_correlator(
    g: int,
    fields: Sequence[int],
    psi: Sequence[int],
    mono: Sequence[int],
    table: CorrelatorTable | None = None,
    cohft: CorrelatorTable | None = None,
) -> Fraction:
    """Coefficient of the a-monomial in the integrated A^1-class correlator.

    Slots are the n regular points followed by the special point.  Genus 0 is
    built in: the class is the product over regular slots of 1/(1 - a_i psi_i),
    so the coefficient of prod a_i^{k_i} is the plain correlator with each
    regular psi exponent raised by k_i.  Higher genus requires a table of the
    dr_D kind holding the A^1 expansion coefficients.
    """
    n = len(mono)
    if len(fields) != n + 1 or len(psi) != n + 1:
        raise ValueError("need one field and psi exponent per slot, special last")
    if any(int(k) < 0 for k in mono):
        raise ValueError("negative monomial exponent")
    if g == 0:
        pc = cohft if cohft is not None else TRIVIAL_COHFT
        shifted = [psi[i] + int(mono[i]) for i in range(n)] + [psi[-1]]
        return pc.correlator(0, fields, shifted)
    if table is None:
        raise TableRequired("table required: A^1 data for genus >= 1")
    return table.value(g, fields, psi, {"tag": "dr_d", "a": list(mono)})


TRIVIAL_COHFT = CorrelatorTable.trivial_table()
