"""Exact differential polynomials in p_t and its spatial derivatives.

A derivative of p_t is a multi-index ``(h_1, ..., h_n)``; ``(0, ..., 0)`` is
p_t itself.  A monomial is a tuple of ``(derivative, exponent)`` pairs sorted
descending under :func:`compare_derivatives`.  A :class:`DiffForm` is a finite
``Fraction``-weighted sum of monomials in a fixed dimension ``n``.

Derivatives are ranked by order first and then reverse-lexicographically on
the multi-index (the last coordinate is compared first).  Monomials compare by their exponent vectors
over the union of their factors, scanned from the largest derivative down.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

Derivative = Tuple[int, ...]
Monomial = Tuple[Tuple[Derivative, int], ...]

__all__ = [
    "Derivative",
    "Monomial",
    "DiffForm",
    "DimensionError",
    "ParseError",
    "compare_derivatives",
    "compare_monomials",
    "monomial_key",
    "make_monomial",
    "mono_mul",
    "mono_degree",
    "mono_total_order",
    "mono_max_order",
    "differentiate",
    "heat_time_derivative",
    "gaussian_eliminate",
    "reduce_against",
    "derivative",
    "p_power",
]


class DimensionError(ValueError):
    pass


class ParseError(ValueError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"line {line}, col {col}: {msg}")
        self.line = line
        self.col = col


def _dkey(d: Derivative) -> Tuple[int, ...]:
    return (sum(d),) + d[::-1]


def compare_derivatives(v1: Derivative, v2: Derivative) -> int:
    """Return -1, 0 or 1.

    Higher order wins; between equal orders the last coordinate where the
    multi-indices differ decides.
    """
    if len(v1) != len(v2):
        raise DimensionError(f"dimension mismatch: {len(v1)} vs {len(v2)}")
    k1, k2 = _dkey(v1), _dkey(v2)
    return (k1 > k2) - (k1 < k2)


def monomial_key(m: Monomial) -> tuple:
    """Sort key realising the monomial order (larger key = larger monomial).

    Factors are already stored largest-first, so comparing the sequences of
    ``(derivative key, exponent)`` pairs lexicographically is exactly the
    exponent comparison from the largest shared derivative down; a missing
    derivative counts as exponent 0, which the tuple comparison reproduces.
    """
    return tuple((_dkey(d), e) for d, e in m)


def compare_monomials(m1: Monomial, m2: Monomial) -> int:
    if m1 and m2 and len(m1[0][0]) != len(m2[0][0]):
        raise DimensionError("dimension mismatch between monomials")
    k1, k2 = monomial_key(m1), monomial_key(m2)
    return (k1 > k2) - (k1 < k2)


def make_monomial(factors: Iterable[Tuple[Derivative, int]]) -> Monomial:
    acc: Dict[Derivative, int] = {}
    for d, e in factors:
        if e:
            acc[d] = acc.get(d, 0) + e
    return tuple(sorted(((d, e) for d, e in acc.items() if e), key=lambda t: _dkey(t[0]), reverse=True))


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    return make_monomial(a + b)


def mono_degree(m: Monomial) -> int:
    return sum(e for _, e in m)


def mono_total_order(m: Monomial) -> int:
    return sum(e * sum(d) for d, e in m)


def mono_max_order(m: Monomial) -> int:
    return max((sum(d) for d, _ in m), default=0)


def derivative(n: int, *coords: int) -> Derivative:
    """Multi-index of ∂^k p / ∂x_{c1} ... ∂x_{ck} (1-based coordinates)."""
    h = [0] * n
    for c in coords:
        h[c - 1] += 1
    return tuple(h)


def p_power(n: int, k: int) -> Monomial:
    return (((0,) * n, k),) if k else ()


class DiffForm:
    """Rational linear combination of monomials over derivatives of p_t."""

    __slots__ = ("n", "terms", "_hash")

    def __init__(self, n: int, terms: Optional[Mapping[Monomial, object]] = None):
        self.n = n
        clean: Dict[Monomial, Fraction] = {}
        if terms:
            for m, c in terms.items():
                c = Fraction(c)
                if c:
                    clean[m] = clean.get(m, Fraction(0)) + c
        self.terms: Dict[Monomial, Fraction] = {m: c for m, c in clean.items() if c}
        self._hash = None

    # -- constructors -------------------------------------------------------
    @classmethod
    def zero(cls, n: int) -> "DiffForm":
        return cls(n)

    @classmethod
    def monomial(cls, n: int, mono: Monomial, coef=1) -> "DiffForm":
        return cls(n, {mono: coef})

    @classmethod
    def var(cls, d: Derivative) -> "DiffForm":
        return cls(len(d), {((d, 1),): 1})

    @classmethod
    def p(cls, n: int) -> "DiffForm":
        return cls.var((0,) * n)

    @classmethod
    def from_terms(cls, n: int, terms: Dict[Monomial, Fraction]) -> "DiffForm":
        """Trusted constructor: terms must be canonical with no zero entries."""
        f = cls.__new__(cls)
        f.n = n
        f.terms = terms
        f._hash = None
        return f

    # -- arithmetic ---------------------------------------------------------
    def _check(self, other: "DiffForm"):
        if self.n != other.n:
            raise DimensionError(f"dimension mismatch: {self.n} vs {other.n}")

    def __add__(self, other):
        if not isinstance(other, DiffForm):
            return NotImplemented
        self._check(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            v = out.get(m, 0) + c
            if v:
                out[m] = v
            else:
                out.pop(m, None)
        return DiffForm.from_terms(self.n, out)

    def __neg__(self):
        return DiffForm.from_terms(self.n, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, DiffForm):
            return NotImplemented
        return self + (-other)

    def scale(self, c) -> "DiffForm":
        c = Fraction(c)
        if not c:
            return DiffForm(self.n)
        return DiffForm.from_terms(self.n, {m: v * c for m, v in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, DiffForm):
            self._check(other)
            out: Dict[Monomial, Fraction] = {}
            for m1, c1 in self.terms.items():
                for m2, c2 in other.terms.items():
                    m = mono_mul(m1, m2)
                    out[m] = out.get(m, 0) + c1 * c2
            return DiffForm.from_terms(self.n, {m: c for m, c in out.items() if c})
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        return NotImplemented

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = DiffForm(self.n, {(): 1})
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, DiffForm):
            return NotImplemented
        return self.n == other.n and self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.n, frozenset(self.terms.items())))
        return self._hash

    def __bool__(self):
        return bool(self.terms)

    def __len__(self):
        return len(self.terms)

    def __iter__(self) -> Iterator[Tuple[Monomial, Fraction]]:
        return iter(self.sorted_terms())

    def __repr__(self):
        return f"DiffForm(n={self.n}, terms={len(self.terms)})"

    # -- structure ----------------------------------------------------------
    def sorted_terms(self) -> List[Tuple[Monomial, Fraction]]:
        return sorted(self.terms.items(), key=lambda t: monomial_key(t[0]), reverse=True)

    def leading(self) -> Tuple[Monomial, Fraction]:
        m = max(self.terms, key=monomial_key)
        return m, self.terms[m]

    def is_homogeneous(self, degree: int, total_order: int) -> bool:
        return all(mono_degree(m) == degree and mono_total_order(m) == total_order for m in self.terms)

    def is_differential_form(self, k: int) -> bool:
        return self.is_homogeneous(k, k)

    def gradings(self) -> set:
        return {(mono_degree(m), mono_total_order(m)) for m in self.terms}

    def max_order(self) -> int:
        return max((mono_max_order(m) for m in self.terms), default=0)

    def normalized(self) -> "DiffForm":
        """Scale so the leading coefficient is 1 (zero stays zero)."""
        if not self.terms:
            return self
        _, c = self.leading()
        return self.scale(1 / c)

    def substitute(self, mapping: Sequence[int], n: int) -> "DiffForm":
        """Rename coordinates: coordinate i (0-based) goes to ``mapping[i]`` in dimension n.

        Several source coordinates may land on the same target, which is how
        symbolic-index families are instantiated over concrete index tuples.
        """
        out: Dict[Monomial, Fraction] = {}
        cache: Dict[Derivative, Derivative] = {}
        for m, c in self.terms.items():
            factors = []
            for d, e in m:
                nd = cache.get(d)
                if nd is None:
                    h = [0] * n
                    for i, k in enumerate(d):
                        if k:
                            h[mapping[i]] += k
                    nd = cache[d] = tuple(h)
                factors.append((nd, e))
            nm = make_monomial(factors)
            out[nm] = out.get(nm, 0) + c
        return DiffForm.from_terms(n, {m: c for m, c in out.items() if c})

    # -- text format --------------------------------------------------------
    def to_text(self) -> str:
        lines = [f"dim {self.n}"]
        for m, c in self.sorted_terms():
            parts = [f"{c.numerator}/{c.denominator}"]
            for d, e in m:
                parts.append(f"d({','.join(map(str, d))})^{e}")
            lines.append(" * ".join(parts))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, first_line: int = 1) -> "DiffForm":
        lines = [ln for ln in text.splitlines()]
        n = None
        terms: Dict[Monomial, Fraction] = {}
        for i, raw in enumerate(lines):
            lineno = first_line + i
            ln = raw.strip()
            if not ln or ln.startswith("#"):
                continue
            if n is None:
                if not ln.startswith("dim "):
                    raise ParseError("expected 'dim N' header", lineno, 1)
                try:
                    n = int(ln[4:])
                except ValueError:
                    raise ParseError("bad dimension", lineno, 5) from None
                continue
            parts = [p.strip() for p in ln.split("*")]
            try:
                coef = Fraction(parts[0])
            except (ValueError, ZeroDivisionError):
                raise ParseError(f"bad coefficient {parts[0]!r}", lineno, 1) from None
            factors = []
            col = len(parts[0]) + 1
            for p in parts[1:]:
                if not (p.startswith("d(") and ")^" in p):
                    raise ParseError(f"bad factor {p!r}", lineno, col)
                idx, exp = p[2:].split(")^")
                try:
                    d = tuple(int(x) for x in idx.split(","))
                    e = int(exp)
                except ValueError:
                    raise ParseError(f"bad factor {p!r}", lineno, col) from None
                if len(d) != n or e <= 0 or min(d) < 0:
                    raise ParseError(f"factor {p!r} inconsistent with dim {n}", lineno, col)
                factors.append((d, e))
                col += len(p) + 3
            m = make_monomial(factors)
            terms[m] = terms.get(m, 0) + coef
        if n is None:
            raise ParseError("empty form", first_line, 1)
        return cls(n, terms)


# -- calculus ---------------------------------------------------------------

def _bump(d: Derivative, coord: int, k: int = 1) -> Derivative:
    h = list(d)
    h[coord] += k
    return tuple(h)


def _leibniz(form: DiffForm, rule: Callable[[Derivative], Dict[Derivative, Fraction]]) -> DiffForm:
    out: Dict[Monomial, Fraction] = {}
    for m, c in form.terms.items():
        for idx, (d, e) in enumerate(m):
            rest = list(m)
            if e == 1:
                del rest[idx]
            else:
                rest[idx] = (d, e - 1)
            for nd, w in rule(d).items():
                nm = make_monomial(rest + [(nd, 1)])
                out[nm] = out.get(nm, 0) + c * e * w
    return DiffForm.from_terms(form.n, {m: c for m, c in out.items() if c})


def differentiate(form: DiffForm, coord: int) -> DiffForm:
    """Exact ∂/∂x_coord (1-based) via the product rule."""
    if not 1 <= coord <= form.n:
        raise DimensionError(f"coordinate {coord} out of range for n={form.n}")
    i = coord - 1
    return _leibniz(form, lambda d: {_bump(d, i): Fraction(1)})


_HALF = Fraction(1, 2)


def heat_time_derivative(form: DiffForm) -> DiffForm:
    """d/dt under the heat equation: every factor v maps to ½ Σ_i ∂²v/∂x_i²."""
    n = form.n

    def rule(d: Derivative) -> Dict[Derivative, Fraction]:
        return {_bump(d, i, 2): _HALF for i in range(n)}

    return _leibniz(form, rule)


# -- linear algebra over monomials ----------------------------------------

Row = Dict[Monomial, Fraction]


def _lead(row: Row, key) -> Monomial:
    return max(row, key=key)


def reduce_against(row: Row, pivots: Dict[Monomial, Row], key=monomial_key) -> Row:
    """Fully reduce ``row`` by pivot rows (each with lead coefficient 1)."""
    row = dict(row)
    pending = sorted((m for m in row if m in pivots), key=key, reverse=True)
    while pending:
        m = pending.pop(0)
        c = row.get(m)
        if not c:
            continue
        for pm, pc in pivots[m].items():
            v = row.get(pm, 0) - c * pc
            if v:
                row[pm] = v
            else:
                row.pop(pm, None)
        pending = sorted((x for x in row if x in pivots), key=key, reverse=True)
    return row


def gaussian_eliminate(forms: Sequence[DiffForm], key=monomial_key, full: bool = True) -> List[DiffForm]:
    """Row-reduce the rational span of ``forms`` treating monomials as variables.

    Pivots are the leading monomials under ``key``; each output row has lead
    coefficient 1 and the rows come back with strictly decreasing leads.
    With ``full`` the result is the reduced echelon form.
    """
    if not forms:
        return []
    n = forms[0].n
    pivots: Dict[Monomial, Row] = {}
    for f in forms:
        if f.n != n:
            raise DimensionError("all forms must share a dimension")
        r = _echelon_insert(dict(f.terms), pivots, key)
    leads = sorted(pivots, key=key, reverse=True)
    if full:
        _back_substitute(pivots, key)
    return [DiffForm.from_terms(n, pivots[m]) for m in leads]


def _echelon_insert(row: Row, pivots: Dict[Monomial, Row], key) -> Optional[Monomial]:
    while row:
        lead = max(row, key=key)
        piv = pivots.get(lead)
        if piv is None:
            c = row[lead]
            if c != 1:
                inv = 1 / c
                row = {m: v * inv for m, v in row.items()}
            pivots[lead] = row
            return lead
        c = row[lead]
        for pm, pc in piv.items():
            v = row.get(pm, 0) - c * pc
            if v:
                row[pm] = v
            else:
                row.pop(pm, None)
    return None


def _back_substitute(pivots: Dict[Monomial, Row], key) -> None:
    # ascending leads: every row only needs rows with smaller leads, which are final
    for lead in sorted(pivots, key=key):
        row = pivots[lead]
        for m in sorted((x for x in row if x != lead and x in pivots), key=key, reverse=True):
            c = row.get(m)
            if not c:
                continue
            for pm, pc in pivots[m].items():
                v = row.get(pm, 0) - c * pc
                if v:
                    row[pm] = v
                else:
                    row.pop(pm, None)
