"""Quadratic basis, quadratization of forms and the split of a constraint
pool into purely quadratic rows and rows led by non-quadratic monomials."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .constraints import Constraint, IntrinsicRelation, enumerate_monomials, intrinsic_constraints
from .diffalg import DiffForm, Monomial, make_monomial, monomial_key, _echelon_insert, _back_substitute


class BasisMismatch(ValueError):
    pass


class Step5Failure(RuntimeError):
    def __init__(self, monomials):
        super().__init__(f"{len(monomials)} non-quadratic monomial(s) survive elimination")
        self.monomials = monomials


@dataclass
class QuadBasis:
    elements: List[Monomial]
    n: int
    index: Dict[Monomial, int] = field(default_factory=dict)
    products: Dict[Monomial, Tuple[int, int]] = field(default_factory=dict)

    def __post_init__(self):
        self.index = {m: i for i, m in enumerate(self.elements)}
        # canonical factorization: lex-greatest left factor (smallest index), then right
        for i in range(len(self.elements)):
            for j in range(i, len(self.elements)):
                prod = make_monomial(self.elements[i] + self.elements[j])
                if prod not in self.products:
                    self.products[prod] = (i, j)

    def __len__(self):
        return len(self.elements)

    def __eq__(self, other):
        return isinstance(other, QuadBasis) and self.n == other.n and self.elements == other.elements

    def is_quadratic(self, mono: Monomial) -> bool:
        return mono in self.products


def quad_basis(m: int, n: int) -> QuadBasis:
    return QuadBasis(enumerate_monomials(n, m, m, 2 * m - 1), n)


class QuadraticForm:
    """Symmetric rational matrix over a quadratic basis; off-diagonal entries hold half coefficients."""

    __slots__ = ("basis", "entries")

    def __init__(self, basis: QuadBasis, entries: Optional[Dict[Tuple[int, int], Fraction]] = None):
        self.basis = basis
        # upper-triangular storage of the polynomial coefficient of m_i m_j (i <= j)
        self.entries: Dict[Tuple[int, int], Fraction] = {k: Fraction(v) for k, v in (entries or {}).items() if v}

    @classmethod
    def from_pairs(cls, basis, coeffs):
        return cls(basis, coeffs)

    def coeff(self, i: int, j: int) -> Fraction:
        if i > j:
            i, j = j, i
        return self.entries.get((i, j), Fraction(0))

    def matrix(self) -> List[List[Fraction]]:
        k = len(self.basis)
        G = [[Fraction(0)] * k for _ in range(k)]
        for (i, j), c in self.entries.items():
            if i == j:
                G[i][i] += c
            else:
                G[i][j] += c / 2
                G[j][i] += c / 2
        return G

    def array(self) -> np.ndarray:
        k = len(self.basis)
        A = np.zeros((k, k))
        for (i, j), c in self.entries.items():
            if i == j:
                A[i, i] += float(c)
            else:
                A[i, j] += float(c) / 2
                A[j, i] += float(c) / 2
        return A

    @classmethod
    def from_matrix(cls, basis, G) -> "QuadraticForm":
        k = len(G)
        ent = {}
        for i in range(k):
            for j in range(i, k):
                v = G[i][j] if i == j else G[i][j] + G[j][i]
                if v:
                    ent[(i, j)] = Fraction(v)
        return cls(basis, ent)

    def __add__(self, other):
        self._check(other)
        ent = dict(self.entries)
        for k, v in other.entries.items():
            ent[k] = ent.get(k, 0) + v
        return QuadraticForm(self.basis, ent)

    def __sub__(self, other):
        return self + other.scale(-1)

    def scale(self, c) -> "QuadraticForm":
        c = Fraction(c)
        return QuadraticForm(self.basis, {k: v * c for k, v in self.entries.items()})

    def _check(self, other):
        if self.basis is not other.basis and self.basis != other.basis:
            raise BasisMismatch("quadratic forms over different bases")

    def __eq__(self, other):
        return isinstance(other, QuadraticForm) and self.entries == other.entries and self.basis == other.basis

    def __bool__(self):
        return bool(self.entries)

    def to_diffform(self) -> DiffForm:
        out: Dict[Monomial, Fraction] = {}
        el = self.basis.elements
        for (i, j), c in self.entries.items():
            mono = make_monomial(el[i] + el[j])
            out[mono] = out.get(mono, 0) + c
        return DiffForm(self.basis.n, out)

    def __repr__(self):
        return f"QuadraticForm({len(self.entries)} entries over {len(self.basis)} vars)"

    def pretty(self) -> str:
        parts = []
        for (i, j), c in sorted(self.entries.items()):
            term = f"m{i + 1}^2" if i == j else f"m{i + 1}*m{j + 1}"
            parts.append(f"{c}*{term}")
        return " + ".join(parts).replace("+ -", "- ") or "0"


def intrinsic_form(rel: IntrinsicRelation, basis: QuadBasis) -> QuadraticForm:
    ent = {rel.left: Fraction(1)}
    ent[rel.right] = ent.get(rel.right, 0) - 1
    return QuadraticForm(basis, ent)


def quadratize(form: DiffForm, basis: QuadBasis) -> Tuple[QuadraticForm, DiffForm]:
    """Split a form into its canonical quadratic part and the non-quadratic residual."""
    ent: Dict[Tuple[int, int], Fraction] = {}
    res: Dict[Monomial, Fraction] = {}
    for mono, c in form.terms.items():
        pr = basis.products.get(mono)
        if pr is None:
            res[mono] = c
        else:
            ent[pr] = c
    return QuadraticForm(basis, ent), DiffForm.from_terms(form.n, res)


def layered_key(basis: QuadBasis):
    """Non-quadratic monomials rank above every quadratic one; the monomial order breaks ties."""
    prods = basis.products

    def key(mono):
        return (0 if mono in prods else 1, monomial_key(mono))

    return key


@dataclass
class SplitSuite:
    basis: QuadBasis
    quadratic: List[QuadraticForm]          # reduced quadratic rows (rank-revealing)
    nonquadratic: List[DiffForm]            # rows led by a non-quadratic monomial
    intrinsic: List[IntrinsicRelation]     # every pair-of-pairs relation
    quadratic_rows_sequential: int = 0      # purely quadratic rows met by pivoting only on non-quadratic columns
    n_input: int = 0

    @property
    def intrinsic_spanning(self) -> List[IntrinsicRelation]:
        """An independent subset spanning the same relations (g-1 per product)."""
        return intrinsic_constraints(self.basis.elements, prune=True)

    @property
    def hat_rows(self) -> List[QuadraticForm]:
        """The quadratic rows handed to the SDP: reduced C1 plus a spanning set of intrinsics."""
        return self.quadratic + [intrinsic_form(r, self.basis) for r in self.intrinsic_spanning]

    @property
    def independent_count(self) -> int:
        return quadratic_rank(self.hat_rows)


def split_suite(constraints: Sequence, basis: QuadBasis, with_intrinsic: bool = True) -> SplitSuite:
    """Gaussian elimination under the layered order, then the C1/C2 split."""
    forms = [c.form if isinstance(c, Constraint) else c for c in constraints]
    key = layered_key(basis)
    pivots: Dict[Monomial, Dict] = {}
    for f in forms:
        _echelon_insert(dict(f.terms), pivots, key)
    _back_substitute(pivots, key)
    leads = sorted(pivots, key=key, reverse=True)
    quad, nonquad = [], []
    for lead in leads:
        row = DiffForm.from_terms(basis.n, pivots[lead])
        if basis.is_quadratic(lead):
            q, r = quadratize(row, basis)
            assert not r
            quad.append(q)
        else:
            nonquad.append(row)
    intr = intrinsic_constraints(basis.elements) if with_intrinsic else []
    seq = sequential_quadratic_count(forms, basis)
    return SplitSuite(basis, quad, nonquad, intr, seq, len(forms))


def sequential_quadratic_count(forms: Sequence[DiffForm], basis: QuadBasis) -> int:
    """Rows that end up purely quadratic when only non-quadratic monomials are
    used as pivots, counted up to scalar multiples (quadratic columns are never
    eliminated, so these rows need not be independent)."""
    key = layered_key(basis)
    prods = basis.products
    pivots: Dict[Monomial, Dict] = {}
    seen = set()
    count = 0
    for f in forms:
        row = dict(f.terms)
        while True:
            nq = [mo for mo in row if mo not in prods]
            if not nq:
                break
            lead = max(nq, key=key)
            piv = pivots.get(lead)
            if piv is None:
                c = row[lead]
                pivots[lead] = {mo: v / c for mo, v in row.items()}
                row = None
                break
            c = row[lead]
            for pm, pc in piv.items():
                v = row.get(pm, 0) - c * pc
                if v:
                    row[pm] = v
                else:
                    row.pop(pm, None)
        if row:
            k = DiffForm(basis.n, row).normalized()
            if k not in seen:
                seen.add(k)
                count += 1
    return count


def eliminate_target(target: DiffForm, split: SplitSuite) -> Tuple[QuadraticForm, List[Fraction]]:
    """Remove non-quadratic monomials of the target with the C2 rows.

    Returns (Ê, coefficients over split.nonquadratic) with
    target = Ê + Σ coef_i · nonquadratic_i exactly.
    """
    key = layered_key(split.basis)
    rows = split.nonquadratic
    leads = {max(r.terms, key=key): i for i, r in enumerate(rows)}
    coef = [Fraction(0)] * len(rows)
    cur = dict(target.terms)
    prods = split.basis.products
    while True:
        nq = [mo for mo in cur if mo not in prods]
        if not nq:
            break
        lead = max(nq, key=key)
        idx = leads.get(lead)
        if idx is None:
            raise Step5Failure(sorted(nq, key=monomial_key, reverse=True))
        row = rows[idx].terms
        c = cur[lead] / row[lead]
        coef[idx] += c
        for mo, v in row.items():
            w = cur.get(mo, 0) - c * v
            if w:
                cur[mo] = w
            else:
                cur.pop(mo, None)
    q, r = quadratize(DiffForm.from_terms(target.n, cur), split.basis)
    assert not r
    return q, coef


def quadratic_rank(forms: Sequence[QuadraticForm]) -> int:
    """Rank over Q of quadratic forms viewed as vectors of upper-triangular coefficients."""
    pivots: Dict = {}
    for q in forms:
        _echelon_insert({k: v for k, v in q.entries.items()}, pivots, lambda k: (-k[0], -k[1]))
    return len(pivots)
