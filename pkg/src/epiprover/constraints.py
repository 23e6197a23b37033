"""Generators for m-th order constraints: integration by parts, divergence
identities, heat-flow lifts and intrinsic quadratic relations.

A constraint is a 2m-th order differential form R with
∫ R / p^{2m-1} dx = 0 for every admissible density.  Each generated
constraint carries a JSON-friendly provenance record from which
:func:`regenerate` rebuilds it exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .diffalg import (
    DiffForm,
    Derivative,
    Monomial,
    heat_time_derivative,
    differentiate,
    make_monomial,
    mono_max_order,
    monomial_key,
)
from .targets import half_laplacian_p

SUPPORTED = {(2, None), (3, 1), (3, 2), (3, 3), (3, 4), (4, 1), (4, 2), (5, 1)}


class UnsupportedProblem(ValueError):
    pass


class InadmissiblePivot(ValueError):
    pass


@dataclass(frozen=True)
class Constraint:
    form: DiffForm
    provenance: dict = field(compare=False, hash=False)
    m: int = 0


# -- enumeration --------------------------------------------------------------

@lru_cache(maxsize=None)
def derivatives_of_order(n: int, k: int) -> Tuple[Derivative, ...]:
    """All multi-indices of order k, largest first."""
    out = []
    for bars in itertools.combinations_with_replacement(range(n), k):
        h = [0] * n
        for b in bars:
            h[b] += 1
        out.append(tuple(h))
    out = sorted(set(out), key=lambda d: (sum(d),) + d[::-1], reverse=True)
    return tuple(out)


def _partitions(total: int, parts: int, max_part: int) -> Iterable[Tuple[int, ...]]:
    """Non-increasing tuples of positive ints with the given sum, at most ``parts`` long."""
    if total == 0:
        yield ()
        return
    if parts == 0:
        return
    for first in range(min(total, max_part), 0, -1):
        for rest in _partitions(total - first, parts - 1, first):
            yield (first,) + rest


def enumerate_monomials(n: int, degree: int, total_order: int, max_order: Optional[int] = None) -> List[Monomial]:
    """Every monomial with the given degree and total order, descending in the monomial order."""
    if max_order is None:
        max_order = total_order
    out = set()
    zero = (0,) * n
    for part in _partitions(total_order, degree, max_order):
        n_p = degree - len(part)
        groups = [(k, sum(1 for x in part if x == k)) for k in sorted(set(part), reverse=True)]
        choices = [list(itertools.combinations_with_replacement(derivatives_of_order(n, k), c)) for k, c in groups]
        for pick in itertools.product(*choices):
            factors = [(zero, n_p)] if n_p else []
            for tup in pick:
                factors.extend((d, 1) for d in tup)
            out.add(make_monomial(factors))
    return sorted(out, key=monomial_key, reverse=True)


def _mono_divide(m: Monomial, d: Derivative) -> Monomial:
    out = []
    found = False
    for f, e in m:
        if f == d and not found:
            found = True
            if e > 1:
                out.append((f, e - 1))
        else:
            out.append((f, e))
    if not found:
        raise InadmissiblePivot("pivot does not divide the monomial")
    return tuple(out)


def _mono_letters(m: Monomial) -> set:
    return {i for d, _ in m for i, k in enumerate(d) if k}


# -- type 1: integration by parts --------------------------------------------

def ibp_from_numerator(N: DiffForm, coord: int, m: int) -> DiffForm:
    """p^{2m-1} ∂_coord (N / p^{2m-1}) for N divisible by p."""
    n = N.n
    zero = (0,) * n
    quotient = {}
    for mono, c in N.terms.items():
        if not mono or mono[-1][0] != zero:
            raise InadmissiblePivot("numerator is not divisible by p")
        quotient[_mono_divide(mono, zero)] = c
    Np = DiffForm.from_terms(n, quotient)
    dp = DiffForm.var(tuple(1 if i == coord - 1 else 0 for i in range(n)))
    return differentiate(N, coord) - (Np * dp).scale(2 * m - 1)


def ibp_constraint(M: Monomial, pivot: Derivative, m: int, coord: Optional[int] = None) -> Constraint:
    """Constraint from integrating the pivot factor of M by parts along ``coord``.

    ``coord`` defaults to the last coordinate the pivot differentiates.
    """
    n = len(pivot)
    if sum(pivot) == 0:
        raise InadmissiblePivot("pivot has order 0")
    if coord is None:
        coord = max(i for i, k in enumerate(pivot) if k) + 1
    if pivot[coord - 1] == 0:
        raise InadmissiblePivot("pivot does not differentiate along coord")
    M1 = _mono_divide(M, pivot)
    lower = tuple(k - (1 if i == coord - 1 else 0) for i, k in enumerate(pivot))
    N = make_monomial(M1 + ((lower, 1),))
    R = ibp_from_numerator(DiffForm.monomial(n, N), coord, m)
    prov = {"type": "ibp", "m": m, "n": n, "M": mono_to_json(M), "pivot": list(pivot), "coord": coord}
    return Constraint(R, prov, m)


def ibp_constraints(m: int, n: int, max_letters: Optional[int] = None, keep_top_order: bool = False) -> List[Constraint]:
    """All admissible type-1 constraints at concrete n.

    One constraint per (monomial, pivot factor, pivot coordinate); constraints
    reaching derivative order 2m (outside the variable set of order m) are
    discarded.  With ``max_letters`` only monomials touching at most that
    many coordinates are used, which is what instantiating a symbolic-index
    family over that many letters produces.
    """
    out = []
    for M in enumerate_monomials(n, 2 * m, 2 * m, 2 * m - 1):
        if max_letters is not None and len(_mono_letters(M)) > max_letters:
            continue
        for d, _ in M:
            if sum(d) == 0:
                continue
            for j, k in enumerate(d):
                if not k:
                    continue
                c = ibp_constraint(M, d, m, j + 1)
                if keep_top_order or c.form.max_order() <= 2 * m - 1:
                    out.append(c)
    return out


# -- type 2: divergence identities -------------------------------------------

def _laplacian_power(n: int, i: int) -> DiffForm:
    """∇^{(2i)} p as a form."""
    out = DiffForm.p(n)
    for _ in range(i):
        acc = DiffForm(n)
        for a in range(1, n + 1):
            acc = acc + differentiate(differentiate(out, a), a)
        out = acc
    return out


def nabla_power(n: int, k: int):
    """∇^{(k)} p: a form for even k, a list of n component forms for odd k."""
    base = _laplacian_power(n, k // 2)
    if k % 2 == 0:
        return base
    return [differentiate(base, a) for a in range(1, n + 1)]


def _dot(u: Sequence[DiffForm], v: Sequence[DiffForm]) -> DiffForm:
    out = DiffForm(u[0].n)
    for x, y in zip(u, v):
        out = out + x * y
    return out


def _div_p(f: DiffForm) -> DiffForm:
    zero = (0,) * f.n
    out = {}
    for mono, c in f.terms.items():
        if not mono or mono[-1][0] != zero:
            raise InadmissiblePivot("expected a factor of p")
        out[_mono_divide(mono, zero)] = c
    return DiffForm.from_terms(f.n, out)


def _pairings(items: Tuple[int, ...]) -> List[Tuple[Tuple[int, int], ...]]:
    """Distinct perfect matchings of a multiset of odd powers, up to relabelling equal powers."""
    if not items:
        return [()]
    first, rest = items[0], items[1:]
    seen = set()
    out = []
    for i in range(len(rest)):
        if rest[i] in seen:
            continue
        seen.add(rest[i])
        for tail in _pairings(rest[:i] + rest[i + 1:]):
            out.append(((first, rest[i]),) + tail)
    canon = {tuple(sorted(tuple(sorted(pr, reverse=True)) for pr in m)) for m in out}
    return sorted(canon, reverse=True)


def _adjacent_pairing(odd: Tuple[int, ...]) -> Tuple[Tuple[int, int], ...]:
    """Pair the odd powers neighbour-to-neighbour in descending order."""
    odd = sorted(odd, reverse=True)
    return tuple((odd[i], odd[i + 1]) for i in range(0, len(odd), 2))


def nabla_signatures(m: int, all_pairings: bool = False) -> List[Tuple[Tuple[int, ...], Tuple[Tuple[int, int], ...]]]:
    """(powers, pairing) with Σk = 2m over 2m factors, k ≤ 2m-1.

    By default one pairing per power tuple (adjacent odd powers contracted);
    ``all_pairings`` enumerates every matching of the odd powers.
    """
    out = []
    for part in _partitions(2 * m, 2 * m, 2 * m - 1):
        powers = part + (0,) * (2 * m - len(part))
        odd = tuple(k for k in powers if k % 2)
        for pairing in (_pairings(odd) if all_pairings else [_adjacent_pairing(odd)]):
            out.append((powers, pairing))
    return out


def nabla_constraint(powers: Sequence[int], n: int, pairing: Optional[Sequence[Tuple[int, int]]] = None) -> Constraint:
    """Constraint from Q = Π ∇^{(k_i)} p by peeling the highest-order factor."""
    powers = tuple(sorted(powers, reverse=True))
    m2 = len(powers)
    if m2 % 2 or sum(powers) != m2:
        raise ValueError("powers must have 2m entries summing to 2m")
    m = m2 // 2
    if not any(powers):
        raise ValueError("all powers zero")
    odd = tuple(k for k in powers if k % 2)
    if len(odd) % 2:
        raise ValueError("Q is not a scalar")
    if pairing is None:
        pairing = _adjacent_pairing(odd)
    pairing = tuple(tuple(sorted(pr, reverse=True)) for pr in pairing)
    if sorted(k for pr in pairing for k in pr) != sorted(odd):
        raise ValueError("pairing does not match the odd powers")
    even = [k for k in powers if k % 2 == 0]
    o = powers[0]
    p = DiffForm.p(n)

    def scalar_product(evens, pairs) -> DiffForm:
        out = DiffForm(n, {(): 1})
        for k in evens:
            out = out * nabla_power(n, k)
        for a, b in pairs:
            out = out * _dot(nabla_power(n, a), nabla_power(n, b))
        return out

    Q = scalar_product(even, pairing)
    if o % 2:
        # w = ∇φ with φ = ∇^{(o-1)}p; Q1 is the vector paired with w
        idx = next(i for i, pr in enumerate(pairing) if pr[0] == o)
        partner = pairing[idx][1]
        rest = scalar_product(even, pairing[:idx] + pairing[idx + 1:])
        Q1 = [rest * comp for comp in nabla_power(n, partner)]
        phi = nabla_power(n, o - 1)
        div = DiffForm(n)
        for a in range(n):
            div = div + differentiate(Q1[a], a + 1)
        corr = DiffForm(n)
        for a in range(n):
            corr = corr + Q1[a] * DiffForm.var(tuple(1 if i == a else 0 for i in range(n)))
        R = Q + phi * div - _div_p(phi * corr).scale(2 * m - 1)
    else:
        # w = ∇^{(o)}p = div g with g = ∇^{(o-1)}p; Q1 scalar
        even_rest = list(even)
        even_rest.remove(o)
        Q1 = scalar_product(even_rest, pairing)
        g = nabla_power(n, o - 1)
        Q1p = _div_p(Q1)
        R = Q
        for a in range(n):
            grad = differentiate(Q1, a + 1) - (Q1p * DiffForm.var(tuple(1 if i == a else 0 for i in range(n)))).scale(2 * m - 1)
            R = R + g[a] * grad
    prov = {"type": "nabla", "m": m, "n": n, "powers": list(powers), "pairing": [list(pr) for pr in pairing]}
    return Constraint(R, prov, m)


def nabla_constraints(m: int, n: int, all_pairings: bool = False) -> List[Constraint]:
    return [nabla_constraint(pw, n, pr) for pw, pr in nabla_signatures(m, all_pairings)]


# -- lifts --------------------------------------------------------------------

def lift_form(R: DiffForm, m: int) -> DiffForm:
    p = DiffForm.p(R.n)
    return p * p * heat_time_derivative(R) - (R * p * half_laplacian_p(R.n)).scale(2 * m - 1)


def lift_constraint(c: Constraint) -> Constraint:
    return Constraint(lift_form(c.form, c.m), {"type": "lift", "parent": c.provenance}, c.m + 1)


# -- symbolic-index families --------------------------------------------------

def instantiate(template: DiffForm, n: int, free: Sequence[int] = (), summed: Sequence[int] = ()) -> Dict[tuple, DiffForm]:
    """Substitute letters of a k-letter template by coordinates of [n].

    Letters listed in ``summed`` are summed over [n]; letters in ``free`` index
    the returned dict.  Letters are 0-based positions in the template's multi-index.
    """
    k = template.n
    free = list(free)
    summed = list(summed)
    if sorted(free + summed) != list(range(k)):
        raise ValueError("free and summed letters must partition the alphabet")
    out = {}
    for ftup in itertools.product(range(n), repeat=len(free)):
        acc = DiffForm(n)
        for stup in itertools.product(range(n), repeat=len(summed)):
            mapping = [0] * k
            for pos, v in zip(free, ftup):
                mapping[pos] = v
            for pos, v in zip(summed, stup):
                mapping[pos] = v
            acc = acc + template.substitute(mapping, n)
        out[tuple(x + 1 for x in ftup)] = acc
    return out


def family_ibp(m: int, letters: int) -> Tuple[int, List[Constraint]]:
    """Type-1 constraints over an abstract alphabet of ``letters`` indices.

    Returns (number of source monomials, distinct constraints).
    """
    monos = enumerate_monomials(letters, 2 * m, 2 * m, 2 * m - 1)
    raw = []
    for M in monos:
        for d, _ in M:
            if sum(d) == 0:
                continue
            for j, k in enumerate(d):
                if k:
                    c = ibp_constraint(M, d, m, j + 1)
                    if c.form.max_order() <= 2 * m - 1:
                        raw.append(c)
    return len(monos), dedup(raw)


# -- the two-index family for Costa's EPI -----------------------------------

# Each member is p^3 ∂_j(N / p^3) for a monomial numerator N over letters
# a = 1, b = 2.  Derivatives are written as letter strings ("" is p itself).
PAIR_FAMILY: Tuple[Tuple[Tuple[str, ...], str], ...] = (
    (("", "", "b", "bb"), "b"),
    (("", "", "a", "bb"), "b"),
    (("", "", "b", "ab"), "b"),
    (("", "", "a", "ab"), "b"),
    (("", "", "b", "ab"), "a"),
    (("", "", "a", "ab"), "a"),
    (("", "", "b", "aa"), "a"),
    (("", "", "a", "aa"), "a"),
    (("", "a", "a", "b"), "b"),
    (("", "a", "b", "b"), "b"),
    (("", "b", "b", "b"), "b"),
    (("", "a", "a", "b"), "a"),
    (("", "a", "b", "b"), "a"),
    (("", "b", "b", "b"), "a"),
    (("", "a", "a", "a"), "a"),
    (("", "a", "a", "b"), "a"),
    (("", "a", "b", "b"), "a"),
)


def _letters_to_derivative(word: str) -> Derivative:
    return (word.count("a"), word.count("b"))


def numerator_constraint(N: Monomial, coord: int, m: int, label: Optional[str] = None) -> Constraint:
    R = ibp_from_numerator(DiffForm.monomial(len(N[0][0]), N), coord, m)
    prov = {"type": "numerator", "m": m, "N": mono_to_json(N), "coord": coord}
    if label:
        prov["label"] = label
    return Constraint(R, prov, m)


def pair_family() -> List[Constraint]:
    """The 17 second-order two-index constraints, in their published order."""
    out = []
    for i, (word, j) in enumerate(PAIR_FAMILY, start=1):
        N = make_monomial((_letters_to_derivative(w), 1) for w in word)
        out.append(numerator_constraint(N, 1 if j == "a" else 2, 2, f"R{i}"))
    return out


# -- intrinsic relations ------------------------------------------------------

@dataclass(frozen=True)
class IntrinsicRelation:
    """m_i m_j - m_k m_l = 0 where both products are the same monomial (0-based indices)."""

    left: Tuple[int, int]
    right: Tuple[int, int]

    @property
    def provenance(self):
        return {"type": "intrinsic", "left": list(self.left), "right": list(self.right)}


def intrinsic_constraints(basis: Sequence[Monomial], prune: bool = False) -> List[IntrinsicRelation]:
    """m_i m_j = m_k m_l for every two index pairs with the same product.

    A product shared by g pairs gives C(g, 2) relations, of which only g-1 are
    independent; ``prune`` keeps just those g-1 (each pair against the lex-least).
    """
    groups: Dict[Monomial, List[Tuple[int, int]]] = {}
    for i in range(len(basis)):
        for j in range(i, len(basis)):
            groups.setdefault(make_monomial(basis[i] + basis[j]), []).append((i, j))
    out = []
    for pairs in groups.values():
        if len(pairs) < 2:
            continue
        pairs = sorted(pairs)
        if prune:
            out.extend(IntrinsicRelation(pairs[0], pr) for pr in pairs[1:])
        else:
            out.extend(IntrinsicRelation(a, b) for a, b in itertools.combinations(pairs, 2))
    return sorted(out, key=lambda r: (r.left, r.right))


# -- dedup --------------------------------------------------------------------

def dedup(constraints: Iterable[Constraint]) -> List[Constraint]:
    """Drop zero forms and scalar multiples; the first occurrence survives."""
    seen = set()
    out = []
    for c in constraints:
        if not c.form:
            continue
        key = c.form.normalized()
        if key in seen:
            continue
        seen.add(key)
        out.append(c)
    return out


# -- assembled suites ---------------------------------------------------------

def _check_supported(m: int, n: int):
    if m == 2 and n >= 1:
        return
    if (m, n) not in SUPPORTED:
        raise UnsupportedProblem(f"no constraint suite for (m, n) = ({m}, {n})")


def constraint_suite(m: int, n: int) -> List[Constraint]:
    """The deduplicated pool C_{m,n} used by the prover."""
    _check_supported(m, n)
    return dedup(raw_suite(m, n))


def raw_suite(m: int, n: int) -> List[Constraint]:
    _check_supported(m, n)
    if m == 2:
        return ibp_constraints(2, n) + (nabla_constraints(2, n) if n > 1 else [])
    if m == 3:
        # the three-letter family keeps constraints that reach order 2m
        pool = ibp_constraints(3, n, max_letters=3, keep_top_order=n > 1)
        if n > 1:
            pool += nabla_constraints(3, n)
            pool += [lift_constraint(c) for c in dedup(nabla_constraints(2, n))]
        if n > 2:
            pool += [lift_constraint(c) for c in dedup(ibp_constraints(2, n, max_letters=2, keep_top_order=True))]
        return pool
    if (m, n) == (4, 1):
        return ibp_constraints(4, 1)
    if (m, n) == (5, 1):
        # own IBP rows plus one, two and three lifts of the lower orders
        pool = ibp_constraints(5, 1, keep_top_order=True)
        for k, lower in ((1, ibp_constraints(4, 1)), (2, ibp_constraints(3, 1)), (3, ibp_constraints(2, 1))):
            for _ in range(k):
                lower = [lift_constraint(c) for c in lower]
            pool += lower
        return pool
    if (m, n) == (4, 2):
        pool = ibp_constraints(4, 2, keep_top_order=True) + nabla_constraints(4, 2)
        pool += [lift_constraint(c) for c in constraint_suite(3, 2)]
        low = dedup(ibp_constraints(2, 2, keep_top_order=True) + nabla_constraints(2, 2))
        pool += [lift_constraint(lift_constraint(c)) for c in low]
        return pool
    raise UnsupportedProblem((m, n))


# -- provenance ---------------------------------------------------------------

def mono_to_json(m: Monomial) -> list:
    return [[list(d), e] for d, e in m]


def mono_from_json(x) -> Monomial:
    return make_monomial((tuple(d), e) for d, e in x)


def regenerate(prov: dict) -> DiffForm:
    t = prov["type"]
    if t == "ibp":
        return ibp_constraint(mono_from_json(prov["M"]), tuple(prov["pivot"]), prov["m"], prov["coord"]).form
    if t == "nabla":
        return nabla_constraint(prov["powers"], prov["n"], [tuple(x) for x in prov["pairing"]]).form
    if t == "numerator":
        return numerator_constraint(mono_from_json(prov["N"]), prov["coord"], prov["m"]).form
    if t == "lift":
        parent = prov["parent"]
        return lift_form(regenerate(parent), _prov_order(parent))
    raise ValueError(f"cannot regenerate provenance of type {t!r}")


def _prov_order(prov: dict) -> int:
    if prov["type"] == "lift":
        return _prov_order(prov["parent"]) + 1
    return prov["m"]
