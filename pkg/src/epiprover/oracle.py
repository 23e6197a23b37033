"""Exact Gaussian integrals of ∫ form / p^{2m-1} dx for diagonal Gaussians.

For a centred Gaussian of variance v in one coordinate, p^{(k)} = q_k(x)·p
with q_0 = 1 and q_{k+1} = q_k' − (x/v) q_k.  A degree-2m form divided by
p^{2m-1} is then a polynomial times p, whose integral is a polynomial
expectation; with independent coordinates it factorizes per axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Sequence, Tuple

from .diffalg import DiffForm
from .targets import NONNEGATIVE, TargetProblem

Poly = Tuple[Fraction, ...]   # coefficients, lowest degree first


@dataclass(frozen=True)
class GaussianSpec:
    variances: Tuple[Fraction, ...]

    def __post_init__(self):
        vs = tuple(Fraction(v) for v in self.variances)
        if not vs or any(v <= 0 for v in vs):
            raise ValueError("variances must be positive rationals")
        object.__setattr__(self, "variances", vs)

    @property
    def n(self) -> int:
        return len(self.variances)

    @classmethod
    def isotropic(cls, n: int, v) -> "GaussianSpec":
        return cls((Fraction(v),) * n)


def _mul(a: Poly, b: Poly) -> Poly:
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return tuple(out)


def _pow(a: Poly, e: int) -> Poly:
    out: Poly = (Fraction(1),)
    for _ in range(e):
        out = _mul(out, a)
    return out


@lru_cache(maxsize=None)
def hermite_quotient(k: int, v: Fraction) -> Poly:
    """q_k with p^{(k)} = q_k p for the centred Gaussian of variance v."""
    if k == 0:
        return (Fraction(1),)
    q = hermite_quotient(k - 1, v)
    deriv = [i * c for i, c in enumerate(q)][1:] or [Fraction(0)]
    shifted = [Fraction(0)] + [-c / v for c in q]
    out = [Fraction(0)] * max(len(deriv), len(shifted))
    for i, c in enumerate(deriv):
        out[i] += c
    for i, c in enumerate(shifted):
        out[i] += c
    return tuple(out)


@lru_cache(maxsize=None)
def _even_moment(k: int, v: Fraction) -> Fraction:
    """E[x^{2k}] = (2k−1)!! v^k."""
    out = Fraction(1)
    for j in range(1, 2 * k, 2):
        out *= j
    return out * v ** k


def expectation(poly: Poly, v: Fraction) -> Fraction:
    return sum((c * _even_moment(i // 2, v) for i, c in enumerate(poly) if c and i % 2 == 0), Fraction(0))


def gaussian_expectation(form: DiffForm, m: int, spec: GaussianSpec) -> Fraction:
    """∫ form / p^{2m−1} dx for the diagonal Gaussian ``spec``, exactly."""
    if form.n != spec.n:
        raise ValueError(f"form has dimension {form.n}, spec has {spec.n}")
    total = Fraction(0)
    for mono, c in form.terms.items():
        if sum(e for _, e in mono) != 2 * m:
            raise ValueError(f"form is not homogeneous of degree {2 * m}")
        value = c
        for a, v in enumerate(spec.variances):
            poly: Poly = (Fraction(1),)
            for d, e in mono:
                if d[a]:
                    poly = _mul(poly, _pow(hermite_quotient(d[a], v), e))
            value *= expectation(poly, v)
            if not value:
                break
        total += value
    return total


def entropy_derivative(m: int, spec: GaussianSpec) -> Fraction:
    """d^mH/dt^m for H = Σ_a ½ log(2πe v_a) with each v_a advancing at unit rate."""
    out = Fraction(0)
    fact = 1
    for j in range(1, m):
        fact *= j
    for v in spec.variances:
        out += Fraction((-1) ** (m - 1) * fact, 2) / v ** m
    return out


def isotropic_value(m: int, n: int, v) -> Fraction:
    """n (m−1)! (−1)^{m−1} / (2 v^m)."""
    return entropy_derivative(m, GaussianSpec.isotropic(n, v))


@dataclass
class SignCheck:
    spec: GaussianSpec
    value: Fraction
    ok: bool


def sign_check(target: TargetProblem, specs: Sequence[GaussianSpec]) -> List[SignCheck]:
    """Evaluate the target on each Gaussian and compare with the demanded sign."""
    out = []
    for s in specs:
        val = gaussian_expectation(target.target, target.m, s)
        ok = val >= 0 if target.sense == NONNEGATIVE else val <= 0
        out.append(SignCheck(s, val, ok))
    return out
