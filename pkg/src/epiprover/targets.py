"""Target forms: F_{m,n} for D(m,n) and J_{2,n} plus its two-index reduction for Costa's EPI."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional

from .diffalg import DiffForm, derivative, heat_time_derivative

NONNEGATIVE = "nonnegative"
NONPOSITIVE = "nonpositive"

DMN = "Dmn"
COSTA_CONCRETE = "CostaConcrete"
COSTA_GENERAL = "CostaGeneral"


class ResourceLimit(RuntimeError):
    pass


@dataclass
class TargetProblem:
    """A form whose integral against p^{-(2m-1)} must be signed.

    For the two-index Costa problem ``parts`` holds L1 and L2 as affine
    combinations ``{None: constant, "c1": ..., "c2": ...}`` of forms; the
    named keys are free scalars resolved by the SDP.
    """

    kind: str
    m: int
    n: int
    target: Optional[DiffForm]
    sense: str
    parts: Dict[str, Dict[Optional[str], DiffForm]] = field(default_factory=dict)

    @property
    def sign(self) -> int:
        return 1 if self.sense == NONNEGATIVE else -1

    def signed_target(self) -> DiffForm:
        return self.target.scale(self.sign)


def _p(n):
    return DiffForm.p(n)


def _d(n, *coords):
    return DiffForm.var(derivative(n, *coords))


def half_laplacian_p(n: int) -> DiffForm:
    """dp/dt under the heat equation."""
    out = DiffForm(n)
    for i in range(1, n + 1):
        out = out + _d(n, i, i)
    return out.scale(Fraction(1, 2))


def build_F(m: int, n: int, max_terms: int = 2_000_000) -> DiffForm:
    """F_{m,n}: numerator of d^mH/dt^m over p^{2m-1}."""
    if m < 1 or n < 1:
        raise ValueError("need m >= 1 and n >= 1")
    p = _p(n)
    F = DiffForm(n)
    for i in range(1, n + 1):
        F = F + _d(n, i) * _d(n, i)
    F = F.scale(Fraction(1, 2))
    dp = half_laplacian_p(n)
    for k in range(2, m + 1):
        F = p * p * heat_time_derivative(F) - (p * dp * F).scale(2 * k - 3)
        if len(F) > max_terms:
            raise ResourceLimit(f"F_{{{k},{n}}} exceeds {max_terms} terms")
    return F


def _f(*idx):
    """n=1 monomial helper: _f(0, 0, 3) = f^2 f_3."""
    out = DiffForm(1, {(): 1})
    for i in idx:
        out = out * DiffForm.var((i,))
    return out


def build_F41() -> DiffForm:
    """The explicit nine-term F_{4,1} used for -d^4H/dt^4 >= 0."""
    q = Fraction
    terms = [
        (q(-3, 8), (0,) * 6 + (3, 5)),
        (q(3, 8), (0,) * 5 + (3, 3, 2)),
        (q(-3, 4), (0,) * 4 + (1, 3, 2, 2)),
        (q(3, 8), (0,) * 5 + (1, 5, 2)),
        (q(3, 8), (0,) * 5 + (1, 3, 4)),
        (q(-1, 8), (0,) * 6 + (1, 7)),
        (q(3, 8), (0,) * 3 + (1, 1, 2, 2, 2)),
        (q(-3, 8), (0,) * 4 + (1, 1, 4, 2)),
        (q(1, 16), (0,) * 5 + (1, 1, 6)),
    ]
    out = DiffForm(1)
    for c, idx in terms:
        out = out + _f(*idx).scale(c)
    return out


def dmn_sense(m: int) -> str:
    return NONNEGATIVE if m % 2 == 1 else NONPOSITIVE


def S_form(n: int, a: int) -> DiffForm:
    x = _p(n) * _d(n, a, a) - _d(n, a) * _d(n, a)
    return x * x


def T_form(n: int, a: int, b: int) -> DiffForm:
    p = _p(n)
    return p * p * _d(n, a) * _d(n, a, b, b) - (p * _d(n, a) * _d(n, a) * _d(n, b, b)).scale(Fraction(1, 2))


def build_J2(n: int) -> DiffForm:
    """J_{2,n} scaled by 2, so that J_{2,1} = 2f^2 f1 f3 + 2f^2 f2^2 - 5 f f1^2 f2 + 2 f1^4."""
    out = DiffForm(n)
    for a in range(1, n + 1):
        out = out + S_form(n, a)
        for b in range(1, n + 1):
            out = out + T_form(n, a, b)
    return out.scale(2)


def R0_form(i: int, n: int, a: int, b: int) -> DiffForm:
    """Summands R^{(0)}_{i,a,b} (i = 1, 2) of the two divergence constraints at order 2."""
    p = _p(n)
    if i == 1:
        return p * p * _d(n, a, b, b) * _d(n, a) + _d(n, a, a) * (p * p * _d(n, b, b) - p * _d(n, b) * _d(n, b))
    if i == 2:
        return p * _d(n, a, a) * _d(n, b) * _d(n, b) + (_d(n, a) * (
            p * _d(n, a, b) * _d(n, b) - _d(n, a) * _d(n, b) * _d(n, b))).scale(2)
    raise ValueError(i)


def symmetric_pair_reduce() -> Dict[str, Dict[Optional[str], DiffForm]]:
    """L1 and L2 over the alphabet {a, b} (coordinates 1, 2) with free scalars c1, c2."""
    n, a, b = 2, 1, 2
    L1 = {
        None: S_form(n, a) + S_form(n, b) + T_form(n, a, a) + T_form(n, b, b),
        "c1": R0_form(1, n, a, a) + R0_form(1, n, b, b),
        "c2": R0_form(2, n, a, a) + R0_form(2, n, b, b),
    }
    L2 = {
        None: T_form(n, a, b) + T_form(n, b, a),
        "c1": R0_form(1, n, a, b) + R0_form(1, n, b, a),
        "c2": R0_form(2, n, a, b) + R0_form(2, n, b, a),
    }
    return {"L1": L1, "L2": L2}


def evaluate_affine(parts: Dict[Optional[str], DiffForm], values: Dict[str, Fraction]) -> DiffForm:
    out = parts[None]
    for k, f in parts.items():
        if k is not None:
            out = out + f.scale(values.get(k, 0))
    return out


def make_problem(kind: str, m: int = 2, n: int = 1) -> TargetProblem:
    if kind == DMN:
        return TargetProblem(DMN, m, n, build_F(m, n), dmn_sense(m))
    if kind == COSTA_CONCRETE:
        return TargetProblem(COSTA_CONCRETE, 2, n, build_J2(n), NONPOSITIVE)
    if kind == COSTA_GENERAL:
        return TargetProblem(COSTA_GENERAL, 2, 2, None, NONPOSITIVE, parts=symmetric_pair_reduce())
    raise ValueError(f"unknown kind {kind!r}")
