"""Exact SOS certificates: rounding of SDP points, rational LDL, the
form-level identity  sign·target = Σ c_i ℓ_i² + Σ w_j R_j,  and a
canonical text format.

``verify`` re-derives every constraint from its provenance record and
checks the identity over ℚ; it never looks at the SDP.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .constraints import Constraint, regenerate
from .diffalg import DiffForm, Monomial, ParseError, make_monomial, monomial_key
from .reduction import QuadBasis, QuadraticForm, quad_basis
from .sdp import SdpProblem, SdpSolution, sym_to_fractions
from .targets import (
    COSTA_CONCRETE,
    COSTA_GENERAL,
    DMN,
    NONNEGATIVE,
    NONPOSITIVE,
    build_F,
    build_J2,
    evaluate_affine,
    symmetric_pair_reduce,
)

DEFAULT_LADDER = (10**3, 10**6, 10**9, 10**12, 10**15)


class RationalizationFailed(RuntimeError):
    def __init__(self, msg, pivot=None):
        super().__init__(msg)
        self.pivot = pivot


class NotPSD(ValueError):
    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


class IdentityMismatch(RuntimeError):
    pass


# -- rational LDL (triangular SOS) -------------------------------------------

@dataclass
class LdlResult:
    psd: bool
    factors: List[Tuple[Fraction, List[Fraction]]]   # (c, ℓ) with ℓ monic at its leading index
    witness: Optional[List[Fraction]] = None          # xᵀGx < 0 when not psd
    pivot: Optional[Fraction] = None                  # offending pivot value


def _as_matrix(G) -> List[List[Fraction]]:
    return [[Fraction(x) for x in row] for row in G]


def rational_ldl(G) -> LdlResult:
    """Peel c·(x_k + Σ_{j>k} (a_kj/a_kk) x_j)² off the first nonzero diagonal.

    A zero pivot with a zero row is skipped; a zero pivot with a nonzero row,
    or a negative pivot, proves G is not PSD and a witness is returned.
    """
    A = _as_matrix(G)
    k = len(A)
    for i in range(k):
        for j in range(i):
            if A[i][j] != A[j][i]:
                raise ValueError("matrix is not symmetric")
    factors: List[Tuple[Fraction, List[Fraction]]] = []
    for i in range(k):
        a = A[i][i]
        if a == 0:
            j = next((j for j in range(i + 1, k) if A[i][j] != 0), None)
            if j is None:
                continue
            # x = e_i + s e_j gives 2 s a_ij + s² a_jj < 0
            aij, ajj = A[i][j], A[j][j]
            s = -aij / ajj if ajj > 0 else Fraction(-1 if aij > 0 else 1)
            x = _witness(factors, k, {i: Fraction(1), j: s})
            return LdlResult(False, factors, x, Fraction(0))
        if a < 0:
            return LdlResult(False, factors, _witness(factors, k, {i: Fraction(1)}), a)
        row = [Fraction(0)] * i + [A[i][j] / a for j in range(i, k)]
        factors.append((a, row))
        for r in range(i + 1, k):
            if A[i][r] == 0:
                continue
            f = A[i][r] / a
            for s_ in range(r, k):
                A[r][s_] -= f * A[i][s_]
                if s_ != r:
                    A[s_][r] = A[r][s_]
        for r in range(i, k):
            A[i][r] = Fraction(0)
            A[r][i] = Fraction(0)
    return LdlResult(True, factors)


def _witness(factors, k, fixed: Dict[int, Fraction]) -> List[Fraction]:
    """Choose x with every peeled form ℓ(x) = 0 and the given free coordinates."""
    x = [Fraction(0)] * k
    for idx, v in fixed.items():
        x[idx] = v
    for _, row in reversed(factors):
        lead = next(j for j, v in enumerate(row) if v)
        x[lead] = -sum(row[j] * x[j] for j in range(lead + 1, k))
    return x


def quadratic_value(G, x) -> Fraction:
    return sum(Fraction(G[i][j]) * x[i] * x[j] for i in range(len(x)) for j in range(len(x)))


def sos_matrix(factors, k) -> List[List[Fraction]]:
    M = [[Fraction(0)] * k for _ in range(k)]
    for c, row in factors:
        for i in range(k):
            if row[i]:
                for j in range(k):
                    if row[j]:
                        M[i][j] += c * row[i] * row[j]
    return M


# -- rationalization ----------------------------------------------------------

def round_value(x: float, bound: int) -> Fraction:
    """Best rational approximation with denominator ≤ bound (continued fractions)."""
    return Fraction(x).limit_denominator(bound)


def _kernel_equations(problem: SdpProblem, kernels) -> List[Tuple[Dict[str, Fraction], Fraction]]:
    """Rows  Σ_i p_i (A_i v)_r = (C v)_r  for every imposed kernel vector v."""
    eqs = []
    for block, ker in zip(problem.blocks, kernels or []):
        k = block.size
        C = sym_to_fractions(block.C, k)
        As = [(nm, sym_to_fractions(Ai, k)) for nm, Ai in block.A]
        for v in ker:
            for r in range(k):
                rhs = sum(C[r][c] * v[c] for c in range(k) if v[c])
                lhs = {}
                for nm, Ai in As:
                    val = sum(Ai[r][c] * v[c] for c in range(k) if v[c])
                    if val:
                        lhs[nm] = lhs.get(nm, 0) + val
                if lhs or rhs:
                    eqs.append((lhs, rhs))
    return eqs


def project_affine(values: Dict[str, Fraction], eqs) -> Dict[str, Fraction]:
    """Move a rounded point onto {Σ a_i p_i = b} exactly: pivot unknowns are
    solved for, the remaining (free) unknowns keep their rounded values."""
    if not eqs:
        return dict(values)
    pivots: Dict[str, Tuple[Dict[str, Fraction], Fraction]] = {}
    order: List[str] = []
    for lhs, rhs in eqs:
        row, b = dict(lhs), Fraction(rhs)
        for nm in order:
            c = row.get(nm)
            if c:
                prow, pb = pivots[nm]
                for k, v in prow.items():
                    w = row.get(k, 0) - c * v
                    if w:
                        row[k] = w
                    else:
                        row.pop(k, None)
                b -= c * pb
        if not row:
            if b != 0:
                raise RationalizationFailed("inconsistent facial-reduction equations")
            continue
        nm = min(row)
        c = row[nm]
        row = {k: v / c for k, v in row.items()}
        b /= c
        # keep earlier pivot rows free of the new pivot
        for other in order:
            prow, pb = pivots[other]
            d = prow.get(nm)
            if d:
                for k, v in row.items():
                    w = prow.get(k, 0) - d * v
                    if w:
                        prow[k] = w
                    else:
                        prow.pop(k, None)
                pivots[other] = (prow, pb - d * b)
        pivots[nm] = (row, b)
        order.append(nm)
    out = dict(values)
    for nm in order:
        row, b = pivots[nm]
        out[nm] = b - sum(v * out.get(k, 0) for k, v in row.items() if k != nm)
    return out


@dataclass
class RationalPoint:
    values: Dict[str, Fraction]
    ldl: List[LdlResult]
    bound: int


def check_point(problem: SdpProblem, values: Dict[str, Fraction]) -> List[LdlResult]:
    return [rational_ldl(sym_to_fractions(b.witness_exact(values), b.size)) for b in problem.blocks]


def rationalize(problem: SdpProblem, solution: SdpSolution, denominator_bound: Optional[int] = None,
                ladder: Sequence[int] = DEFAULT_LADDER) -> RationalPoint:
    """Round the SDP point, escalating the denominator bound until every block is exactly PSD."""
    bounds = [b for b in ladder if denominator_bound is None or b >= denominator_bound]
    if denominator_bound is not None and denominator_bound not in bounds:
        bounds.insert(0, denominator_bound)
    eqs = _kernel_equations(problem, solution.kernels)
    worst = None
    for bound in bounds:
        vals = {nm: round_value(solution.values.get(nm, 0.0), bound) for nm in problem.multipliers}
        vals = project_affine(vals, eqs)
        res = check_point(problem, vals)
        if all(r.psd for r in res):
            return RationalPoint(vals, res, bound)
        piv = [r.pivot for r in res if not r.psd]
        worst = min(piv) if piv else worst
    raise RationalizationFailed(f"no exactly-PSD rounding up to denominator {bounds[-1] if bounds else None}", worst)


# -- expressing a form in the span of constraints -----------------------------

def express_in_span(target: DiffForm, forms: Sequence[DiffForm], key=monomial_key) -> Optional[List[Fraction]]:
    """Exact w with target = Σ w_j forms_j, or None when target is outside the span.

    Echelon rows are E_k = A_k − Σ_{j<k} c_kj E_j; only the sparse c_kj are
    recorded, and the coefficients over the inputs are recovered by a
    triangular sweep afterwards.
    """
    rows: List[Dict] = []
    coefs: List[Dict[int, Fraction]] = []
    origin: List[int] = []
    pivots: Dict[Monomial, int] = {}

    def reduce(r):
        used: Dict[int, Fraction] = {}
        while r:
            lead = max(r, key=key)
            k = pivots.get(lead)
            if k is None:
                return r, lead, used
            c = r[lead] / rows[k][lead]
            used[k] = used.get(k, 0) + c
            for m, v in rows[k].items():
                w = r.get(m, 0) - c * v
                if w:
                    r[m] = w
                else:
                    r.pop(m, None)
        return r, None, used

    for i, f in enumerate(forms):
        r, lead, used = reduce(dict(f.terms))
        if r:
            pivots[lead] = len(rows)
            rows.append(r)
            coefs.append(used)
            origin.append(i)
    r, _, y = reduce(dict(target.terms))
    if r:
        return None
    acc = dict(y)
    out = [Fraction(0)] * len(forms)
    for k in range(len(rows) - 1, -1, -1):
        wk = acc.get(k, 0)
        if not wk:
            continue
        out[origin[k]] = wk
        for j, c in coefs[k].items():
            acc[j] = acc.get(j, 0) - wk * c
    return out


# -- the certificate ------------------------------------------------------------

def digest(form: DiffForm) -> str:
    return hashlib.sha256(form.to_text().encode()).hexdigest()[:16]


@dataclass
class CertBlock:
    name: str
    target: str                                        # "F", "J2", "L1" or "L2"
    sos: List[Tuple[Fraction, List[Fraction]]]
    multipliers: Dict[str, Fraction] = field(default_factory=dict)
    combination: List[Tuple[Fraction, dict, str]] = field(default_factory=list)   # (w, provenance, digest)


@dataclass
class Certificate:
    kind: str
    m: int
    n: int
    sense: str
    basis: List[Monomial]
    blocks: List[CertBlock]
    params: Dict[str, Fraction] = field(default_factory=dict)

    def __eq__(self, other):
        return isinstance(other, Certificate) and serialize(self) == serialize(other)


def target_form(kind: str, m: int, n: int, label: str, params: Dict[str, Fraction]) -> DiffForm:
    if kind == DMN and label == "F":
        return build_F(m, n)
    if kind == COSTA_CONCRETE and label == "J2":
        return build_J2(n)
    if kind == COSTA_GENERAL and label in ("L1", "L2"):
        return evaluate_affine(symmetric_pair_reduce()[label], params)
    raise ValueError(f"unknown target {label!r} for {kind}")


def expected_basis(kind: str, m: int, n: int) -> List[Monomial]:
    if kind == COSTA_GENERAL:
        return quad_basis(2, 2).elements
    return quad_basis(m, n).elements


def sos_form(sos, basis: Sequence[Monomial], n: int) -> DiffForm:
    out = DiffForm(n)
    for c, row in sos:
        ell = DiffForm(n, {basis[j]: v for j, v in enumerate(row) if v})
        out = out + (ell * ell).scale(c)
    return out


def build_certificate(kind: str, m: int, n: int, sense: str, basis: QuadBasis,
                      blocks: Sequence[Tuple[str, str, QuadraticForm, Sequence[Tuple[str, QuadraticForm]]]],
                      values: Dict[str, Fraction], constraints: Sequence[Constraint],
                      params: Optional[Dict[str, Fraction]] = None) -> Certificate:
    """Assemble and self-check a certificate.

    Each block is (name, target label, C, [(multiplier, R̂)]) where C is the
    signed reduced target at the given parameter values; S = C − Σ p R̂ must
    be PSD exactly, and sign·target − S must lie in the span of ``constraints``.
    """
    factored = []
    for name, label, C, pairs in blocks:
        S = C
        for nm, R in pairs:
            v = values.get(nm, 0)
            if v:
                S = S - R.scale(v)
        res = rational_ldl(S.matrix())
        if not res.psd:
            raise NotPSD(f"block {name}: residual matrix is not PSD", res)
        mult = {nm: values[nm] for nm, _ in pairs if values.get(nm)}
        factored.append((name, label, res.factors, mult))
    return certificate_from_sos(kind, m, n, sense, basis, factored, constraints, params)


def certificate_from_sos(kind: str, m: int, n: int, sense: str, basis: QuadBasis,
                         blocks: Sequence[Tuple[str, str, list, Dict[str, Fraction]]],
                         constraints: Sequence[Constraint],
                         params: Optional[Dict[str, Fraction]] = None) -> Certificate:
    """Certificate from given SOS factors [(c, ℓ)] per block.

    The constraint combination closing sign·target − Σ c ℓ² is solved for
    here; raises IdentityMismatch when no such combination exists.
    """
    params = dict(params or {})
    sign = 1 if sense == NONNEGATIVE else -1
    forms = [c.form for c in constraints]
    out_blocks = []
    for name, label, sos, mult in blocks:
        sos = [(Fraction(c), [Fraction(x) for x in row]) for c, row in sos]
        goal = target_form(kind, m, n, label, params).scale(sign) - sos_form(sos, basis.elements, basis.n)
        w = express_in_span(goal, forms)
        if w is None:
            raise IdentityMismatch(f"block {name}: target minus SOS is outside the constraint span")
        comb = [(wj, constraints[j].provenance, digest(forms[j])) for j, wj in enumerate(w) if wj]
        out_blocks.append(CertBlock(name, label, sos, dict(mult), comb))
    cert = Certificate(kind, m, n, sense, list(basis.elements), out_blocks, params)
    report = verify(cert)
    if not report.ok:
        raise IdentityMismatch("; ".join(report.reasons))
    return cert


# -- verification -------------------------------------------------------------

@dataclass
class VerifyReport:
    ok: bool
    reasons: List[str] = field(default_factory=list)
    residuals: Dict[str, DiffForm] = field(default_factory=dict)

    def __bool__(self):
        return self.ok


def verify(cert: Certificate) -> VerifyReport:
    reasons: List[str] = []
    residuals: Dict[str, DiffForm] = {}
    try:
        expected = expected_basis(cert.kind, cert.m, cert.n)
    except Exception as exc:
        return VerifyReport(False, [f"unsupported problem: {exc}"])
    if list(cert.basis) != list(expected):
        return VerifyReport(False, ["basis mismatch"])
    if cert.sense not in (NONNEGATIVE, NONPOSITIVE):
        return VerifyReport(False, [f"unknown sense {cert.sense!r}"])
    sign = 1 if cert.sense == NONNEGATIVE else -1
    k = len(cert.basis)
    n = len(cert.basis[0][0][0]) if cert.basis else cert.n
    cache: Dict[str, DiffForm] = {}
    for blk in cert.blocks:
        bad = False
        for i, (c, row) in enumerate(blk.sos):
            if c < 0:
                reasons.append(f"{blk.name}: negative coefficient c{i + 1} = {c}")
                bad = True
            if len(row) != k:
                reasons.append(f"{blk.name}: factor {i + 1} has wrong length")
                bad = True
        if bad:
            continue
        total = sos_form(blk.sos, cert.basis, n)
        for w, prov, dg in blk.combination:
            key = json.dumps(prov, sort_keys=True)
            R = cache.get(key)
            if R is None:
                try:
                    R = cache[key] = regenerate(prov)
                except Exception as exc:
                    reasons.append(f"{blk.name}: cannot regenerate constraint: {exc}")
                    bad = True
                    break
            if digest(R) != dg:
                reasons.append(f"{blk.name}: provenance mismatch for digest {dg}")
                bad = True
                break
            total = total + R.scale(w)
        if bad:
            continue
        try:
            goal = target_form(cert.kind, cert.m, cert.n, blk.target, cert.params).scale(sign)
        except Exception as exc:
            reasons.append(f"{blk.name}: {exc}")
            continue
        res = goal - total
        if res:
            residuals[blk.name] = res
            reasons.append(f"{blk.name}: identity residual with {len(res)} term(s)")
    return VerifyReport(not reasons, reasons, residuals)


# -- text format ----------------------------------------------------------------
#
#   certificate v1
#   kind <Dmn|CostaConcrete|CostaGeneral>
#   m <int>
#   n <int>
#   sense <nonnegative|nonpositive>
#   param <name> <rational>                     (zero or more)
#   basis <k>
#   mono <monomial>                             (k lines; monomial = d(h..)^e*d(h..)^e)
#   block <name> <target> <factors> <multipliers> <combination>
#   sos <c> <ℓ_1> ... <ℓ_k>
#   mult <name> <rational>
#   comb <rational> <digest> <provenance as compact sorted JSON>
#   end

def _q(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _mono_text(m: Monomial) -> str:
    return "*".join(f"d({','.join(map(str, d))})^{e}" for d, e in m)


def serialize(cert: Certificate) -> str:
    out = ["certificate v1", f"kind {cert.kind}", f"m {cert.m}", f"n {cert.n}", f"sense {cert.sense}"]
    for nm in sorted(cert.params):
        out.append(f"param {nm} {_q(Fraction(cert.params[nm]))}")
    out.append(f"basis {len(cert.basis)}")
    out.extend(f"mono {_mono_text(m)}" for m in cert.basis)
    for b in cert.blocks:
        out.append(f"block {b.name} {b.target} {len(b.sos)} {len(b.multipliers)} {len(b.combination)}")
        for c, row in b.sos:
            out.append("sos " + " ".join(_q(x) for x in [c] + list(row)))
        for nm in sorted(b.multipliers, key=_natural):
            out.append(f"mult {nm} {_q(b.multipliers[nm])}")
        for w, prov, dg in b.combination:
            out.append(f"comb {_q(w)} {dg} {json.dumps(prov, sort_keys=True, separators=(',', ':'))}")
    out.append("end")
    return "\n".join(out) + "\n"


def _natural(name: str):
    head = name.rstrip("0123456789")
    tail = name[len(head):]
    return (head, int(tail) if tail else -1)


def _frac(tok: str, line: int, col: int) -> Fraction:
    try:
        return Fraction(tok)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"bad rational {tok!r}", line, col) from None


def _parse_mono(text: str, line: int, col: int) -> Monomial:
    factors = []
    for part in text.split("*"):
        if not (part.startswith("d(") and ")^" in part):
            raise ParseError(f"bad factor {part!r}", line, col)
        idx, e = part[2:].split(")^")
        try:
            factors.append((tuple(int(x) for x in idx.split(",")), int(e)))
        except ValueError:
            raise ParseError(f"bad factor {part!r}", line, col) from None
    return make_monomial(factors)


def parse(text: str) -> Certificate:
    lines = text.splitlines()
    pos = 0

    def nxt(expect: str):
        nonlocal pos
        if pos >= len(lines):
            raise ParseError(f"unexpected end of input, expected {expect!r}", pos + 1, 1)
        ln = lines[pos]
        pos += 1
        toks = ln.split(" ")
        if toks[0] != expect:
            raise ParseError(f"expected {expect!r}, found {toks[0]!r}", pos, 1)
        return toks, ln

    toks, _ = nxt("certificate")
    if toks[1:] != ["v1"]:
        raise ParseError("unsupported certificate version", pos, 13)
    kind = nxt("kind")[0][1]
    try:
        m = int(nxt("m")[0][1])
        n = int(nxt("n")[0][1])
    except (ValueError, IndexError):
        raise ParseError("bad integer", pos, 3) from None
    sense = nxt("sense")[0][1]
    if sense not in (NONNEGATIVE, NONPOSITIVE):
        raise ParseError(f"unknown sense {sense!r}", pos, 7)
    params = {}
    while pos < len(lines) and lines[pos].startswith("param "):
        toks, _ = nxt("param")
        params[toks[1]] = _frac(toks[2], pos, len(toks[0]) + len(toks[1]) + 3)
    toks, _ = nxt("basis")
    basis = [_parse_mono(nxt("mono")[0][1], pos, 6) for _ in range(int(toks[1]))]
    blocks = []
    while pos < len(lines) and lines[pos].startswith("block "):
        toks, _ = nxt("block")
        name, target = toks[1], toks[2]
        nf, nmul, ncomb = (int(x) for x in toks[3:6])
        sos = []
        for i in range(nf):
            toks, _ = nxt("sos")
            vals = []
            col = 5
            for t in toks[1:]:
                vals.append(_frac(t, pos, col))
                col += len(t) + 1
            if vals[0] < 0:
                raise ParseError(f"signed coefficient: c{i + 1} = {vals[0]} must be nonnegative", pos, 5)
            if len(vals) != len(basis) + 1:
                raise ParseError("factor length does not match the basis", pos, 1)
            sos.append((vals[0], vals[1:]))
        mult = {}
        for _ in range(nmul):
            toks, _ = nxt("mult")
            mult[toks[1]] = _frac(toks[2], pos, 7 + len(toks[1]))
        comb = []
        for _ in range(ncomb):
            toks, ln = nxt("comb")
            w = _frac(toks[1], pos, 6)
            dg = toks[2]
            raw = ln.split(" ", 3)[3]
            try:
                prov = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad provenance: {exc.msg}", pos, len(ln) - len(raw) + exc.colno) from None
            comb.append((w, prov, dg))
        blocks.append(CertBlock(name, target, sos, mult, comb))
    nxt("end")
    if any(ln.strip() for ln in lines[pos:]):
        raise ParseError("trailing content after 'end'", pos + 1, 1)
    return Certificate(kind, m, n, sense, basis, blocks, params)
