"""Feasibility SDP ``C - Σ p_i A_i ⪰ 0`` over one or more blocks with shared
multipliers, solved in margin form (maximize λ with every block ⪰ λI).

Matrices are kept exactly (sparse upper-triangular Fractions) so that the
certificate stage can re-check the rounded point with rational arithmetic;
the solver only ever sees float copies.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .reduction import BasisMismatch, QuadraticForm
from .targets import NONNEGATIVE, NONPOSITIVE

CERTIFICATE_FOUND = "certificate_found"
NO_CERTIFICATE = "no_certificate"
NUMERICAL_FAILURE = "numerical_failure"

SymEntries = Dict[Tuple[int, int], Fraction]   # (i <= j) -> matrix entry G[i][j]


def _sym_from_quadratic(q: QuadraticForm) -> SymEntries:
    out = {}
    for (i, j), c in q.entries.items():
        out[(i, j)] = c if i == j else c / 2
    return out


def sym_to_array(ent: SymEntries, k: int) -> np.ndarray:
    A = np.zeros((k, k))
    for (i, j), v in ent.items():
        A[i, j] = float(v)
        A[j, i] = float(v)
    return A


def sym_to_fractions(ent: SymEntries, k: int) -> List[List[Fraction]]:
    G = [[Fraction(0)] * k for _ in range(k)]
    for (i, j), v in ent.items():
        G[i][j] = v
        G[j][i] = v
    return G


@dataclass(frozen=True)
class SdpBlock:
    name: str
    size: int
    C: SymEntries
    A: Tuple[Tuple[str, SymEntries], ...]   # (multiplier name, matrix) pairs

    def witness_exact(self, values: Dict[str, Fraction]) -> SymEntries:
        G = dict(self.C)
        for name, Ai in self.A:
            c = values.get(name, 0)
            if not c:
                continue
            for k, v in Ai.items():
                G[k] = G.get(k, 0) - c * v
        return {k: v for k, v in G.items() if v}

    def witness(self, values: Dict[str, float]) -> np.ndarray:
        G = sym_to_array(self.C, self.size)
        for name, Ai in self.A:
            c = values.get(name, 0.0)
            if c:
                G -= c * sym_to_array(Ai, self.size)
        return G


@dataclass(frozen=True)
class SdpProblem:
    blocks: Tuple[SdpBlock, ...]
    multipliers: Tuple[str, ...]

    @property
    def sizes(self) -> List[int]:
        return [b.size for b in self.blocks]


@dataclass
class SdpConfig:
    feasibility_tol: float = 1e-8
    margin: float = 1e-7
    max_iters: int = 500
    time_limit: Optional[float] = None
    seed: int = 0
    solver: str = "CLARABEL"
    facial_reduction: bool = True
    kernel_tol: float = 1e-6


@dataclass
class SdpSolution:
    status: str
    values: Dict[str, float]
    witnesses: List[np.ndarray]
    lam: float
    iterations: int = 0
    seconds: float = 0.0
    # rational kernel vectors forced on each block by facial reduction
    kernels: List[List[List[Fraction]]] = field(default_factory=list)
    message: str = ""

    @property
    def min_eig(self) -> float:
        if not self.witnesses:
            return float("inf")
        return min(float(np.linalg.eigvalsh(W)[0]) if W.size else float("inf") for W in self.witnesses)


# -- assembly -----------------------------------------------------------------

def assemble(E_hat: QuadraticForm, suite: Sequence[QuadraticForm], sense: str = NONNEGATIVE,
             names: Optional[Sequence[str]] = None, block: str = "B1") -> SdpProblem:
    """Single-block problem: C = ±matrix(Ê), A_i = matrix(R̂_i)."""
    basis = E_hat.basis
    for q in suite:
        if q.basis is not basis and q.basis != basis:
            raise BasisMismatch("suite and target use different bases")
    if sense not in (NONNEGATIVE, NONPOSITIVE):
        raise ValueError(sense)
    C = E_hat if sense == NONNEGATIVE else E_hat.scale(-1)
    names = list(names) if names is not None else [f"p{i + 1}" for i in range(len(suite))]
    A = tuple((nm, _sym_from_quadratic(q)) for nm, q in zip(names, suite))
    return SdpProblem((SdpBlock(block, len(basis), _sym_from_quadratic(C), A),), tuple(names))


def assemble_joint(blocks: Sequence[Tuple[str, QuadraticForm, Sequence[Tuple[str, QuadraticForm]]]],
                   shared: Sequence[str] = ()) -> SdpProblem:
    """Blocks given as (name, C, [(multiplier, A), ...]); C is taken as is (already signed)."""
    shared = set(shared)
    owner: Dict[str, str] = {}
    out, order = [], []
    for bname, C, pairs in blocks:
        for nm, _ in pairs:
            if nm in owner and owner[nm] != bname and nm not in shared:
                raise ValueError(f"multiplier {nm!r} used by blocks {owner[nm]!r} and {bname!r} but not declared shared")
            if nm not in owner:
                owner[nm] = bname
                order.append(nm)
        for _, q in pairs:
            if q.basis != C.basis:
                raise BasisMismatch(f"block {bname}: basis mismatch")
        A = tuple((nm, _sym_from_quadratic(q)) for nm, q in pairs)
        out.append(SdpBlock(bname, len(C.basis), _sym_from_quadratic(C), A))
    return SdpProblem(tuple(out), tuple(order))


def scaled(problem: SdpProblem, s) -> SdpProblem:
    s = Fraction(s)
    blocks = tuple(SdpBlock(b.name, b.size, {k: v * s for k, v in b.C.items()},
                            tuple((nm, {k: v * s for k, v in Ai.items()}) for nm, Ai in b.A))
                   for b in problem.blocks)
    return SdpProblem(blocks, problem.multipliers)


# -- solving ------------------------------------------------------------------

def _vec_operator(block: SdpBlock, index: Dict[str, int], nvar: int):
    """Return (c, M) with vec(C - Σp_iA_i) = c - M p (column-major, full matrix)."""
    k = block.size
    c = sym_to_array(block.C, k).reshape(-1, order="F")
    rows, cols, vals = [], [], []
    for name, Ai in block.A:
        j = index[name]
        for (a, b), v in Ai.items():
            fv = float(v)
            rows.append(a + b * k)
            cols.append(j)
            vals.append(fv)
            if a != b:
                rows.append(b + a * k)
                cols.append(j)
                vals.append(fv)
    M = sp.csc_matrix((vals, (rows, cols)), shape=(k * k, nvar))
    return c, M


def _solve_margin(problem: SdpProblem, cfg: SdpConfig, kernels: List[List[np.ndarray]]):
    import cvxpy as cp

    names = list(problem.multipliers)
    index = {nm: i for i, nm in enumerate(names)}
    nvar = len(names)
    scale = 0.0
    for b in problem.blocks:
        for v in b.C.values():
            scale = max(scale, abs(float(v)))
    scale = scale or 1.0
    p = cp.Variable(nvar) if nvar else None
    lam = cp.Variable()
    cons = [lam <= 1]
    for b, ker in zip(problem.blocks, kernels):
        k = b.size
        if k == 0:
            continue
        c, M = _vec_operator(b, index, nvar)
        c = c / scale
        expr = c - (M / scale) @ p if nvar else cp.Constant(c)
        G = cp.reshape(expr, (k, k), order="F")
        if ker:
            K = np.array(ker).T                     # k × r kernel basis
            Q, _ = np.linalg.qr(K, mode="complete")
            W = Q[:, np.linalg.matrix_rank(K):]     # orthonormal complement
            cons.append(G @ K == 0)
            if W.shape[1]:
                S = W.T @ G @ W
                S = (S + S.T) / 2
                cons.append(S - lam * np.eye(W.shape[1]) >> 0)
        else:
            Gs = (G + G.T) / 2
            cons.append(Gs - lam * np.eye(k) >> 0)
    prob = cp.Problem(cp.Maximize(lam), cons)
    opts = {}
    solver = cfg.solver.upper()
    if solver == "CLARABEL":
        opts = {"max_iter": cfg.max_iters}
        if cfg.time_limit:
            opts["time_limit"] = cfg.time_limit
    elif solver == "SCS":
        opts = {"max_iters": cfg.max_iters * 100}
    elif solver == "CVXOPT":
        opts = {"max_iters": cfg.max_iters}
    prob.solve(solver=solver, **opts)
    iters = getattr(prob.solver_stats, "num_iters", 0) or 0
    if prob.status not in ("optimal", "optimal_inaccurate") or lam.value is None:
        return None, None, iters, prob.status
    pv = np.asarray(p.value).ravel() if nvar else np.zeros(0)
    return pv, float(lam.value) * scale, iters, prob.status


def _numeric_kernel(W: np.ndarray, tol: float) -> List[np.ndarray]:
    w, V = np.linalg.eigh(W)
    big = max(1.0, float(np.abs(w).max()) if w.size else 1.0)
    return [V[:, i] for i in range(len(w)) if w[i] < tol * big]


def rational_kernel(vectors: List[np.ndarray], den: int = 1000) -> List[List[Fraction]]:
    """Rational basis of span(vectors) via numeric RREF and rounding to small denominators."""
    if not vectors:
        return []
    K = np.array(vectors)
    r = K.shape[0]
    # reduced row echelon form with partial pivoting
    R = K.copy()
    piv_cols = []
    row = 0
    for col in range(R.shape[1]):
        if row == r:
            break
        i = row + int(np.argmax(np.abs(R[row:, col])))
        if abs(R[i, col]) < 1e-8:
            continue
        R[[row, i]] = R[[i, row]]
        R[row] /= R[row, col]
        for j in range(r):
            if j != row:
                R[j] -= R[j, col] * R[row]
        piv_cols.append(col)
        row += 1
    out = []
    for i in range(row):
        out.append([Fraction(float(x)).limit_denominator(den) for x in R[i]])
    return out


def solve(problem: SdpProblem, config: Optional[SdpConfig] = None) -> SdpSolution:
    """Margin-form solve; a boundary optimum (λ* ≈ 0) triggers one round of
    facial reduction: the witness's numerical kernel is rounded to a rational
    subspace, imposed as G·v = 0, and λ is maximized on the complement."""
    cfg = config or SdpConfig()
    t0 = time.perf_counter()
    kernels: List[List[np.ndarray]] = [[] for _ in problem.blocks]
    rat_kernels: List[List[List[Fraction]]] = [[] for _ in problem.blocks]
    total_iters = 0
    for attempt in range(2):
        try:
            pv, lam, iters, status = _solve_margin(problem, cfg, kernels)
        except Exception as exc:  # solver blew up
            return SdpSolution(NUMERICAL_FAILURE, {}, [], float("-inf"), total_iters,
                               time.perf_counter() - t0, rat_kernels, str(exc))
        total_iters += iters
        if pv is None:
            return SdpSolution(NUMERICAL_FAILURE, {}, [], float("-inf"), total_iters,
                               time.perf_counter() - t0, rat_kernels, status)
        values = {nm: float(v) for nm, v in zip(problem.multipliers, pv)}
        wit = [b.witness(values) for b in problem.blocks]
        if lam > cfg.margin:
            return SdpSolution(CERTIFICATE_FOUND, values, wit, lam, total_iters,
                               time.perf_counter() - t0, rat_kernels, status)
        if attempt == 0 and cfg.facial_reduction and lam > -cfg.kernel_tol:
            found = False
            for bi, W in enumerate(wit):
                ker = _numeric_kernel(W, cfg.kernel_tol)
                if ker:
                    rk = rational_kernel(ker)
                    rat_kernels[bi] = rk
                    kernels[bi] = [np.array([float(x) for x in v]) for v in rk]
                    found = True
            if found:
                continue
        break
    return SdpSolution(NO_CERTIFICATE, values, wit, lam, total_iters,
                       time.perf_counter() - t0, rat_kernels, status)


# -- SDPA sparse export -------------------------------------------------------

def _fmt(v: Fraction) -> str:
    return repr(float(v))


def export_standard(problem: SdpProblem) -> str:
    """SDPA sparse text for  min 0  s.t.  Σ p_i F_i - F_0 ⪰ 0  with F_0 = -C, F_i = -A_i."""
    names = list(problem.multipliers)
    idx = {nm: i + 1 for i, nm in enumerate(names)}
    lines = [
        '"feasibility SDP: C - sum p_i A_i >= 0"',
        '* multipliers: ' + " ".join(names),
        '* blocks: ' + " ".join(b.name for b in problem.blocks),
        f"{len(names)} = mDIM",
        f"{len(problem.blocks)} = nBLOCK",
        " ".join(str(b.size) for b in problem.blocks) + " = bLOCKsTRUCT",
        "{" + ", ".join(["0"] * len(names)) + "}",
    ]
    entries = []
    for bi, b in enumerate(problem.blocks, start=1):
        for (i, j), v in sorted(b.C.items()):
            entries.append((0, bi, i + 1, j + 1, -v))
        for nm, Ai in b.A:
            for (i, j), v in sorted(Ai.items()):
                entries.append((idx[nm], bi, i + 1, j + 1, -v))
    entries.sort(key=lambda e: e[:4])
    for mat, blk, i, j, v in entries:
        if v:
            lines.append(f"{mat} {blk} {i} {j} {_fmt(v)}")
    return "\n".join(lines) + "\n"


def parse_standard(text: str) -> SdpProblem:
    """Inverse of :func:`export_standard` (values come back as exact binary fractions)."""
    names: List[str] = []
    bnames: List[str] = []
    body = []
    for line in text.splitlines():
        s = line.strip()
        if not s:
            continue
        if s.startswith("* multipliers:"):
            names = s.split(":", 1)[1].split()
        elif s.startswith("* blocks:"):
            bnames = s.split(":", 1)[1].split()
        elif s[0] in '"*':
            continue
        else:
            body.append(s)
    mdim = int(body[0].split()[0])
    nblock = int(body[1].split()[0])
    sizes = [int(x) for x in body[2].replace("=", " ").replace("bLOCKsTRUCT", "").replace(",", " ").split()]
    if not names:
        names = [f"p{i + 1}" for i in range(mdim)]
    if not bnames:
        bnames = [f"B{i + 1}" for i in range(nblock)]
    C = [dict() for _ in range(nblock)]
    A = [dict() for _ in range(nblock)]
    for s in body[4:]:
        mat, blk, i, j, v = s.split()
        mat, blk, i, j = int(mat), int(blk) - 1, int(i) - 1, int(j) - 1
        val = -Fraction(float(v))
        if mat == 0:
            C[blk][(i, j)] = val
        else:
            A[blk].setdefault(names[mat - 1], {})[(i, j)] = val
    blocks = []
    for b in range(nblock):
        pairs = tuple((nm, A[b][nm]) for nm in names if nm in A[b])
        blocks.append(SdpBlock(bnames[b], abs(sizes[b]), C[b], pairs))
    return SdpProblem(tuple(blocks), tuple(names))
