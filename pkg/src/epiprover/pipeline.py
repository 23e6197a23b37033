"""End-to-end proof search: target → constraints → reduction → SDP → exact certificate."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .certificate import (
    DEFAULT_LADDER,
    Certificate,
    IdentityMismatch,
    NotPSD,
    RationalizationFailed,
    build_certificate,
    rationalize,
)
from .constraints import Constraint, constraint_suite, dedup, pair_family
from .reduction import QuadBasis, QuadraticForm, SplitSuite, Step5Failure, eliminate_target, quad_basis, split_suite
from .sdp import CERTIFICATE_FOUND, SdpConfig, SdpProblem, SdpSolution, assemble, assemble_joint, solve
from .targets import COSTA_CONCRETE, COSTA_GENERAL, DMN, NONNEGATIVE, TargetProblem, make_problem


@dataclass
class ProveConfig:
    kind: str = DMN
    m: int = 3
    n: int = 1
    sdp: SdpConfig = field(default_factory=SdpConfig)
    den_bound: Optional[int] = None
    ladder: Tuple[int, ...] = DEFAULT_LADDER


@dataclass
class Prepared:
    problem: TargetProblem
    basis: QuadBasis
    constraints: List[Constraint]
    split: SplitSuite
    sdp: SdpProblem
    # per block: (name, target label, signed C, [(multiplier, R̂)])
    blocks: List[Tuple[str, str, Dict[Optional[str], QuadraticForm], List[Tuple[str, QuadraticForm]]]]
    stats: Dict[str, object]


@dataclass
class ProveResult:
    ok: bool
    step: str                       # "done" or the failing step
    message: str
    stats: Dict[str, object]
    solution: Optional[SdpSolution] = None
    certificate: Optional[Certificate] = None
    values: Dict[str, Fraction] = field(default_factory=dict)


def _row_names(prefix: str, split: SplitSuite) -> List[str]:
    nq = len(split.quadratic)
    rows = [f"{prefix}q{i + 1}" for i in range(nq)]
    rows += [f"{prefix}i{i + 1}" for i in range(len(split.hat_rows) - nq)]
    return rows


def prepare(kind: str, m: int = 3, n: int = 1) -> Prepared:
    t0 = time.perf_counter()
    problem = make_problem(kind, m, n)
    if kind == COSTA_GENERAL:
        basis = quad_basis(2, 2)
        constraints = dedup(pair_family())
    else:
        basis = quad_basis(problem.m, n)
        constraints = constraint_suite(problem.m, n)
    split = split_suite(constraints, basis)
    sign = problem.sign
    blocks = []
    if kind == COSTA_GENERAL:
        sdp_blocks = []
        for label, parts in problem.parts.items():
            E = {k: eliminate_target(f, split)[0].scale(sign) for k, f in parts.items()}
            rows = [(nm, q) for nm, q in zip(_row_names(label + ".", split), split.hat_rows)]
            # the free scalars enter as C − Σ c_k (−sign·Ê_k)
            pairs = [(k, E[k].scale(-1)) for k in parts if k is not None] + rows
            blocks.append((label, label, E, pairs))
            sdp_blocks.append((label, E[None], pairs))
        sdp = assemble_joint(sdp_blocks, shared=[k for k in problem.parts["L1"] if k is not None])
    else:
        E, _ = eliminate_target(problem.target, split)
        names = _row_names("", split)
        label = "F" if kind == DMN else "J2"
        pairs = list(zip(names, split.hat_rows))
        blocks.append(("B1", label, {None: E.scale(sign)}, pairs))
        sdp = assemble(E, split.hat_rows, problem.sense, names)
    stats = {
        "kind": kind, "m": problem.m, "n": n,
        "vars": len(basis), "n1": len(constraints),
        "c1": len(split.quadratic), "c2": len(split.nonquadratic),
        "intrinsic": len(split.intrinsic), "total": len(split.quadratic) + len(split.intrinsic),
        "n2": split.independent_count, "prep_seconds": round(time.perf_counter() - t0, 3),
    }
    return Prepared(problem, basis, constraints, split, sdp, blocks, stats)


def certify(prep: Prepared, values: Dict[str, Fraction]) -> Certificate:
    """Exact certificate at given rational multipliers (free scalars included)."""
    params = {k: values.get(k, Fraction(0)) for k in prep.problem.parts.get("L1", {}) if k is not None}
    blocks = []
    for name, label, E, pairs in prep.blocks:
        C = E[None]
        for k, q in E.items():
            if k is not None:
                C = C + q.scale(params[k])
        rows = [(nm, q) for nm, q in pairs if nm not in params]
        blocks.append((name, label, C, rows))
    return build_certificate(prep.problem.kind, prep.problem.m, prep.problem.n, prep.problem.sense,
                             prep.basis, blocks, values, prep.constraints, params)


def prove(config: ProveConfig) -> ProveResult:
    t0 = time.perf_counter()
    try:
        prep = prepare(config.kind, config.m, config.n)
    except Step5Failure as exc:
        return ProveResult(False, "step5", str(exc), {})
    stats = dict(prep.stats)
    sol = solve(prep.sdp, config.sdp)
    stats.update(lam=sol.lam, sdp_iterations=sol.iterations, sdp_seconds=round(sol.seconds, 3), sdp_status=sol.status)
    if sol.status != CERTIFICATE_FOUND:
        stats["seconds"] = round(time.perf_counter() - t0, 3)
        return ProveResult(False, "step6", f"SDP ended with {sol.status} (lambda* = {sol.lam:.3e})", stats, sol)
    try:
        point = rationalize(prep.sdp, sol, config.den_bound, config.ladder)
    except RationalizationFailed as exc:
        stats["seconds"] = round(time.perf_counter() - t0, 3)
        return ProveResult(False, "rationalize", f"{exc} (pivot {exc.pivot})", stats, sol)
    stats["den_bound"] = point.bound
    stats["max_denominator"] = max((v.denominator for v in point.values.values()), default=1)
    try:
        cert = certify(prep, point.values)
    except (NotPSD, IdentityMismatch) as exc:
        stats["seconds"] = round(time.perf_counter() - t0, 3)
        return ProveResult(False, "step7", str(exc), stats, sol, values=point.values)
    stats["seconds"] = round(time.perf_counter() - t0, 3)
    return ProveResult(True, "done", "certificate verified", stats, sol, cert, point.values)
