"""Command line entry points.

Exit codes: 0 success, 1 proof or verification failure, 2 usage error,
3 resource cap hit.  ``EPIPROVER_THREADS`` caps BLAS threads.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from fractions import Fraction
from typing import List, Optional

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3


def _threads():
    t = os.environ.get("EPIPROVER_THREADS")
    if t:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, t)


def _kind(args) -> str:
    from .targets import COSTA_CONCRETE, COSTA_GENERAL, DMN

    if getattr(args, "problem", None) == "costa" or args.kind in ("costa", COSTA_CONCRETE, COSTA_GENERAL):
        return COSTA_GENERAL if getattr(args, "general", False) or args.kind == COSTA_GENERAL else COSTA_CONCRETE
    if args.kind in ("dmn", DMN):
        return DMN
    raise SystemExit(f"unknown kind {args.kind!r}")


def _common(p: argparse.ArgumentParser, problem: bool = True):
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--kind", default="dmn", help="dmn, costa or CostaGeneral")
    p.add_argument("--general", action="store_true", help="Costa's EPI for all n via the two-index problem")
    if problem:
        p.add_argument("problem", nargs="?", choices=["dmn", "costa"], default=None)


def _sdp_flags(p: argparse.ArgumentParser):
    p.add_argument("--tol", type=float, default=1e-8, help="feasibility tolerance")
    p.add_argument("--margin", type=float, default=1e-7, help="required lambda* for a certificate")
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--time-limit", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="epiprover", description="SOS certificates for entropy-derivative inequalities")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("prove", help="run the full pipeline and write a verified certificate")
    _common(p)
    _sdp_flags(p)
    p.add_argument("--den-bound", type=int, default=None, help="first denominator bound of the rounding ladder")
    p.add_argument("--out", default=None, help="certificate path")
    p.add_argument("--dump-sdpa", default=None, help="also write the SDP in SDPA sparse format")

    p = sub.add_parser("stats", help="Vars / N1 / intrinsic / N2 for one instance")
    _common(p)

    p = sub.add_parser("verify", help="check a certificate file exactly")
    p.add_argument("path")

    p = sub.add_parser("export", help="write the SDP in SDPA sparse format")
    _common(p)
    p.add_argument("--out", default=None)

    p = sub.add_parser("target", help="print the target form")
    _common(p)

    p = sub.add_parser("constraints", help="generate the constraint pool")
    _common(p)
    p.add_argument("--dump", action="store_true", help="print every constraint with its provenance")

    p = sub.add_parser("reduce", help="split the pool and eliminate the target")
    _common(p)
    p.add_argument("--report", action="store_true")

    p = sub.add_parser("oracle", help="exact Gaussian value of the target")
    _common(p)
    p.add_argument("--variances", default="1", help="comma separated rationals, one per coordinate")
    return ap


def _stats_line(s) -> str:
    return (f"{s['kind']} m={s['m']} n={s['n']} Vars={s['vars']} N1={s['n1']} C1={s['c1']} C2={s['c2']} "
            f"intrinsic={s['intrinsic']} total={s['total']} N2={s['n2']}")


def cmd_prove(args) -> int:
    from .certificate import serialize
    from .pipeline import ProveConfig, prepare, prove
    from .sdp import SdpConfig, export_standard

    kind = _kind(args)
    cfg = ProveConfig(kind=kind, m=args.m, n=args.n,
                      sdp=SdpConfig(feasibility_tol=args.tol, margin=args.margin, max_iters=args.max_iters,
                                    seed=args.seed, time_limit=args.time_limit),
                      den_bound=args.den_bound)
    if args.dump_sdpa:
        with open(args.dump_sdpa, "w", encoding="utf-8") as fh:
            fh.write(export_standard(prepare(kind, args.m, args.n).sdp))
    res = prove(cfg)
    s = res.stats
    if s:
        print(_stats_line(s))
    if "lam" in s:
        print(f"sdp: status={s['sdp_status']} lambda*={s['lam']:.6e} iterations={s['sdp_iterations']} "
              f"time={s['sdp_seconds']}s")
    if not res.ok:
        print(f"FAIL at {res.step}: {res.message}")
        return EXIT_FAIL
    print(f"rationalized at denominator bound {s['den_bound']} (max denominator {s['max_denominator']})")
    text = serialize(res.certificate)
    out = args.out or f"cert_{kind}_{cfg.m if kind == 'Dmn' else 2}_{args.n}.txt"
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(f"certificate verified; written to {out} ({len(text)} bytes, {s['seconds']}s total)")
    return EXIT_OK


def cmd_stats(args) -> int:
    from .pipeline import prepare

    t0 = time.perf_counter()
    prep = prepare(_kind(args), args.m, args.n)
    print(_stats_line(prep.stats) + f" time={time.perf_counter() - t0:.2f}s")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .certificate import parse, verify
    from .diffalg import ParseError

    try:
        with open(args.path, encoding="utf-8") as fh:
            cert = parse(fh.read())
    except OSError as exc:
        print(f"cannot read {args.path}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"FAIL: parse error at line {exc.line}, column {exc.col}: {exc}")
        return EXIT_FAIL
    rep = verify(cert)
    if rep.ok:
        print(f"PASS: {cert.kind} m={cert.m} n={cert.n} ({len(cert.blocks)} block(s))")
        return EXIT_OK
    for r in rep.reasons:
        print(f"FAIL: {r}")
    for name, res in rep.residuals.items():
        print(f"residual[{name}]:")
        print(res.to_text(), end="")
    return EXIT_FAIL


def cmd_export(args) -> int:
    from .pipeline import prepare
    from .sdp import export_standard

    text = export_standard(prepare(_kind(args), args.m, args.n).sdp)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_target(args) -> int:
    from .targets import make_problem

    prob = make_problem(_kind(args), args.m, args.n)
    print(f"# sense {prob.sense}")
    if prob.target is not None:
        sys.stdout.write(prob.target.to_text())
    else:
        for label, parts in prob.parts.items():
            for k, f in parts.items():
                print(f"# {label} {k or 'constant'}")
                sys.stdout.write(f.to_text())
    return EXIT_OK


def cmd_constraints(args) -> int:
    import json

    from .constraints import dedup, pair_family, raw_suite
    from .targets import COSTA_GENERAL

    kind = _kind(args)
    if kind == COSTA_GENERAL:
        raw = pair_family()
    else:
        raw = raw_suite(2 if kind != "Dmn" else args.m, args.n)
    pool = dedup(raw)
    print(f"raw={len(raw)} distinct={len(pool)}")
    if args.dump:
        for c in pool:
            print("# " + json.dumps(c.provenance, sort_keys=True))
            sys.stdout.write(c.form.to_text())
    return EXIT_OK


def cmd_reduce(args) -> int:
    from .pipeline import prepare

    prep = prepare(_kind(args), args.m, args.n)
    print(_stats_line(prep.stats))
    if args.report:
        for i, q in enumerate(prep.split.quadratic, 1):
            print(f"Rhat{i} = {q.pretty()}")
        for name, _, E, _ in prep.blocks:
            for k, q in E.items():
                print(f"Ehat[{name}{'' if k is None else ':' + k}] = {q.pretty()}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    from .oracle import GaussianSpec, sign_check
    from .targets import make_problem

    vs = tuple(Fraction(x) for x in args.variances.split(","))
    if len(vs) == 1 and args.n > 1:
        vs = vs * args.n
    prob = make_problem(_kind(args), args.m, len(vs))
    if prob.target is None:
        print("oracle needs a concrete target", file=sys.stderr)
        return EXIT_USAGE
    (chk,) = sign_check(prob, [GaussianSpec(vs)])
    print(f"value={chk.value} sense={prob.sense} {'ok' if chk.ok else 'VIOLATED'}")
    return EXIT_OK if chk.ok else EXIT_FAIL


COMMANDS = {
    "prove": cmd_prove, "stats": cmd_stats, "verify": cmd_verify, "export": cmd_export,
    "target": cmd_target, "constraints": cmd_constraints, "reduce": cmd_reduce, "oracle": cmd_oracle,
}


def main(argv: Optional[List[str]] = None) -> int:
    _threads()
    args = build_parser().parse_args(argv)
    from .constraints import UnsupportedProblem
    from .targets import ResourceLimit

    try:
        return COMMANDS[args.cmd](args)
    except (UnsupportedProblem, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ResourceLimit, MemoryError) as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return EXIT_USAGE
        raise


if __name__ == "__main__":
    sys.exit(main())
