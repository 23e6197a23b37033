"""Print the counts table (Vars, N1, C1, C2, intrinsic, total, N2, time) for every supported instance.

    python3 scripts/counts_table.py            # all instances, (3,4) included
    python3 scripts/counts_table.py --quick    # skip (3,4)
"""

import argparse
import time

from epiprover.pipeline import prepare
from epiprover.targets import COSTA_CONCRETE, COSTA_GENERAL, DMN

INSTANCES = [(DMN, 3, 1), (DMN, 4, 1), (DMN, 5, 1), (DMN, 3, 2), (DMN, 3, 3), (DMN, 4, 2), (DMN, 3, 4),
             (COSTA_CONCRETE, 2, 1), (COSTA_CONCRETE, 2, 2), (COSTA_GENERAL, 2, 2)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()
    cols = ["problem", "Vars", "N1", "C1", "C2", "intrinsic", "total", "N2", "time"]
    print("{:<20}".format(cols[0]) + "".join(f"{c:>10}" for c in cols[1:]))
    for kind, m, n in INSTANCES:
        if args.quick and (m, n) == (3, 4):
            continue
        t = time.perf_counter()
        s = prepare(kind, m, n).stats
        dt = time.perf_counter() - t
        label = f"{kind}({m},{n})" if kind != COSTA_GENERAL else kind
        vals = [s["vars"], s["n1"], s["c1"], s["c2"], s["intrinsic"], s["total"], s["n2"], f"{dt:.2f}s"]
        print(f"{label:<20}" + "".join(f"{v:>10}" for v in vals))


if __name__ == "__main__":
    main()
