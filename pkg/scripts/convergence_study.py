"""Grid convergence on the unit disk against the exact solution.

    python3 scripts/convergence_study.py --levels 16 32 64 128 --out runs/convergence
"""
import argparse
import csv
import time
from pathlib import Path

import numpy as np

from hypgraph import geometry as geo
from hypgraph import solver as sol


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--levels", type=int, nargs="+", default=[16, 32, 64, 128], help="grid levels N, h = 1/N")
    ap.add_argument("--d-min", type=float, default=0.05, help="errors are measured where d_x >= d-min")
    ap.add_argument("--out", type=Path, default=Path("runs/convergence"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    rows = []
    for N in args.levels:
        t0 = time.perf_counter()
        s = sol.newton_solve(sol.build_grid(geo.disk(), 1.0 / N))
        dt = time.perf_counter() - t0
        far = s.dist >= args.d_min
        err = np.abs(s.u - sol.exact_ball_solution(1.0, s.points))
        rows.append((N, s.u.size, float(err[far].max()), float(err.max()), dt))
        print(f"h=1/{N:<4d} nodes={s.u.size:<6d} err(d>={args.d_min})={rows[-1][2]:.3e} err(all)={rows[-1][3]:.3e} {dt:.1f}s")

    with open(args.out / "convergence.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["N", "nodes", "max_err_far", "max_err_all", "order_far", "seconds"])
        for i, (N, m, ef, ea, dt) in enumerate(rows):
            order = "" if i == 0 else np.log(rows[i - 1][2] / ef) / np.log(N / rows[i - 1][0])
            w.writerow([N, m, ef, ea, order, dt])
    print(f"wrote {args.out / 'convergence.csv'}")


if __name__ == "__main__":
    main()
