"""Fitted boundary exponents on the bundled domains.

    python3 scripts/exponent_sweep.py --h 0.0078125 --out runs/exponents
"""
import argparse
import csv
import math
from pathlib import Path

from hypgraph import geometry as geo
from hypgraph import regularity as reg
from hypgraph import solver as sol

# domain, anchor, boundary type a
CASES = {
    "disk": (geo.disk, (1.0, 0.0), 2.0),
    "ellipse": (geo.ellipse, (2.0, 0.0), 2.0),
    "square": (geo.unit_square, (0.5, 0.0), math.inf),
    "cap_a3": (lambda: geo.power_cap(3.0, 1.0, 1.0), (0.0, 0.0), 3.0),
    "cap_a4": (lambda: geo.power_cap(4.0, 1.0, 1.0), (0.0, 0.0), 4.0),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--h", type=float, default=1 / 128, help="grid spacing as a fraction of the diameter")
    ap.add_argument("--tau-min", type=float, default=None)
    ap.add_argument("--cases", nargs="+", default=list(CASES), choices=list(CASES))
    ap.add_argument("--out", type=Path, default=Path("runs/exponents"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    with open(args.out / "exponents.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["domain", "a", "predicted", "alpha", "half_window_alpha", "C", "unresolved"])
        for name in args.cases:
            make, anchor, a = CASES[name]
            dom = make()
            cfg = sol.SolverConfig(tau_min=args.tau_min) if args.tau_min else None
            s = sol.newton_solve(sol.build_grid(dom, args.h * geo.diameter(dom)), cfg)
            try:
                rep = reg.exponent_report(s, anchor, reg.predicted_exponent(a, dom.n))
            except reg.EstimationError as exc:
                print(f"{name:8s} skipped: {exc}")
                w.writerow([name, a, reg.predicted_exponent(a, dom.n), "", "", "", str(exc)])
                continue
            w.writerow([name, a, rep.predicted, rep.fit.alpha, rep.half_fit.alpha, rep.fit.C, rep.unresolved])
            print(f"{name:8s} a={a:<4} predicted={rep.predicted:.3f} alpha={rep.fit.alpha:.3f}")
    print(f"wrote {args.out / 'exponents.csv'}")


if __name__ == "__main__":
    main()
