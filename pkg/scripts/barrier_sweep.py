"""Sampled supersolution margins for the power and local barrier families.

    python3 scripts/barrier_sweep.py --samples 20000 --out runs/barriers
"""
import argparse
import csv
import itertools
from pathlib import Path

from hypgraph import barriers as bar
from hypgraph import geometry as geo


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--samples", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("runs/barriers"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    with open(args.out / "barriers.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["family", "a", "eta_or_b", "n", "eps_or_A", "max_F", "min_boundary_W", "pass"])
        for a, eta, n in itertools.product([2.5, 3.0, 4.0, 10.0], [0.5, 1.0, 2.0], [2, 3]):
            dom = geo.power_cap(a, eta, 0.5, n=n)
            eps = bar.choose_epsilon(a, eta, geo.diameter(dom))
            rep = bar.certify_supersolution(bar.BarrierParams.power(a, eps, n), dom, samples=args.samples, seed=args.seed)
            w.writerow(["power", a, eta, n, eps, rep.max_F, rep.min_boundary_W, rep.passed])
        for a, b, n in itertools.product([1.2, 1.5, 1.8], [2.2, 2.5, 2.8], [2, 3]):
            scaling = bar.choose_A(a, 1.0, 1.0, n, b)
            dom = geo.power_cap(a, 1.0, scaling.A, n=n)
            rep = bar.certify_supersolution(bar.BarrierParams.local(a, b, n), dom, samples=args.samples, seed=args.seed)
            w.writerow(["local", a, b, n, scaling.A, rep.max_F, rep.min_boundary_W, rep.passed])
        for n in range(2, 10):
            fr = bar.certify_flat_barrier(n)
            w.writerow(["flat", "inf", "", n, "", fr.max_lhs, "", fr.passed])
    print(f"wrote {args.out / 'barriers.csv'}")


if __name__ == "__main__":
    main()
