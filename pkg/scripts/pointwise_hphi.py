"""Pointwise check of the H_phi bound for the quartic potential.

Sweeps the tail coefficient factor and reports the number of grid
violations and the worst excess. Factor 2 is the published coefficient
2A/(A-1); the proof's chain rule actually supports factor 4.

    python scripts/pointwise_hphi.py [--grid 201] [--box 6]
"""
import argparse

import numpy as np

from mlsilab.inequality import check_pointwise_bound, extract_hphi
from mlsilab.potential import quartic


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--grid", type=int, default=201)
    ap.add_argument("--box", type=float, default=6.0)
    args = ap.parse_args()
    pot = quartic()
    pts = np.linspace(-args.box, args.box, args.grid)
    print(f"{'factor':>6s} {'coeff':>8s} {'violations':>10s} {'max excess':>11s}  witness (x, y)")
    for factor in (2.0, 2.5, 3.0, 3.5, 4.0):
        prof = extract_hphi(pot, tail_factor=factor)
        rep = check_pointwise_bound(prof, pot, pts, pts)
        w = "-" if rep.witness is None else f"({rep.witness[0]:+.3f}, {rep.witness[1]:+.3f})"
        print(f"{factor:6.2f} {prof.coeff:8.3f} {rep.meta['violations']:10d} {rep.lhs:11.4g}  {w}")


if __name__ == "__main__":
    main()
