"""Fit g_s(z) - g(z) = m s + beta s^kappa on a shrinking s ladder.

Prints the fitted slope, the MLSI integrand it should reproduce and the
residual order for a handful of (potential, g, z) triples.
"""
import numpy as np

from mlsilab import functions
from mlsilab.conjugate import expansion_order
from mlsilab.potential import gaussian, power, quartic, sextic

TRIPLES = [
    ("gaussian", gaussian(), functions.bump(0.1, 0.0, 1 / np.sqrt(2)), 0.5),
    ("quartic", quartic(), functions.bump(0.3, 0.5, 1.0), 0.2),
    ("power4", power(4), functions.bump(0.2, -0.3, 0.8), 0.7),
    ("sextic", sextic(), functions.sine(0.1), -0.4),
    ("gaussian2d", gaussian(2), functions.bump(0.2, [0.3, -0.2], 1.0), [0.4, 0.1]),
]


def main():
    print(f"{'potential':12s} {'slope':>12s} {'integrand':>12s} {'rel gap':>9s} {'kappa':>6s}")
    for label, pot, g, z in TRIPLES:
        fit = expansion_order(g, pot, z)
        print(f"{label:12s} {fit.slope:12.8f} {fit.integrand:12.8f} {fit.relative_gap:9.2e} "
              f"{fit.kappa:6.3f}")


if __name__ == "__main__":
    main()
