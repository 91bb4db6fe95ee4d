#!/usr/bin/env python3
"""Classify the symmetry dimension of a corpus of reduced-form coefficients.

Prints a table of beta -> point-symmetry algebra dimension for the reduced
canonical system Y'' = -beta(x) Z, Z'' = beta(x) Y.
"""

import sys
import time

from csalin.symmetry import classify_beta

CORPUS = [
    "0", "1", "2", "x^(-2)", "x^(-4)", "(x+1)^(-4)",
    "1/x", "x^2", "x^2 + 1", "x^2 - 1", "exp(x)",
    "(x+2)/(x^2+1)", "(3*x^2+1)/(5+x)", "x/(x^2+4)",
    "(x^2+x+1)/(x+10)", "(2*x+3)/(x^2+x+7)",
]


def main() -> int:
    betas = sys.argv[1:] or CORPUS
    width = max(len(b) for b in betas) + 2
    print(f"{'beta':<{width}} dim  case")
    for beta in betas:
        t0 = time.time()
        cls = classify_beta(beta)
        dt = time.time() - t0
        print(f"{beta:<{width}} {cls.dimension:>3}  "
              f"{cls.case_label} ({dt:.2f}s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
