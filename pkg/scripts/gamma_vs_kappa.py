#!/usr/bin/env python3
"""Sweep the damping rate of the displaced oscillator and record the certified
exponential rate gamma.

For H = (a - alpha)†(a - alpha), L = sqrt(kappa)(a - alpha), V = H the
certified rate should track kappa itself; deviations expose truncation or
tolerance artifacts. Writes a small CSV to stdout.
"""

import argparse

import numpy as np

from qds.fock import ladder
from qds.gksl import SystemModel
from qds.lyapunov import classify_stability


def displaced_model(dim: int, alpha: complex, kappa: float) -> tuple[SystemModel, np.ndarray]:
    a = ladder(dim)
    b = a - alpha * np.eye(dim)
    h = b.conj().T @ b
    return SystemModel(dim=dim, hamiltonian=h, couplings=(np.sqrt(kappa) * b,)), h


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dim", type=int, default=30)
    parser.add_argument("--alpha", type=float, default=1.0)
    parser.add_argument("--kappas", default="0.25,0.5,1.0,2.0,4.0")
    args = parser.parse_args()

    print("kappa,gamma,verdict")
    for kappa in (float(x) for x in args.kappas.split(",")):
        model, v = displaced_model(args.dim, args.alpha, kappa)
        report = classify_stability(model, v, boundary_levels=2)
        print(f"{kappa:.17g},{report.gamma:.17g},{report.verdict}")


if __name__ == "__main__":
    main()
