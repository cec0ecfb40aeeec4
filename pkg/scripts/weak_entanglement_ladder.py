"""Corrected transmission at a fixed success-probability budget as chi -> 0.

Closed-form only: the ideal-amplifier identity is exact, and the Fock
cutoffs at the required gains (G ~ 1e4 and beyond) are out of reach.

    python scripts/weak_entanglement_ladder.py --eta 0.01 --budget 1e-4
"""

import argparse

from cvqec.protocol import best_transmission, fixed_budget_ladder


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eta", type=float, default=0.01)
    ap.add_argument("--budget", type=float, default=1e-4)
    ap.add_argument("--chis", default="0.5,0.3,0.2,0.1,0.05")
    a = ap.parse_args()
    print("chi,G,eta_ec,eta_ec_limit")
    for chi, g, t in fixed_budget_ladder(a.eta, [float(c) for c in a.chis.split(",")], a.budget):
        print(f"{chi:.12g},{g:.12g},{t:.12g},{best_transmission(a.eta, chi):.12g}")


if __name__ == "__main__":
    main()
