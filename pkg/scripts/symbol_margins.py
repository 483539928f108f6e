"""Table of min over xi of |lambda_pm|^2 - (xi^2/4 + (m1^2 + m2^2)/8) for small modes."""

import argparse

import numpy as np

from bridgefloer.symbol import invertibility_scan


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-m", type=int, default=6)
    ap.add_argument("--xi-step", type=float, default=0.01)
    args = ap.parse_args()
    xi = np.round(np.arange(-10, 10 + args.xi_step / 2, args.xi_step), 12)
    scan = invertibility_scan(args.max_m, xi)
    print(f"N = {scan.N}; violated at m1^2 + m2^2 in {scan.k2_violations}")
    print("m1\\m2 " + " ".join(f"{m:>9d}" for m in range(args.max_m + 1)))
    for m1 in range(args.max_m + 1):
        print(f"{m1:5d} " + " ".join(f"{scan.margin_at(m1, m2):9.4f}" for m2 in range(args.max_m + 1)))


if __name__ == "__main__":
    main()
