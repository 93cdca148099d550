"""Degree of G, its zeros and the critical index sum of K for the shipped presets."""

import argparse

import numpy as np

from sigma2sphere import kspec
from sigma2sphere.errors import Sigma2Error
from sigma2sphere.gmap import brouwer_degree, critical_index_sum


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("presets", nargs="*", default=["morse_a", "linear_eps", "x5_squared", "constant6"])
    args = ap.parse_args()
    for name in args.presets:
        K = kspec.preset(name)
        try:
            rep = brouwer_degree(K)
        except Sigma2Error as exc:
            print(f"{name}: degree unavailable ({exc.code}): {exc}")
            continue
        try:
            idx = critical_index_sum(K)[0]
        except Sigma2Error as exc:
            idx = f"n/a ({exc.code})"
        print(f"{name}: r = {rep.r}, deg = {rep.degree}, zero-sign sum = {rep.zero_sign_sum}, index sum = {idx}")
        for h in rep.radius_history:
            vals = ", ".join(f"{v:+.4f}" for v in h["kronecker"])
            print(f"    r = {h['r']:.2f}: Kronecker [{vals}] -> {h['degree']}, min|G| = {h['boundary_min']:.3e}")
        for z in rep.zeros:
            print(f"    zero xi = {np.round(z.xi, 6).tolist()}, sign {z.sign:+d}, det {z.det:.2e}")


if __name__ == "__main__":
    main()
