"""Lambda^[s](xi) + 5 s G(xi) at a G-zero for a sequence of small s."""

import argparse

import numpy as np

from sigma2sphere import kspec
from sigma2sphere.gmap import find_zeros, gmap_on_ball
from sigma2sphere.grid import build_grid
from sigma2sphere.solver import inner_solve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--L", type=int, default=12)
    ap.add_argument("--s", type=float, nargs="+", default=[5e-4, 1e-3, 2e-3, 4e-3, 8e-3])
    args = ap.parse_args()
    K = kspec.morse_a()
    g = build_grid(args.L)
    xi = max(find_zeros(K, 0.8), key=lambda z: z.xi[4]).xi
    G = gmap_on_ball(K, xi, method="zonal")
    print(f"G-zero xi = {np.round(xi, 8).tolist()}, |G| = {np.linalg.norm(G):.1e}")
    prev = None
    for s in args.s:
        r = np.linalg.norm(inner_solve(K.deformed(s), xi, grid=g).Lambda + 5 * s * G)
        ratio = "" if prev is None else f"  ratio {r / prev:.4f}"
        print(f"s = {s:.1e}: |Lambda + 5sG| = {r:.4e}  / s^2 = {r / s**2:.6f}{ratio}")
        prev = r


if __name__ == "__main__":
    main()
