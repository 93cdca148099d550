"""Solve sigma_2(A_g) = K for a preset by degree check + continuation, then verify.

    python scripts/run_end_to_end.py --config configs/morse_a.toml
"""

import argparse
import sys
from pathlib import Path

from sigma2sphere.cli import dispatch, parse_config


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=Path(__file__).resolve().parent.parent / "configs" / "morse_a.toml")
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()
    cfg = parse_config(args.config.read_text(), base=args.config.parent)
    if args.out is not None:
        cfg.output_dir = args.out
    status, body = dispatch("solve", cfg)
    if status:
        print(f"solve failed ({status}): {body.get('error')}")
        return status
    deg = body["degree"]
    rep = body["verification"]
    print(f"deg G on B_{deg['r']} = {deg['degree']}  (zero-sign sum {deg['zero_sign_sum']}, {len(deg['zeros'])} zeros)")
    print(f"seed xi = {[round(float(c), 10) for c in body['seed_xi']]}")
    for key in ("residual_inf", "kazdan_warner_norm", "gauss_bonnet_error", "min_sigma1", "min_sigma2", "inegrad_slack"):
        print(f"{key:>20s} = {rep[key]:.3e}")
    print(f"functional F = {rep['functional']['F']:.12f}")
    print(f"runtime {body['runtime_seconds']:.0f}s; artifacts in {cfg.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
