"""Sweep the doubling-geometry covering check over its parameters.

For each (delta, R) pair the script reports whether the sufficient condition
delta >= R^2 + (4^3/(3 omega^2)) (4R)^{1/3} holds and, if so, whether the
sampled inclusion checks find any counterexample.
"""

import argparse

from kfplab.geometry import covering_threshold, verify_covering


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--omega", type=float, default=0.25)
    parser.add_argument("--samples", type=int, default=4096)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print("delta,R,threshold,hypothesis,claim_a,claim_b")
    for delta in (0.1, 0.2, 0.3, 0.5):
        for r_plus in (1e-13, 1e-11, 1e-9, 1e-3, 0.1):
            if r_plus > delta**0.5:
                continue
            rep = verify_covering(
                delta, r_plus, r0=min(0.1, delta**0.5), omega=args.omega,
                n_samples=args.samples, seed=args.seed,
            )
            print(
                f"{delta},{r_plus},{covering_threshold(r_plus, args.omega):.4g},"
                f"{rep.claim_b_hypothesis_met},{rep.verdict_a},{rep.verdict_b}"
            )


if __name__ == "__main__":
    main()
