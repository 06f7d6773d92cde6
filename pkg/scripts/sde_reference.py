"""Monte Carlo reference for the constant-diffusion kinetic flow.

Simulates dv = sqrt(2) dW, dx = v dt from the origin and prints the second
moments at t = 1 next to the closed forms Var v = 2t, Cov = t^2,
Var x = 2t^3/3.  The frozen values quoted in the test suite came from the
default 10^6-path run of this script.
"""

import argparse
import time

import numpy as np


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--paths", type=int, default=1_000_000)
    parser.add_argument("--steps", type=int, default=1000)
    parser.add_argument("--t-end", type=float, default=1.0)
    parser.add_argument("--seed", type=int, default=20260808)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    dt = args.t_end / args.steps
    x = np.zeros(args.paths)
    v = np.zeros(args.paths)
    start = time.monotonic()
    for _ in range(args.steps):
        x += v * dt
        v += np.sqrt(2.0 * dt) * rng.standard_normal(args.paths)
    elapsed = time.monotonic() - start

    t = args.t_end
    cov = float(np.mean(x * v) - x.mean() * v.mean())
    print(f"paths={args.paths} steps={args.steps} t={t} ({elapsed:.1f}s)")
    print(f"var_v  = {v.var():.6f}   closed form 2t      = {2*t:.6f}")
    print(f"cov_xv = {cov:.6f}   closed form t^2     = {t**2:.6f}")
    print(f"var_x  = {x.var():.6f}   closed form 2t^3/3  = {2*t**3/3:.6f}")


if __name__ == "__main__":
    main()
