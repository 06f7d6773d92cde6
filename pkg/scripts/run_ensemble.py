"""Rough-coefficient ensemble experiment.

Solves the kinetic equation over an ensemble of seeded checkerboard fields,
measures the Harnack quotient, the integrability-gain constant and the fitted
oscillation-decay exponent on each run, and prints a CSV table plus the
ensemble spread.  Doubling --nx/--nv and halving --dt probes the stability of
the measured constants under refinement.
"""

import argparse
import sys
import time

import numpy as np

from kfplab.fields import CheckerboardRecipe, EllipticityBounds, sample_field
from kfplab.geometry import Cylinder, KineticPoint
from kfplab.probes import HarnackParams, gain_probe, harnack_probe, holder_fit
from kfplab.solver import SolverConfig, solve
from kfplab.trajectory import PhaseGrid, PhaseGridFunction


def initial_bump(grid, cx, sx, sv, floor):
    x, v = grid.meshes()
    qx = np.sum((x - cx) ** 2, axis=-1) / sx**2
    qv = np.sum(v**2, axis=-1) / sv**2
    amp = 1.0 / (2 * np.pi * sx * sv)
    return PhaseGridFunction(grid, amp * np.exp(-0.5 * (qx + qv)) + floor, 0.0)


def one_run(seed, nx, nv, dt):
    grid = PhaseGrid(d=1, x_extent=5.0, nx=nx, v_max=4.0, nv=nv)
    field = sample_field(
        CheckerboardRecipe(cell=1.0, b_max=2.0, s_max=0.0),
        EllipticityBounds(0.5, 2.0), seed=seed, d=1,
    )
    cfg = SolverConfig(grid=grid, dt=dt, t_end=1.0, field=field,
                       snapshot_stride=max(nx, 64), snapshot_tail=0.014)
    traj = solve(cfg, initial_bump(grid, 2.5, 0.2, 0.35, 0.01))
    harnack = harnack_probe(traj, HarnackParams(
        r=0.25, delta=0.3, rho1=0.4, rho2=0.6, q=2.0,
        center=KineticPoint.of(2.5, 0.0, 0.9),
    ))
    top = KineticPoint.of(2.5, 0.0, 1.0)
    gain = gain_probe(traj, Cylinder(top, 0.7), Cylinder(top, 0.95))
    holder = holder_fit(traj, top, omega=0.9, k_levels=3, r_base=0.45)
    return (
        harnack.constants["c_emp"],
        gain.constants["cbar"],
        holder.constants["alpha_fit"],
    )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=20, help="ensemble size")
    parser.add_argument("--nx", type=int, default=64)
    parser.add_argument("--nv", type=int, default=64)
    parser.add_argument("--dt", type=float, default=1 / 8192)
    parser.add_argument("--seed0", type=int, default=100)
    args = parser.parse_args()

    print("seed,c_emp,gain_cbar,alpha_fit")
    rows = []
    start = time.monotonic()
    for i in range(args.size):
        seed = args.seed0 + i
        c_emp, cbar, alpha = one_run(seed, args.nx, args.nv, args.dt)
        rows.append((c_emp, cbar, alpha))
        print(f"{seed},{c_emp!r},{cbar!r},{alpha!r}")
    arr = np.array(rows)
    print(f"# elapsed {time.monotonic() - start:.0f}s", file=sys.stderr)
    for j, name in enumerate(("c_emp", "gain_cbar", "alpha_fit")):
        col = arr[:, j]
        print(
            f"# {name}: min {col.min():.4g}  max {col.max():.4g}  "
            f"median {np.median(col):.4g}",
            file=sys.stderr,
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
