"""Command-line front end binding fields, solver and probes into reproducible
experiments.

Subcommands: run (solve + probes + report), solve (PDE only), probe (re-run
probes on stored snapshots), landau (coefficient fields and bound checks from
a stored velocity profile), geometry (covering and group-law self-tests),
iterate (recursion sweeps to CSV).

Exit codes: 0 success, 2 invalid config, 3 solver failure, 4 invariant
violation.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import iteration
from .config import ConfigError, build_field, build_initial, build_solver_config, load_config, run_probe
from .fields import certify_field
from .geometry import GalileanTransform, KineticPoint, verify_covering
from .landau import (
    LandauParams,
    MomentBounds,
    VelocityGrid,
    VelocityGridFunction,
    check_coefficient_bounds,
    maxwellian,
)
from .probes import lower_order_free, source_nonnegative
from .storage import (
    canonical_json,
    config_digest,
    load_trajectory,
    read_velocity_profile,
    save_trajectory,
    write_report,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_INVARIANT = 4


def _out_dir(cfg: dict, args) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get("KFPLAB_OUT")
    if env:
        return Path(env)
    return Path(cfg.get("output", {}).get("dir", "out"))


def _invariants(cfg: dict, traj, cert) -> list[dict]:
    """Hard invariant checks, recomputable identically from stored artifacts."""
    out = [
        {"name": "certify_field", "value": cert.verdict, "passed": cert.verdict == "ok"}
    ]
    ledger = traj.ledger
    if ledger is None:
        return out
    field = traj.field
    mass = ledger.column("mass")
    fmin = ledger.column("fmin")
    l2 = ledger.column("l2")
    scale = max(1.0, float(ledger.column("fmax")[0]))
    if lower_order_free(field):
        drift = float(np.max(np.abs(mass - mass[0]))) / max(1.0, abs(float(mass[0])))
        out.append({"name": "mass_conservation", "value": drift, "passed": drift <= 1e-12})
        growth = float(np.max(np.diff(l2))) / max(1.0, float(l2[0]))
        out.append({"name": "l2_nonincreasing", "value": growth, "passed": growth <= 1e-12})
    initial = cfg.get("solver", {}).get("initial", {"kind": "zero"})
    if initial.get("kind") in ("zero", "constant", "gaussian") and source_nonnegative(field):
        worst = float(fmin.min())
        out.append({"name": "positivity", "value": worst, "passed": worst >= -1e-12 * scale})
    return out


def _report(cfg: dict, probes: list[dict], invariants: list[dict]) -> dict:
    return {
        "schema_version": 1,
        "config_digest": config_digest(cfg),
        "probes": probes,
        "invariants": invariants,
    }


def _cmd_solve(cfg: dict, args, with_probes: bool) -> int:
    from .solver import solve

    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    field = build_field(cfg, seed_override=args.seed)
    solver_cfg = build_solver_config(cfg, field)
    f0 = build_initial(solver_cfg.grid, cfg.get("solver", {}).get("initial"))
    cert = certify_field(field, seed=int(seed))
    try:
        traj = solve(solver_cfg, f0)
    except np.linalg.LinAlgError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    out = _out_dir(cfg, args)
    out.mkdir(parents=True, exist_ok=True)
    digest = config_digest(cfg)
    save_trajectory(out, traj, seed=int(seed), digest=digest)

    probe_reports = []
    if with_probes:
        for spec in cfg.get("probes", []):
            try:
                probe_reports.append(run_probe(traj, spec).to_dict())
            except ValueError as exc:
                print(f"probe {spec.get('name')!r} rejected: {exc}", file=sys.stderr)
                return EXIT_CONFIG
        _write_probe_csv(out / "probes.csv", probe_reports)
    invariants = _invariants(cfg, traj, cert)
    write_report(out / "report.json", _report(cfg, probe_reports, invariants))
    if not all(item["passed"] for item in invariants):
        print("invariant violation; see report.json", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def _write_probe_csv(path, probe_reports: list[dict]) -> None:
    """Flat probe/constant table (ladders included) for external plotting."""
    lines = ["probe,constant,value"]
    for entry in probe_reports:
        for key in sorted(entry["constants"]):
            lines.append(f"{entry['name']},{key},{entry['constants'][key]!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def _cmd_probe(cfg: dict, args) -> int:
    out = _out_dir(cfg, args)
    try:
        traj = load_trajectory(out)
    except (OSError, ValueError) as exc:
        print(f"cannot load snapshots from {out}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    field = traj.field if traj.field is not None else build_field(cfg, seed_override=args.seed)
    cert = certify_field(field, seed=int(seed))
    probe_reports = []
    for spec in cfg.get("probes", []):
        try:
            probe_reports.append(run_probe(traj, spec).to_dict())
        except ValueError as exc:
            print(f"probe {spec.get('name')!r} rejected: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    invariants = _invariants(cfg, traj, cert)
    write_report(out / "report.json", _report(cfg, probe_reports, invariants))
    if not all(item["passed"] for item in invariants):
        return EXIT_INVARIANT
    return EXIT_OK


def _cmd_landau(cfg: dict, args) -> int:
    section = cfg.get("landau")
    if section is None:
        print("config has no landau section", file=sys.stderr)
        return EXIT_CONFIG
    d = int(section.get("d", 3))
    gamma = float(section["gamma"])
    params = LandauParams(
        d=d, gamma=gamma,
        a_const=section.get("a_const", 1.0),
        b_const=section.get("b_const", 1.0),
        c_const=section.get("c_const", 1.0),
    )
    if "input" in section and section["input"]:
        values, v_max = read_velocity_profile(section["input"])
        grid = VelocityGrid(v_max=v_max, n=values.shape[0], d=d)
        profile = VelocityGridFunction(grid, values)
    else:
        spec = section.get("profile", {})
        grid = VelocityGrid(
            v_max=spec.get("v_max", 6.0), n=spec.get("n", 16), d=d
        )
        profile = maxwellian(grid, sigma=spec.get("sigma", 1.0))
    bounds_spec = section.get("bounds", {"m1": 0.1, "m0": 10.0, "e0": 10.0, "h0": 10.0})
    bounds = MomentBounds(**bounds_spec)
    try:
        report = check_coefficient_bounds(profile, params, bounds)
    except ValueError as exc:
        print(f"bound check rejected: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    m, e, h = report.moments
    out = _out_dir(cfg, args)
    out.mkdir(parents=True, exist_ok=True)
    payload = _report(cfg, [{
        "name": "landau_bounds",
        "params": {"gamma": gamma, "d": d, "n": grid.n, "v_max": grid.v_max},
        "constants": report.to_dict(),
        "verdict": report.verdict,
    }], [])
    write_report(out / "landau_report.json", payload)
    print(canonical_json({"kappa": report.kappa, "det_ratio_min": report.det_ratio_min,
                          "moments": [m, e, h]}))
    return EXIT_OK if report.verdict == "ok" else EXIT_INVARIANT


def _cmd_geometry(cfg: dict, args) -> int:
    section = cfg.get("geometry", {}) if cfg else {}
    seed = args.seed if args.seed is not None else (cfg.get("seed", 0) if cfg else 0)
    n_checks = int(section.get("n_selfchecks", 2000))
    rng = np.random.default_rng(int(seed))
    d = int(section.get("d", 1))
    worst = 0.0
    for _ in range(n_checks):
        z0 = KineticPoint(rng.normal(size=d), rng.normal(size=d), float(rng.normal()))
        z1 = KineticPoint(rng.normal(size=d), rng.normal(size=d), float(rng.normal()))
        z = KineticPoint(rng.normal(size=d), rng.normal(size=d), float(rng.normal()))
        t0, t1 = GalileanTransform(z0), GalileanTransform(z1)
        left = t0.apply(t1.apply(z))
        right = GalileanTransform(t0.apply(z1)).apply(z)
        back = t0.apply_inverse(t0.apply(z))
        worst = max(
            worst,
            float(np.max(np.abs(left.x - right.x))),
            abs(left.t - right.t),
            float(np.max(np.abs(back.x - z.x))),
            float(np.max(np.abs(back.v - z.v))),
            abs(back.t - z.t),
        )
    group_ok = worst <= 1e-10
    covering = verify_covering(
        delta=section.get("delta", 0.2),
        r_plus=section.get("R", 1e-11),
        r0=section.get("r0", 0.1),
        omega=section.get("omega", 0.25),
        n_samples=int(section.get("n_samples", 4096)),
        d=d,
        seed=int(seed),
    )
    out = _out_dir(cfg, args)
    out.mkdir(parents=True, exist_ok=True)
    payload = _report(cfg, [
        {"name": "group_law", "params": {"n_checks": n_checks},
         "constants": {"worst_deviation": worst},
         "verdict": "ok" if group_ok else "violated"},
        {"name": "covering", "params": covering.params,
         "constants": {"claim_a_counterexamples": float(len(covering.claim_a_counterexamples)),
                       "claim_b_counterexamples": float(len(covering.claim_b_counterexamples)),
                       "claim_b_threshold": covering.claim_b_threshold},
         "verdict": f"a:{covering.verdict_a};b:{covering.verdict_b}"},
    ], [])
    write_report(out / "geometry_report.json", payload)
    failed = (not group_ok) or covering.verdict_a == "fail" or covering.verdict_b == "fail"
    return EXIT_INVARIANT if failed else EXIT_OK


def _cmd_iterate(cfg: dict, args) -> int:
    section = cfg.get("iterate", {}) if cfg else {}
    out = _out_dir(cfg, args)
    out.mkdir(parents=True, exist_ok=True)
    degiorgi = section.get("degiorgi", [
        {"beta": 1.0, "alpha": 2.0, "v0": 0.5},
        {"beta": 4.0, "alpha": 1.5, "v0": 1e-8},
    ])
    lines = ["beta,alpha,v0,gamma,verdict"]
    for case in degiorgi:
        rep = iteration.degiorgi_threshold(case["beta"], case["alpha"], case["v0"])
        lines.append(f"{case['beta']!r},{case['alpha']!r},{case['v0']!r},{rep.gamma!r},{rep.verdict}")
    (out / "degiorgi.csv").write_text("\n".join(lines) + "\n")

    moser = section.get("moser", [{"p": 4.0, "cbar": 2.0, "a": 1.0, "n": 60}])
    lines = ["p,cbar,a,n,partial_product"]
    for case in moser:
        partials, limit = iteration.moser_product(case["p"], case["cbar"], case["a"], case["n"])
        lines.append(f"{case['p']!r},{case['cbar']!r},{case['a']!r},{case['n']},{limit!r}")
    (out / "moser.csv").write_text("\n".join(lines) + "\n")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="kfplab", description=__doc__)
    parser.add_argument("command", choices=["run", "solve", "probe", "landau", "geometry", "iterate"])
    parser.add_argument("--config", type=str, default=None, help="path to the JSON config")
    parser.add_argument("--out", type=str, default=None, help="output directory override")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    parser.add_argument("--threads", type=int, default=None, help="advisory thread count")
    args = parser.parse_args(argv)

    cfg: dict = {"schema_version": 1}
    if args.config is not None:
        try:
            cfg = load_config(args.config)
        except ConfigError as exc:
            print(f"invalid config: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    elif args.command in ("run", "solve", "probe", "landau"):
        print("--config is required for this command", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "run":
            return _cmd_solve(cfg, args, with_probes=True)
        if args.command == "solve":
            return _cmd_solve(cfg, args, with_probes=False)
        if args.command == "probe":
            return _cmd_probe(cfg, args)
        if args.command == "landau":
            return _cmd_landau(cfg, args)
        if args.command == "geometry":
            return _cmd_geometry(cfg, args)
        if args.command == "iterate":
            return _cmd_iterate(cfg, args)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except np.linalg.LinAlgError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
