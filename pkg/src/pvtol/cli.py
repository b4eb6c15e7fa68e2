"""Command-line entry point.

Exit codes: 0 success; 1 configuration or I/O error; 2 a simulation diverged
or hit a singularity; 3 at least one Monte-Carlo run did not complete; 4 a
CLF check failed inside the claimed gain range.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .clf import P0, certify_positive_definite, check_gains, sweep_gain_grid
from .experiments import Scenario, compare_nominal, monte_carlo
from .model import PlantParams
from .sim import format_csv, run, run_zero_dynamics

EXIT_OK, EXIT_CONFIG, EXIT_SIM, EXIT_MC, EXIT_CLF = 0, 1, 2, 3, 4


def _err(msg: str) -> None:
    print(f"pvtol: {msg}", file=sys.stderr)


def _out_dir(args, values) -> Path:
    out = Path(args.out if args.out is not None else values["output.dir"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise cfgmod.ConfigError(f"cannot create output directory {out}: {exc.strerror or exc}") from None
    if not os.access(out, os.W_OK):
        raise cfgmod.ConfigError(f"output directory {out} is not writable")
    return out


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise cfgmod.ConfigError(f"cannot write {path}: {exc.strerror or exc}") from None


def _values(args) -> dict:
    return cfgmod.load(args.config, args.set or ())


def cmd_simulate(args) -> int:
    values = _values(args)
    sim_cfg = cfgmod.sim_config(values)
    out = _out_dir(args, values)
    result = run(sim_cfg)
    _write(out / "trajectory.csv", result.to_csv())
    _write(out / "config.txt", cfgmod.dump(values))
    if not result.completed:
        _err(f"run {result.status} at t={result.t_stop:.6g}")
        return EXIT_SIM
    return EXIT_OK


def cmd_compare(args) -> int:
    values = _values(args)
    sim_cfg = cfgmod.sim_config(values)
    out = _out_dir(args, values)
    cmp = compare_nominal(Scenario("config", sim_cfg))
    _write(out / "invopt.csv", cmp.invopt.to_csv())
    _write(out / "fbl.csv", cmp.fbl.to_csv())
    print(cmp.report_line())
    for name, res in (("invopt", cmp.invopt), ("fbl", cmp.fbl)):
        if not res.completed:
            _err(f"{name} run {res.status} at t={res.t_stop:.6g}")
            return EXIT_SIM
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    values = _values(args)
    sim_cfg = cfgmod.sim_config(values)
    mc = cfgmod.monte_carlo_config(values, args.seed)
    out = _out_dir(args, values)
    res = monte_carlo(Scenario("config", sim_cfg), mc, values["controller"], jobs=args.jobs)
    _write(out / "summary.csv", res.summary_csv())
    _write(out / "envelope.csv", res.envelope_csv())
    if values["mc.write_runs"]:
        for s, r in zip(res.summaries, res.results):
            _write(out / f"run_{s.run_id:04d}.csv", r.to_csv())
    counts = ", ".join(f"{k}={v}" for k, v in sorted(res.counts().items()))
    print(f"controller={res.controller} runs={len(res.summaries)} {counts}")
    return EXIT_OK if res.all_completed else EXIT_MC


def _parse_point(text: str):
    try:
        kx, ky = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected KX,KY, got {text!r}") from None
    return kx, ky


def cmd_verify_clf(args) -> int:
    values = _values(args)
    out = _out_dir(args, values)
    p0_ok, p0_margin = certify_positive_definite(P0)
    if args.point and not args.grid:
        report = [check_gains(kx, ky) for kx, ky in args.point]
    else:
        report = sweep_gain_grid(values["clf.n"], *values["clf.range"], extra_points=args.point or ())
    lines = ["# schema=1", "kx,ky,negdef,margin"]
    lines += [f"{p.kx:.17g},{p.ky:.17g},{int(p.negdef)},{p.margin:.17g}" for p in report]
    _write(out / "clf_sweep.csv", "\n".join(lines) + "\n")
    failed = [p for p in report if p.in_claim and not p.negdef]
    print(f"P0 positive definite: {p0_ok} (min pivot {p0_margin:.6g}); "
          f"points={len(report)} in-claim failures={len(failed)}")
    for p in failed:
        _err(f"Riccati inequality violated at kx={p.kx:.6g}, ky={p.ky:.6g} (pivot {p.margin:.3e})")
    return EXIT_OK if p0_ok and not failed else EXIT_CLF


def cmd_zero_dynamics(args) -> int:
    values = _values(args)
    theta0 = values["zero.theta0"] if args.theta0 is None else args.theta0
    duration = values["zero.duration"] if args.duration is None else args.duration
    if not (math.isfinite(theta0) and math.isfinite(duration) and duration > 0):
        raise cfgmod.ConfigError("zero-dynamics needs a finite theta0 and a positive duration")
    plant = PlantParams(values["plant.epsilon"], values["plant.gravity"])
    if plant.epsilon == 0.0:
        raise cfgmod.ConfigError("plant.epsilon: zero dynamics undefined for epsilon = 0")
    out = _out_dir(args, values)
    traj = run_zero_dynamics(theta0, duration, plant, dt=values["zero.dt"],
                             thetadot0=values["zero.thetadot0"])
    _write(out / "zero_dynamics.csv", format_csv(traj, ("t", "theta", "thetadot")))
    peak = float(np.max(np.abs(traj[:, 1])))
    print(f"theta0={theta0:.6g} duration={duration:.6g} peak|theta|={peak:.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value config file")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=int, default=42, help="master seed for Monte-Carlo draws")
    common.add_argument("--jobs", type=int, default=None,
                        help="worker processes (default: all cores); results do not depend on it")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")

    parser = argparse.ArgumentParser(prog="pvtol", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="run one closed-loop simulation").set_defaults(
        func=cmd_simulate)
    sub.add_parser("compare", parents=[common], help="nominal invopt vs. fbl with cost report").set_defaults(
        func=cmd_compare)
    sub.add_parser("montecarlo", parents=[common], help="input-gain perturbation study").set_defaults(
        func=cmd_montecarlo)
    p = sub.add_parser("verify-clf", parents=[common], help="certify P0 and sweep the Riccati inequality")
    p.add_argument("--point", action="append", type=_parse_point, metavar="KX,KY",
                   help="check an extra gain pair (alone, replaces the grid unless --grid)")
    p.add_argument("--grid", action="store_true", help="keep the grid when --point is given")
    p.set_defaults(func=cmd_verify_clf)
    p = sub.add_parser("zero-dynamics", parents=[common], help="simulate the unforced attitude zero dynamics")
    p.add_argument("--theta0", type=float, default=None)
    p.add_argument("--duration", type=float, default=None)
    p.set_defaults(func=cmd_zero_dynamics)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except cfgmod.ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
