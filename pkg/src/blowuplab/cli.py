"""Command-line entry point.

Exit codes: 0 every check passed, 1 a check failed, 2 usage or configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__, backend, io
from .config import ConfigError, load
from .nonlin import BUILTIN_NAMES, FamilyError, make_builtin
from .pde import SolverError, Snapshot
from .pipeline import NumericFailure, certify_family, run
from .profiles import ProfileError, ProfilePrediction, compare, write_comparison
from .resolvent import DomainError, ResolventTable

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("blowuplab")


def _param(text: str):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"parameter {key!r} needs a number, got {value!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="experiment config (YAML)")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--jobs", type=int, default=1, metavar="N", help="parallel workers for independent shots")
    common.add_argument("--tol", type=float, metavar="X", help="inversion tolerance override")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="blowuplab", description="Blow-up experiments for u_t = Lap u + f(u).")
    p.add_argument("--version", action="version", version=f"blowuplab {__version__} ({backend.NAME} kernels)")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("certify", parents=[common], help="slow-variation and resolvent certification report")
    c.add_argument("family", choices=BUILTIN_NAMES)
    c.add_argument("--param", type=_param, action="append", default=[], metavar="KEY=VALUE")

    s = sub.add_parser("simulate", parents=[common], help="run the pipeline described by a config")
    s.add_argument("config_path", nargs="?", metavar="CONFIG")

    pr = sub.add_parser("profiles", parents=[common], help="compare a run directory with the profile predictions")
    pr.add_argument("rundir")

    ss = sub.add_parser("selfsim", parents=[common], help="radial equilibria of the rescaled equation")
    ss.add_argument("n", type=int)
    ss.add_argument("--scan", action="store_true", help="scan a in (0, 10] and write every shot")
    ss.add_argument("--a", type=float, help="single shot from z(0) = a")
    ss.add_argument("--r-max", type=float, default=40.0)

    sub.add_parser("accept", parents=[common], help="run the acceptance suite")
    return p


def cmd_certify(args) -> int:
    fam = make_builtin(args.family, dict(args.param))
    table = ResolventTable(fam, tol=args.tol or 1e-12)
    report = certify_family(fam, table)
    chash = io.config_hash({"certify": fam.name, "params": fam.params, "tol": table.tol})
    out = Path(args.out or "out")
    path = io.write_json(out / f"certify_{fam.name}.json", report, chash)
    parts = {
        "slow_variation": report["slow_variation"]["passed"],
        "uniform_ratio": report["uniform_ratio"]["passed"],
        **{k: v["passed"] for k, v in report["lemmas"].items() if isinstance(v, dict) and "passed" in v},
    }
    if "closed_form" in report:
        parts["closed_form"] = report["closed_form"]["passed"]
    for k, v in parts.items():
        print(f"{'PASS' if v else 'FAIL'}  {k}")
    print(f"report: {path}")
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_simulate(args) -> int:
    path = args.config_path or args.config
    if not path:
        raise ConfigError("simulate needs a config file")
    cfg = load(path)
    if args.tol is not None:
        cfg.tol = args.tol
    if "simulate" not in cfg.checks:
        cfg.checks.append("simulate")
    status, summary = run(cfg, args.out)
    for name, chk in summary["checks"].items():
        print(f"{'PASS' if chk['passed'] else 'FAIL'}  {name}")
    if "T_est" in summary:
        print(f"T_est = {summary['T_est']:.12g}")
    print(f"artifacts: {Path(args.out or cfg.output_dir)}")
    return status


def _snapshot_files(rundir: Path):
    out = []
    for p in (rundir / "snapshots").glob("snapshot_s*.csv"):
        m = re.fullmatch(r"snapshot_s(.+)\.csv", p.name)
        out.append((float(m.group(1)), p))
    return sorted(out)


def cmd_profiles(args) -> int:
    rundir = Path(args.rundir)
    summary_path = rundir / "summary.json"
    if not summary_path.exists():
        raise ConfigError(f"{summary_path} not found; is this a simulate output directory?")
    summary = json.loads(summary_path.read_text())
    if "T_est" not in summary:
        raise ConfigError("run directory has no blow-up time estimate (simulate was not run)")
    fam = make_builtin(summary["family"], summary["params"])
    table = ResolventTable(fam, tol=args.tol or 1e-12)
    T = float(summary["T_est"])
    snaps = []
    for s, p in _snapshot_files(rundir):
        cols = io.read_csv(p)
        snaps.append(Snapshot(s=s, t=T - float(np.exp(-s)), r=cols["r"], u=cols["u"]))
    if not snaps:
        raise ConfigError(f"no snapshots under {rundir / 'snapshots'}")
    comp = compare(ProfilePrediction(table, T, int(summary["n"])), snaps, T)
    path = write_comparison(comp, Path(args.out or rundir) / "comparison.csv", summary.get("config_hash", "none"))
    for k, v in comp["verdicts"].items():
        print(f"{k}: {v}")
    print(f"comparison: {path}")
    return EXIT_OK if comp["verdicts"]["refined_decreasing"] else EXIT_FAIL


def cmd_selfsim(args) -> int:
    from .selfsim import MEMBER, check_sign_constraint, find_members, shoot, write_shot

    if not 1 <= args.n <= 9:
        raise ConfigError("dimension n must be in 1..9", field="n")
    out = Path(args.out or "out")
    chash = io.config_hash({"selfsim": args.n, "scan": args.scan, "a": args.a, "r_max": args.r_max})
    if args.a is not None and not args.scan:
        shot = shoot(args.n, args.a, r_max=args.r_max)
        path = write_shot(shot, out / f"shot_n{args.n}_a{args.a:g}.csv", chash)
        print(f"a={args.a:g}: {shot.classification} (stopped at r={shot.r_stop:.6g})")
        print(f"profile: {path}")
        return EXIT_OK
    if not args.scan:
        raise ConfigError("selfsim needs --scan or --a")
    shots, members = find_members(args.n, r_max=args.r_max, jobs=args.jobs)
    rows = [(s.a, s.classification, s.r_stop, "", "", "") for s in shots]
    for m in members:
        sign = check_sign_constraint(m)
        rows.append((m.a, MEMBER, m.r_max, m.C_far, sign["min_g"], sign["r_at_min"]))
        write_shot(m, out / f"member_n{args.n}_a{m.a:.12g}.csv", chash)
    path = io.write_csv(out / f"scan_n{args.n}.csv", ["a", "classification", "r_stop", "C_far", "min_g", "r_at_min"], rows, chash)
    print(f"n={args.n}: {len(shots)} shots, {len(members)} member(s) of the equilibrium set")
    for m in members:
        print(f"  a*={m.a:.12g}  C_far={m.C_far:.6g}")
    print(f"scan: {path}")
    return EXIT_OK


def cmd_accept(args) -> int:
    from .acceptance import run_all

    results = run_all(jobs=args.jobs)
    for r in results:
        print(r.line())
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} criteria passed")
    if args.out:
        io.write_json(Path(args.out) / "acceptance.json", {"criteria": [r.to_dict() for r in results]},
                      io.config_hash({"accept": __version__}))
    return EXIT_OK if n_pass == len(results) else EXIT_FAIL


COMMANDS = {"certify": cmd_certify, "simulate": cmd_simulate, "profiles": cmd_profiles,
            "selfsim": cmd_selfsim, "accept": cmd_accept}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FamilyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SolverError, DomainError, ProfileError, FloatingPointError) as exc:
        print(f"numerical failure in '{args.command}': {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
