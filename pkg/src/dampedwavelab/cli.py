"""Command line entry point.

Subcommands: run, validate, list-profiles.  Exit codes of `run`:
0 all comparisons passed, 2 comparison failures, 3 invariant violations or
experiment errors, 4 configuration errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from .coefficients import KINDS
from .experiments import (
    ENV_OUT_DIR,
    ConfigError,
    emit_reports,
    load_bundle,
    run_bundle,
)

_PROFILE_HELP = {
    "zero": "no damping; free waves",
    "constant": "b(t) = b0, b0 >= 0",
    "scale_invariant": "b(t) = mu/(1+t), mu >= 0",
    "power": "b(t) = c (1+t)^kappa, c > 0, kappa in (-1, inf)",
    "iterated_log": "b(t) = mu / ((1+t) ln(e+t) ... ln^[m](e^[m]+t)), depth m in 1..3",
    "integrable": "b(t) = c (1+t)^(-sigma), sigma > 1 (b integrable)",
    "custom": "user callables b, b' (library use only, not configurable)",
}


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="dampedwavelab",
        description="verification experiments for damped wave multipliers")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiments in a config bundle")
    run.add_argument("config", help="path to a JSON bundle config")
    run.add_argument("--out", help="output directory "
                     f"(default: config out_dir, or ${ENV_OUT_DIR})")
    run.add_argument("--only", help="run only the named experiment")
    run.add_argument("--jobs", type=int, default=1,
                     help="run experiments in this many processes")
    run.add_argument("--seed", type=int, help="override the bundle seed")

    val = sub.add_parser("validate", help="validate a config bundle")
    val.add_argument("config", help="path to a JSON bundle config")

    sub.add_parser("list-profiles", help="list built-in coefficient kinds")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "list-profiles":
        for kind in KINDS:
            print(f"{kind:16s} {_PROFILE_HELP[kind]}")
        return 0

    try:
        bundle_cfg = load_bundle(args.config)
    except ConfigError as exc:
        for issue in exc.issues:
            print(f"config error: {issue}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 4

    if args.command == "validate":
        n = len(bundle_cfg.experiments)
        print(f"ok: {n} experiment(s), seed {bundle_cfg.seed}")
        return 0

    if args.seed is not None:
        bundle_cfg = dataclasses.replace(bundle_cfg, seed=args.seed)
    out_dir = args.out or os.environ.get(ENV_OUT_DIR) or bundle_cfg.out_dir

    try:
        result = run_bundle(bundle_cfg, only=args.only, jobs=args.jobs)
    except ConfigError as exc:
        for issue in exc.issues:
            print(f"config error: {issue}", file=sys.stderr)
        return 4
    paths = emit_reports(result, out_dir)
    for rep in result.reports:
        status = "ERROR" if rep.error else (
            "INVARIANT-FAIL" if rep.invariant_failures else (
                "FAIL" if any(not c.passed for c in rep.comparisons)
                else "pass"))
        print(f"{rep.name}: {status}")
    print(f"wrote {len(paths)} file(s) to {out_dir}")
    return result.exit_code()


if __name__ == "__main__":
    sys.exit(main())
