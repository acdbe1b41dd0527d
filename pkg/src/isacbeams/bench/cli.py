"""Command-line interface.

Subcommands:

* ``bounds``     closed-form beamformer-count bounds for a metric family
* ``solve``      one seeded sensing-design solve from a config file
* ``reduce``     one full trial (design, power-min, reduction) with a trace
* ``experiment`` seeded Monte-Carlo sweep writing trials.csv + summary.json
* ``verify``     analytic verification suite

Exit codes: 0 on success, 2 on any invariant violation or failed check,
3 on I/O errors.
"""

from __future__ import annotations

import argparse
import json
import sys

from ..bounds import BoundQuery, bound_for_query
from ..errors import IsacError
from .config import load_config
from .experiment import run_experiment
from .randomize import randomize_scenario
from .trial import BoundViolation, run_trial
from .verify import verify_analytic

EXIT_OK = 0
EXIT_INVARIANT = 2
EXIT_IO = 3


def _add_bounds(sub):
    p = sub.add_parser("bounds", help="closed-form beamformer-count bounds")
    p.add_argument("--k", type=int, default=0, help="number of communication users")
    sizing = p.add_mutually_exclusive_group(required=True)
    sizing.add_argument("--l", type=int, help="number of real parameters")
    sizing.add_argument("--d", type=int, help="number of quadratic terms")
    sizing.add_argument("--ntr", type=int, help="number of line-of-sight targets")
    sizing.add_argument("--metric", choices=("snr", "fullchannel", "aoa", "beampattern"),
                        help="named metric family")
    p.add_argument("--mode", choices=("ic", "nic", "radar"), default="ic")
    p.add_argument("--ntx", type=int, help="transmit antennas (cap in nic mode; "
                                           "size for --metric fullchannel)")
    p.add_argument("--size", type=int, help="metric size for aoa/beampattern")


def _add_config_command(sub, name, help_text):
    p = sub.add_parser(name, help=help_text)
    p.add_argument("config", help="path to a TOML config file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("ic", "nic", "sensing_only"))
    p.add_argument("--k", type=int, dest="k_users")
    p.add_argument("--ntr", type=int, dest="n_targets")
    return p


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="isacbeams", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_bounds(sub)
    _add_config_command(sub, "solve", "solve one seeded sensing design")
    _add_config_command(sub, "reduce", "run one full trial with a reduction trace")
    exp = sub.add_parser("experiment", help="run a Monte-Carlo sweep")
    exp.add_argument("config")
    exp.add_argument("--seeds", type=int, help="override the number of seeds")
    exp.add_argument("--out", help="override the output directory")
    exp.add_argument("--jobs", type=int, help="parallel worker count")
    sub.add_parser("verify", help="run the analytic verification suite")
    args = parser.parse_args(argv)

    try:
        return _dispatch(args)
    except BoundViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except IsacError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


def _query_from_args(args) -> BoundQuery:
    kwargs = dict(k_users=args.k, mode=args.mode, n_tx=args.ntx)
    if args.l is not None:
        kwargs["n_params"] = args.l
    elif args.d is not None:
        kwargs["d"] = args.d
    elif args.ntr is not None:
        kwargs["n_targets"] = args.ntr
    else:
        kwargs["metric_kind"] = args.metric
        kwargs["metric_size"] = args.size if args.size is not None else args.ntx
    return BoundQuery(**kwargs)


def _dispatch(args) -> int:
    if args.command == "bounds":
        print(bound_for_query(_query_from_args(args)))
        return EXIT_OK

    if args.command == "verify":
        report = verify_analytic()
        for name, ok, detail in report.checks:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        return EXIT_OK if report.passed else EXIT_INVARIANT

    overrides = {key: getattr(args, key, None)
                 for key in ("mode", "k_users", "n_targets")}
    if args.command == "experiment":
        cfg = load_config(args.config, {"n_seeds": args.seeds, "out_dir": args.out,
                                        "jobs": args.jobs})
        summary = run_experiment(cfg)
        print(json.dumps(summary, indent=2, sort_keys=True))
        bad = summary["trials"]["failed"] + summary["bound_violations"]
        return EXIT_INVARIANT if bad else EXIT_OK

    cfg = load_config(args.config, overrides)
    setup = randomize_scenario(cfg, args.seed)

    if args.command == "solve":
        from ..sdp import SolveOptions, build_sensing_design, design_metric_value, solve
        design = build_sensing_design(setup.design_metric, setup.scenario, cfg.scalarization)
        sol = solve(design.problem, SolveOptions(tol=3e-6, max_iters=25_000))
        out = {
            "status": sol.status,
            "iterations": sol.iterations,
            "objective": design_metric_value(design, sol) if sol.status != "infeasible" else None,
            "primal_residual": sol.primal_residual,
            "dual_residual": sol.dual_residual,
            "gap": sol.gap,
        }
        print(json.dumps(out, indent=2))
        return EXIT_OK if sol.status != "infeasible" else EXIT_INVARIANT

    if args.command == "reduce":
        record = run_trial(setup, cfg, args.seed)
        print(json.dumps({k: v for k, v in vars(record).items()}, indent=2, sort_keys=True))
        if record.status == "ok":
            return EXIT_OK
        return EXIT_INVARIANT

    raise AssertionError(f"unhandled command {args.command}")  # pragma: no cover


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
