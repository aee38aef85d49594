"""Command-line interface: run ensembles, merge reports, check oracles, re-fit.

Exit codes: 0 success, 1 numerical-failure threshold or failed check,
2 usage error.
"""

import argparse
import json
import os
import sys

from . import __version__
from .runner import (
    RunConfig,
    load_summary,
    merge_summaries,
    run_ensemble,
    summary_to_json,
    _atomic_write,
)

USAGE_ERROR = 2
NUMERIC_ERROR = 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="monferm",
        description="Quantum-trajectory simulator for monitored free fermions.",
    )
    parser.add_argument("--version", action="version", version=f"monferm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a trajectory ensemble")
    run.add_argument("--config", help="JSON config file; flags override its values")
    run.add_argument("--protocol", choices=("qsd", "qj", "pm"),
                     help="measurement protocol")
    run.add_argument("--size", type=int, help="lattice size L (sites, even)")
    run.add_argument("--gamma", type=float, help="monitoring strength (1/time)")
    run.add_argument("--dt", type=float, help="QSD time step (units of 1/J)")
    run.add_argument("--t-final", type=float, help="final time (1/J); default 0.7 L")
    run.add_argument("--window", type=float, nargs=2, metavar=("T_LO", "T_HI"),
                     help="collection window (1/J); default 0.6L 0.7L")
    run.add_argument("--trajectories", type=int, help="number of trajectories")
    run.add_argument("--seed", type=int, help="base RNG seed (64-bit)")
    run.add_argument("--traj-offset", type=int,
                     help="first trajectory index (split a seed across runs)")
    run.add_argument("--subsystem", type=int, help="subsystem size (sites); default L/2")
    run.add_argument("--out", help="output directory")
    run.add_argument("--threads", type=int, default=0,
                     help="worker processes; 0 = available parallelism")
    run.add_argument("--propagator", choices=("spectral", "rk4"),
                     help="unitary-segment propagator")
    run.add_argument("--density-norm", choices=("global-max", "per-column", "probability"),
                     help="density-map normalization mode")
    run.add_argument("--hist-range", type=float, nargs=2, metavar=("LO", "HI"),
                     help="pinned histogram range for entropy-change observables")
    run.add_argument("--no-events", action="store_true",
                     help="skip per-event entropy records (snapshots only)")
    run.add_argument("--snapshot-dt", type=float,
                     help="in-window correlation-snapshot interval (1/J)")

    merge = sub.add_parser("merge", help="combine partial summary reports")
    merge.add_argument("summaries", nargs="+", help="summary.json files to combine")
    merge.add_argument("-o", "--out", required=True, help="merged summary path")

    oracle = sub.add_parser("oracle-check",
                            help="lockstep Gaussian-vs-exact equivalence suite")
    oracle.add_argument("--size", type=int, default=6, help="lattice size (<= 10, even)")
    oracle.add_argument("--gamma", type=float, default=1.0, help="monitoring strength")
    oracle.add_argument("--events", type=int, default=200, help="events per protocol")
    oracle.add_argument("--seed", type=int, default=1234)
    oracle.add_argument("--tolerance", type=float, default=1e-8)

    fit = sub.add_parser("fit", help="re-fit a stored histogram")
    fit.add_argument("summary", help="summary.json produced by `run`")
    fit.add_argument("--observable", default="ds_meas",
                     help="histogram name inside the summary")
    fit.add_argument("--model", default="gaussian",
                     choices=("gaussian", "gauss_exp_interp", "exponential_tail"))

    return parser


_FLAG_TO_FIELD = {
    "protocol": "protocol",
    "size": "L",
    "gamma": "gamma",
    "dt": "dt",
    "t_final": "t_final",
    "trajectories": "n_traj",
    "seed": "seed",
    "traj_offset": "traj_offset",
    "subsystem": "ell",
    "out": "output_dir",
    "propagator": "propagator",
    "density_norm": "density_norm",
    "snapshot_dt": "snapshot_dt",
}


def _config_from_args(args) -> RunConfig:
    values = {}
    if args.config:
        with open(args.config) as fh:
            values.update(json.load(fh))
    for flag, fieldname in _FLAG_TO_FIELD.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[fieldname] = v
    if args.window is not None:
        values["window"] = tuple(args.window)
    if args.hist_range is not None:
        values["hist_range"] = tuple(args.hist_range)
    if args.no_events:
        values["record_events"] = False
    missing = [k for k in ("protocol", "L", "gamma") if k not in values]
    if missing:
        raise ValueError(f"missing required settings: {', '.join(missing)}")
    return RunConfig.from_dict(values)


def _cmd_run(args) -> int:
    config = _config_from_args(args)
    workers = args.threads if args.threads > 0 else (os.cpu_count() or 1)
    summary = run_ensemble(config, n_workers=workers)
    counters = summary["counters"]
    print(f"trajectories: {counters['n_traj']}  failed: {counters['n_failed']}  "
          f"valid: {summary['valid']}")
    if config.output_dir:
        print(f"outputs written to {config.output_dir}")
    else:
        print(summary_to_json(summary))
    return 0 if summary["valid"] else NUMERIC_ERROR


def _cmd_merge(args) -> int:
    merged = merge_summaries([load_summary(p) for p in args.summaries])
    _atomic_write(args.out, summary_to_json(merged))
    print(f"merged {len(args.summaries)} summaries -> {args.out}")
    return 0 if merged["valid"] else NUMERIC_ERROR


def _cmd_oracle_check(args) -> int:
    from .crosscheck import run_all

    reports = run_all(L=args.size, gamma=args.gamma,
                      n_events=args.events, seed=args.seed)
    all_ok = True
    print(f"{'protocol':<10}{'events':>8}{'max |D err|':>14}{'max |S err|':>14}  status")
    for rep in reports:
        ok = rep.passed(args.tolerance)
        all_ok &= ok
        print(f"{rep.protocol:<10}{rep.n_events:>8}{rep.max_d_error:>14.3e}"
              f"{rep.max_s_error:>14.3e}  {'pass' if ok else 'FAIL'}")
    return 0 if all_ok else NUMERIC_ERROR


def _cmd_fit(args) -> int:
    from .stats import Histogram, fit_distribution
    import numpy as np

    summary = load_summary(args.summary)
    try:
        block = summary["histograms"][args.observable]
    except KeyError:
        raise ValueError(f"summary has no histogram {args.observable!r}") from None
    hist = Histogram(np.asarray(block["edges"]), np.asarray(block["counts"]),
                     block["underflow"], block["overflow"])
    result = fit_distribution(hist, model=args.model)
    print(json.dumps(result.as_dict(), indent=1, sort_keys=True))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help
        return int(exc.code or 0)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "merge":
            return _cmd_merge(args)
        if args.command == "oracle-check":
            return _cmd_oracle_check(args)
        if args.command == "fit":
            return _cmd_fit(args)
        raise ValueError(f"unknown command {args.command!r}")
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
