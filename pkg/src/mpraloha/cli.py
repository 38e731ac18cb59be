"""Command line front end.

Subcommands:
    solve     optimal transmission probability for one channel
    sweep     solve over a grid of populations/capabilities/deadlines,
              each row cross-checked against an independent grid search
    simulate  fixed-tau Monte Carlo runs against the analytic value
    dynamic   run a scenario file with the runtime population estimator
    verify    the analytic property checks, one PASS/FAIL line each

Exit codes: 0 success, 1 bad usage or configuration, 2 verification or
convergence failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import math
import os
import sys
from statistics import fmean, stdev

from . import analytic, checks, scenario, simulate

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFY = 2
EXIT_IO = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad flags; this CLI reserves 2 for
    verification failures, so usage problems are rerouted."""

    def error(self, message):
        raise _UsageError(message)


def _int_list(text: str) -> tuple[int, ...]:
    """Parse '2,5,8' or '6:50' (inclusive) or a mix of both."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            lo, _, hi = part.partition(":")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise ValueError("empty list")
    return tuple(out)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(handle, header, rows) -> None:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])


def _emit_csv(path: str | None, header, rows) -> None:
    if path is None or path == "-":
        _write_csv(sys.stdout, header, rows)
        return
    with open(path, "w", encoding="utf-8", newline="") as handle:
        _write_csv(handle, header, rows)


_SOLVE_HEADER = [
    "n_users",
    "mpr",
    "deadline",
    "tau_opt",
    "sdp_max",
    "iterations",
    "residual",
    "converged",
]


_SWEEP_HEADER = _SOLVE_HEADER + ["grid_tau", "grid_sdp", "tau_abs_diff"]


def _solve_row(config: analytic.ChannelConfig, report: analytic.SolveReport):
    return [
        config.n_users,
        config.mpr,
        config.deadline,
        float(report.tau_opt),
        report.sdp_max,
        report.iterations,
        report.residual,
        report.converged,
    ]


def _cmd_solve(args) -> int:
    config = analytic.ChannelConfig(args.n, args.m, args.d)
    report = analytic.solve_optimal_tau(
        config, tolerance=args.tolerance, max_iter=args.max_iter
    )
    print(f"tau_opt    = {float(report.tau_opt)!r}")
    print(f"sdp_max    = {report.sdp_max!r}")
    print(f"iterations = {report.iterations}")
    print(f"residual   = {report.residual:.3e}")
    print(f"converged  = {'yes' if report.converged else 'no'}")
    if args.out:
        _emit_csv(args.out, _SOLVE_HEADER, [_solve_row(config, report)])
    if not report.converged:
        print("error: iteration did not converge", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def _cmd_sweep(args) -> int:
    rows = []
    for n in args.n:
        for m in args.m:
            if m >= n:
                continue
            for d in args.d:
                config = analytic.ChannelConfig(n, m, d)
                report = analytic.solve_optimal_tau(
                    config, tolerance=args.tolerance
                )
                grid_tau, grid_sdp = analytic.grid_search_optimum(config)
                rows.append(
                    _solve_row(config, report)
                    + [grid_tau, grid_sdp,
                       abs(float(report.tau_opt) - grid_tau)]
                )
    if not rows:
        raise ValueError(
            "no valid (n, m, d) combination in the requested sweep"
        )
    _emit_csv(args.out, _SWEEP_HEADER, rows)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    config = analytic.ChannelConfig(args.n, args.m, args.d)
    if args.tau == "optimal":
        tau = float(analytic.solve_optimal_tau(config).tau_opt)
    else:
        try:
            tau = float(args.tau)
        except ValueError:
            raise ValueError(
                f"--tau must be a number or 'optimal', got {args.tau!r}"
            ) from None
    expected = analytic.delivery_prob(config, tau)
    if args.reps < 1:
        raise ValueError(f"--reps must be >= 1, got {args.reps}")
    rows = []
    rep_sdps = []
    total_completed = 0
    total_succeeded = 0
    for rep in range(args.reps):
        seed = args.seed + rep
        result = simulate.run_stationary(config, tau, args.slots, seed)
        rep_sdps.append(result.pooled_sdp())
        total_completed += sum(result.packets_completed)
        total_succeeded += sum(result.packets_succeeded)
        for user, sdp in enumerate(result.per_user_sdp()):
            rows.append(
                [rep, seed, user, result.packets_completed[user],
                 result.packets_succeeded[user], sdp, "", "", ""]
            )
    mean = fmean(rep_sdps)
    if args.reps >= 2:
        std_error = stdev(rep_sdps) / math.sqrt(args.reps)
    elif total_completed > 0:
        std_error = math.sqrt(expected * (1.0 - expected) / total_completed)
    else:
        std_error = math.nan
    if std_error == 0.0:
        z = 0.0 if mean == expected else math.copysign(math.inf, mean - expected)
    else:
        z = (mean - expected) / std_error
    # Final row carries the run-level comparison; the per-user rows above
    # leave those columns blank.
    rows.append(
        ["all", "", "all", total_completed, total_succeeded, mean,
         std_error, expected, z]
    )
    print(f"tau        = {tau!r}")
    print(f"analytic   = {expected!r}")
    print(f"empirical  = {mean!r}")
    print(f"std_error  = {std_error:.3e}")
    print(f"z_score    = {z:.3f}")
    print(f"reps       = {args.reps}, slots each = {args.slots}")
    if args.out:
        _emit_csv(
            args.out,
            ["rep", "seed", "user_id", "packets_completed",
             "packets_succeeded", "sdp", "std_error", "analytic",
             "z_score"],
            rows,
        )
    return EXIT_OK


def _cmd_dynamic(args) -> int:
    timeline = scenario.load_scenario(args.scenario)
    if args.seed is not None:
        timeline = dataclasses.replace(timeline, seed=args.seed)
    result = scenario.run_dynamic(timeline)
    os.makedirs(args.out, exist_ok=True)
    trace_path = os.path.join(args.out, "trace.csv")
    stages_path = os.path.join(args.out, "stages.csv")
    _emit_csv(
        trace_path,
        ["interval", "user_id", "n_est", "tau", "packets_completed",
         "packets_succeeded", "sdp"],
        (
            [r.interval, r.user_id, r.n_est, r.tau, r.packets_completed,
             r.packets_succeeded, r.sdp]
            for r in result.trace
        ),
    )
    _emit_csv(
        stages_path,
        ["stage", "first_interval", "last_interval", "active_users",
         "sdp_theory", "sdp_mean", "sdp_variance", "samples"],
        (
            [s.number, s.first, s.last, s.active_users, s.sdp_theory,
             s.sdp_mean, s.sdp_variance, s.samples]
            for s in result.stages
        ),
    )
    for s in result.stages:
        print(
            f"stage {s.number}: intervals {s.first}-{s.last}, "
            f"{s.active_users} users, mean sdp {s.sdp_mean:.5f} "
            f"(theory {s.sdp_theory:.5f}), variance {s.sdp_variance:.2e}"
        )
    print(f"trace: {trace_path}")
    print(f"stages: {stages_path}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    grid_kwargs = {}
    if args.n is not None:
        grid_kwargs["n_values"] = args.n
    if args.m is not None:
        grid_kwargs["m_values"] = args.m
    if args.d is not None:
        grid_kwargs["d_values"] = args.d
    if args.sweep_n is not None:
        grid_kwargs["sweep_n"] = args.sweep_n
    if args.sweep_m is not None:
        grid_kwargs["sweep_m"] = args.sweep_m
    if args.sweep_d is not None:
        grid_kwargs["sweep_d"] = args.sweep_d
    grid = checks.VerifyGrid(**grid_kwargs)
    results = checks.run_all(grid, identity_tol=args.tolerance)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    failed = sum(not r.passed for r in results)
    if failed:
        print(
            f"error: {failed} of {len(results)} checks failed",
            file=sys.stderr,
        )
        return EXIT_VERIFY
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="mpraloha",
        description=(
            "Deadline-constrained slotted ALOHA with multi-packet "
            "reception: optimal tuning, simulation, verification."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "solve", help="optimal transmission probability for one channel"
    )
    p.add_argument("--n", type=int, required=True, help="number of stations")
    p.add_argument("--m", type=int, required=True,
                   help="receiver capability (packets decodable per slot)")
    p.add_argument("--d", type=int, required=True,
                   help="per-packet deadline in slots")
    p.add_argument("--tolerance", type=float, default=1e-12,
                   help="fixed-point stopping tolerance (default 1e-12)")
    p.add_argument("--max-iter", type=int, default=10_000,
                   help="iteration cap (default 10000)")
    p.add_argument("--out", help="also write the result as one CSV row")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser(
        "sweep",
        help="solve over a parameter grid, CSV output with an independent "
             "grid-search column per row (combinations with m >= n are "
             "skipped)",
    )
    p.add_argument("--n", type=_int_list, required=True,
                   help="station counts, e.g. '6:50' or '10,20,40'")
    p.add_argument("--m", type=_int_list, required=True,
                   help="receiver capabilities, e.g. '2,5,8'")
    p.add_argument("--d", type=_int_list, required=True,
                   help="deadlines, e.g. '1,5,10,20'")
    p.add_argument("--tolerance", type=float, default=1e-12)
    p.add_argument("--out", help="CSV path ('-' or omitted: stdout)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser(
        "simulate", help="Monte Carlo at fixed tau against the analytic value"
    )
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--tau", default="optimal",
                   help="transmission probability, or 'optimal' (default)")
    p.add_argument("--slots", type=int, default=100_000,
                   help="slots per replication (default 100000)")
    p.add_argument("--reps", type=int, default=1,
                   help="replications, seeded seed, seed+1, ... (default 1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out",
                   help="CSV path: one row per station per replication "
                        "plus a final aggregate row")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser(
        "dynamic", help="run a dynamic-population scenario file"
    )
    p.add_argument("--scenario", required=True, help="scenario file path")
    p.add_argument("--seed", type=int, default=None,
                   help="override the scenario file's seed")
    p.add_argument("--out", default=".",
                   help="output directory for trace.csv and stages.csv")
    p.set_defaults(func=_cmd_dynamic)

    p = sub.add_parser(
        "verify", help="run the analytic property checks"
    )
    p.add_argument("--tolerance", type=float, default=1e-12,
                   help="tolerance for the exact identities (default 1e-12)")
    p.add_argument("--n", type=_int_list, default=None,
                   help="override grid populations")
    p.add_argument("--m", type=_int_list, default=None,
                   help="override grid receiver capabilities")
    p.add_argument("--d", type=_int_list, default=None,
                   help="override grid deadlines")
    p.add_argument("--sweep-n", type=_int_list, default=None,
                   help="override solver-vs-grid-search populations")
    p.add_argument("--sweep-m", type=_int_list, default=None)
    p.add_argument("--sweep-d", type=_int_list, default=None)
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
