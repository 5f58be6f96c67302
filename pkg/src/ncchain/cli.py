"""Command-line entry point: analytic reports, simulations, sweeps, MST searches and comparisons."""

from __future__ import annotations

import argparse
import csv
import sys
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

from . import harness
from .model import ChainScenario, ConfigError, Scheme, load, validate
from .mst import AlreadyUnstableError


class UsageError(Exception):
    pass


def _seeds(text: str) -> tuple[int, ...]:
    """``N`` means seeds 1..N; a comma list is taken as given."""
    try:
        if "," in text:
            seeds = tuple(int(s) for s in text.split(",") if s.strip())
        else:
            seeds = tuple(range(1, int(text) + 1))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None
    if not seeds or any(s < 0 for s in seeds):
        raise argparse.ArgumentTypeError("seeds must be non-negative and at least one")
    return seeds


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def _k_range(text: str) -> tuple[int, ...]:
    try:
        if "-" in text:
            lo, hi = (int(v) for v in text.split("-", 1))
            return tuple(range(lo, hi + 1))
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad k range {text!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="scenario file of key = value lines")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--scheme", choices=["noncoding", "coding", "both"], default=None)
    p.add_argument("--no-retx", action="store_true", help="disable retransmission")
    p.add_argument("--k", type=int, help="chain length override")
    p.add_argument("--gamma", type=float, help="symmetric source rate override (packets/s)")
    p.add_argument("--ber", type=float, help="bit error rate override")


def _sim_options(p: argparse.ArgumentParser, seeds: str) -> None:
    p.add_argument("--seeds", type=_seeds, default=_seeds(seeds), help="N (for 1..N) or a comma list")
    p.add_argument("--duration", type=float, default=harness.DEFAULT_DURATION, help="simulated seconds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ncchain", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analytic", help="solve the analytic model for one scenario")
    _common(p)
    p.add_argument("--nodes-out", help="also write per-node rates to this CSV")

    p = sub.add_parser("simulate", help="simulate one scenario over several seeds")
    _common(p)
    _sim_options(p, "10")
    p.add_argument("--per-seed-out", help="also write one row per seed to this CSV")
    p.add_argument("--trace", help="event trace CSV for the first seed")

    p = sub.add_parser("sweep", help="vary the source rate or the bit error rate")
    _common(p)
    _sim_options(p, "10")
    p.add_argument("--vary", choices=["gamma", "ber"], required=True)
    p.add_argument("--grid", type=_floats, help="comma list replacing the default grid")
    p.add_argument("--engine", choices=["analytic", "simulated"], default="analytic")
    p.add_argument("--retx-only", action="store_true", help="only the retransmission-enabled curves")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--gnuplot", help="write a gnuplot script for the output CSV here")

    p = sub.add_parser("mst", help="maximum stable throughput against chain length")
    _common(p)
    _sim_options(p, "3")
    p.add_argument("--engine", choices=["analytic", "simulated", "both"], default="analytic")
    p.add_argument("--k-range", type=_k_range, default=harness.K_GRID, help="e.g. 3-8 or 3,5,7")
    p.add_argument("--gamma-ini", type=float, default=2.0)
    p.add_argument("--step", type=float, default=2.0)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("compare", help="join analytic and simulated sweep CSVs")
    p.add_argument("analytic_csv")
    p.add_argument("simulated_csv")
    p.add_argument("--out")
    p.add_argument("--slack", type=float, default=0.0, help="relative slack on the delay bound")
    return parser


def _base(args) -> ChainScenario:
    sc = load(args.config) if getattr(args, "config", None) else ChainScenario()
    if args.k is not None:
        sc = replace(sc, k=args.k)
    if args.gamma is not None:
        sc = sc.with_gamma(args.gamma)
    if args.ber is not None:
        sc = sc.with_phy(bit_error_rate=args.ber)
    if args.no_retx:
        sc = replace(sc, retransmission_enabled=False)
    if args.scheme in ("noncoding", "coding"):
        sc = replace(sc, scheme=Scheme(args.scheme))
    problems = validate(sc)
    if problems:
        raise UsageError("invalid scenario: " + "; ".join(problems))
    return sc


def _schemes(args, base: ChainScenario) -> list[Scheme]:
    if args.scheme == "both" or (args.scheme is None and args.command in ("sweep", "mst")):
        return [Scheme.NONCODING, Scheme.CODING]
    return [base.scheme]


@contextmanager
def _output(path: str | None):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def cmd_analytic(args) -> None:
    from .analytic import analyze
    sc = _base(args)
    with _output(args.out) as fh:
        harness.write_csv([harness.analytic_row(sc)], harness.ANALYTIC_COLUMNS, fh)
    if args.nodes_out:
        rep = analyze(sc)
        cols = ("node", "lambda_f1", "lambda_f2", "lambda_n1", "lambda_n2", "lambda_c",
                "lambda_in_n1", "lambda_in_n2", "lambda_in_c1", "lambda_in_c2",
                "mu_n", "mu_c", "mu_n_seen", "rho_n", "rho_c", "w_node")
        rows = [{c: getattr(n, c) for c in cols} for n in rep.nodes]
        with open(args.nodes_out, "w", newline="") as fh:
            harness.write_csv(rows, cols, fh)


def cmd_simulate(args) -> None:
    sc = _base(args)
    rows = []
    for n, seed in enumerate(args.seeds):
        if n == 0 and args.trace:
            with open(args.trace, "w", newline="") as tf:
                writer = csv.writer(tf, lineterminator="\n")
                writer.writerow(("time", "node", "event", "packet"))
                rows.append(harness.seed_row(sc, args.duration, seed,
                                             trace=lambda t, i, e, p: writer.writerow((repr(t), i, e, p))))
        else:
            rows.append(harness.seed_row(sc, args.duration, seed))
    with _output(args.out) as fh:
        harness.write_csv([harness.aggregate_seeds(rows)], harness.SIM_COLUMNS, fh)
    if args.per_seed_out:
        with open(args.per_seed_out, "w", newline="") as fh:
            harness.write_csv(rows, harness.SEED_COLUMNS, fh)


def cmd_sweep(args) -> None:
    base = _base(args)
    if args.no_retx and args.retx_only:
        raise UsageError("--no-retx and --retx-only exclude each other")
    retx = [False] if args.no_retx else [True] if args.retx_only else [True, False]
    if args.vary == "ber" and args.gamma is None and not args.config:
        base = base.with_gamma(20.0)
    points = harness.sweep_points(base, args.vary, _schemes(args, base), retx, args.grid)
    rows = harness.run_sweep(points, args.engine, args.duration, args.seeds, args.jobs)
    columns = harness.ANALYTIC_COLUMNS if args.engine == "analytic" else harness.SIM_COLUMNS
    with _output(args.out) as fh:
        harness.write_csv(rows, columns, fh)
    if args.gnuplot:
        if not args.out:
            raise UsageError("--gnuplot needs --out")
        x = "gamma_1" if args.vary == "gamma" else "bit_error_rate"
        ys = ["theta", "w_avg"] if args.engine == "analytic" else ["theta_mean", "delay_mean"]
        Path(args.gnuplot).write_text(harness.gnuplot_script(args.out, x, ys, columns, f"{args.vary} sweep"))


def cmd_mst(args) -> None:
    base = _base(args)
    engines = ["analytic", "simulated"] if args.engine == "both" else [args.engine]
    rows = harness.run_mst(base, args.k_range, _schemes(args, base), engines, not args.no_retx,
                           args.gamma_ini, args.step, args.duration, args.seeds, args.jobs)
    with _output(args.out) as fh:
        harness.write_csv(rows, harness.MST_COLUMNS, fh)


def cmd_compare(args) -> None:
    tables = []
    for path in (args.analytic_csv, args.simulated_csv):
        with open(path, newline="") as fh:
            tables.append(list(csv.DictReader(fh)))
    analytic, simulated = tables
    if analytic and "theta" not in analytic[0]:
        raise UsageError(f"{args.analytic_csv} is not an analytic sweep")
    if simulated and "theta_mean" not in simulated[0]:
        raise UsageError(f"{args.simulated_csv} is not a simulated sweep")
    rows = harness.compare(analytic, simulated, args.slack)
    with _output(args.out) as fh:
        harness.write_csv(rows, harness.COMPARE_COLUMNS, fh)


COMMANDS = {"analytic": cmd_analytic, "simulate": cmd_simulate, "sweep": cmd_sweep,
            "mst": cmd_mst, "compare": cmd_compare}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except (UsageError, ConfigError, AlreadyUnstableError, OSError, ValueError, KeyError) as exc:
        print(f"ncchain {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
