"""Command-line front end: ``truncexp {estimate,reproduce-enterprise,simulate,mc-study,verify}``.

Exit codes: 0 success, 1 a check or reproduction cell failed, 2 bad input
or an estimation error.  Every failure writes exactly one line to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import oracle
from .dataio import ParseError, expand_annual_counts, load_counts_table, parse_records, write_records
from .enterprise import COLUMNS, REFERENCE, STUDY_YEARS, reproduce
from .estimator import FitError, fit_mle, summarize
from .model import DomainError, ParamDomain, StudyWindow
from .simulator import DegenerateSampleError, SimConfig, mc_study, simulate_sample

EXIT_FAIL = 1
EXIT_USAGE = 2


class CliError(Exception):
    """Carries the one-line diagnostic for a usage or input failure."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"{self.prog}: {message}")


def _positive_int(text):
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if val < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {val}")
    return val


def _window(args) -> StudyWindow:
    return StudyWindow(args.s, args.G)


def _emit(payload: dict, fmt: str, out=None):
    out = out or sys.stdout
    if fmt == "json":
        out.write(json.dumps(payload, sort_keys=True) + "\n")
    else:
        width = max(map(len, payload))
        for k, v in payload.items():
            out.write(f"{k:<{width}}  {v!r}\n")


def _json_safe(d: dict) -> dict:
    return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()}


def cmd_estimate(args) -> int:
    w = _window(args)
    dom = ParamDomain(args.eps)
    if str(args.input).lower().endswith(".json"):
        records = expand_annual_counts(load_counts_table(args.input), w)
    else:
        records = parse_records(args.input)
    stats = summarize(records, w)
    fit = fit_mle(stats, w, dom, args.tol, args.level)
    payload = {"s": w.s, "G": w.G, "m": stats.m, **fit.to_dict()}
    _emit(_json_safe(payload), args.format)
    return 0


def cmd_reproduce(args) -> int:
    for G in args.G:
        StudyWindow(args.s, G)
    rows = reproduce(args.G, args.s)
    all_ok = all(row.passed is not False for row in rows)
    if args.format == "json":
        payload = [
            {"G": row.G, **dict(zip(COLUMNS, row.values)), "reference": row.reference, "passed": row.passed}
            for row in rows
        ]
        sys.stdout.write(json.dumps(payload, sort_keys=True) + "\n")
    else:
        sys.stdout.write(f"{'G':>5}  {'theta_hat':>10}  {'life_exp':>9}  {'alpha':>7}  {'SE(1e-4)':>9}  status\n")
        fmts = ("{:.4f}", "{:.2f}", "{:.3f}", "{:.2f}")
        for row in rows:
            oks = row.cell_ok()
            cells = []
            for i, (fmt, v) in enumerate(zip(fmts, row.values)):
                mark = "" if oks is None else ("+" if oks[i] else "!")
                cells.append(fmt.format(v) + mark)
            status = {None: "n/a", True: "pass", False: "FAIL"}[row.passed]
            sys.stdout.write(
                f"{row.G:>5g}  {cells[0]:>10}  {cells[1]:>9}  {cells[2]:>7}  {cells[3]:>9}  {status}\n"
            )
    if not all_ok:
        bad = [f"{row.G:g}" for row in rows if row.passed is False]
        sys.stderr.write(f"reproduction mismatch for G = {', '.join(bad)}\n")
        return EXIT_FAIL
    return 0


def _sim_config(args) -> SimConfig:
    return SimConfig(args.theta0, _window(args), args.n, args.seed)


def cmd_simulate(args) -> int:
    cfg = _sim_config(args)
    sample = simulate_sample(cfg)
    if args.output in (None, "-"):
        write_records(sample.records(), sys.stdout)
    else:
        write_records(sample.records(), args.output)
    return 0


def cmd_mc_study(args) -> int:
    cfg = _sim_config(args)
    report = mc_study(cfg, args.reps, args.level, ParamDomain(args.eps))
    if args.z_out:
        np.savetxt(args.z_out, report.standardized, fmt="%.17g", header="z", comments="")
    _emit(report.to_dict(), args.format)
    return 0


def cmd_verify(args) -> int:
    results = oracle.run_checks()
    if args.format == "json":
        sys.stdout.write(
            json.dumps([_json_safe(r.__dict__) for r in results], sort_keys=True) + "\n"
        )
    else:
        sys.stdout.write("\n".join(r.line() for r in results) + "\n")
    failed = [r.name for r in results if not r.passed]
    if failed:
        sys.stderr.write(f"{len(failed)} of {len(results)} checks failed: {', '.join(failed)}\n")
        return EXIT_FAIL
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="truncexp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def window(sp, default_s=None):
        sp.add_argument("--s", type=float, required=default_s is None, default=default_s, help="study length in years")
        sp.add_argument("--G", type=float, required=True, help="cohort span in years (G > s)")

    def fmt(sp):
        sp.add_argument("--format", choices=("text", "json"), default="text")

    e = sub.add_parser("estimate", help="fit the rate to a records CSV or counts-table JSON")
    e.add_argument("--input", required=True, help="records CSV, counts-table .json, or - for stdin")
    window(e)
    e.add_argument("--eps", type=float, default=1e-6, help="parameter interval is [eps, 1/eps]")
    e.add_argument("--tol", type=float, default=1e-10)
    e.add_argument("--level", type=float, default=0.95, help="confidence level of the interval")
    fmt(e)
    e.set_defaults(func=cmd_estimate)

    r = sub.add_parser("reproduce-enterprise", help="refit the bundled enterprise data for several G")
    r.add_argument("--G", type=float, nargs="+", default=list(REFERENCE))
    r.add_argument("--s", type=float, default=STUDY_YEARS)
    fmt(r)
    r.set_defaults(func=cmd_reproduce)

    def sim_args(sp):
        sp.add_argument("--theta0", type=float, required=True)
        window(sp)
        sp.add_argument("--n", type=_positive_int, required=True, help="latent population size")
        sp.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("simulate", help="write a simulated records CSV")
    sim_args(s)
    s.add_argument("--output", help="destination path (default stdout)")
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("mc-study", help="Monte Carlo study of the estimator")
    sim_args(m)
    m.add_argument("--reps", type=_positive_int, default=500)
    m.add_argument("--level", type=float, default=0.95)
    m.add_argument("--eps", type=float, default=1e-6)
    m.add_argument("--z-out", help="write standardized estimates (theta_hat - theta0)/se as CSV")
    fmt(m)
    m.set_defaults(func=cmd_mc_study)

    v = sub.add_parser("verify", help="run every oracle check")
    fmt(v)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except BrokenPipeError:
        return 0
    except CliError as exc:
        _diagnose(str(exc))
    except (ParseError, DomainError, FitError, DegenerateSampleError, ValueError, RuntimeError) as exc:
        _diagnose(f"error: {exc}")
    return EXIT_USAGE


def _diagnose(message: str):
    sys.stderr.write(" ".join(message.split()) + "\n")


if __name__ == "__main__":
    sys.exit(main())
