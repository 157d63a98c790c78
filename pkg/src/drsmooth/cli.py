"""Command-line interface: ``drsmooth <command> [options]``."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import persist, report
from .coordinator import run
from .errors import ChoiceSpaceTooLarge, Infeasible, NonFiniteDual, SchemaError, VersionError
from .oracle import ORACLE_CAP, solve_central
from .scenario import AlgoParams, generate_scenario

WORKERS_ENV = "DRSMOOTH_WORKERS"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_SCHEMA = 4
EXIT_CAP = 5
EXIT_INFEASIBLE = 6
EXIT_NONFINITE = 7

EPILOG = f"""\
exit codes:
  {EXIT_OK}  success
  {EXIT_ERROR}  invalid value or other error
  {EXIT_USAGE}  bad command line
  {EXIT_MISSING}  input file not found
  {EXIT_SCHEMA}  malformed input file or unsupported format version
  {EXIT_CAP}  oracle search exceeded its evaluation cap
  {EXIT_INFEASIBLE}  no joint choice satisfies the supply bounds
  {EXIT_NONFINITE}  the run produced a non-finite dual value

environment:
  {WORKERS_ENV}  worker threads for household solves (overridden by --workers)
"""


def _workers(args, params: AlgoParams) -> AlgoParams:
    n = args.workers
    if n is None and os.environ.get(WORKERS_ENV):
        try:
            n = int(os.environ[WORKERS_ENV])
        except ValueError:
            raise ValueError(f"{WORKERS_ENV} must be an integer, got {os.environ[WORKERS_ENV]!r}") from None
    return params if n is None else replace(params, worker_count=n)


def cmd_generate(args) -> int:
    s = generate_scenario(args.seed, args.households, args.slots, args.appliances)
    persist.save_scenario(s, args.out)
    print(f"wrote {args.out}: {s.num_households} households, {s.horizon.num_slots} slots")
    return EXIT_OK


def cmd_run(args) -> int:
    scenario = persist.load_scenario(args.scenario)
    params = persist.load_params(args.params) if args.params else AlgoParams()
    if args.maxiter is not None:
        params = replace(params, maxiter=args.maxiter)
    params = _workers(args, params)
    trace = run(scenario, params)
    if args.trace_out:
        if Path(args.trace_out).suffix.lower() == ".csv":
            persist.save_trace_csv(trace, args.trace_out)
        else:
            persist.save_trace(trace, args.trace_out)
    if args.solution_out:
        persist.save_solution(trace, args.solution_out)
    last = trace.final
    print(f"J {trace.best_k}")
    print(f"P_r^J {report.fmt(trace.best_primal)}")
    print(f"dual {report.fmt(last.dual)}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    scenario = persist.load_scenario(args.scenario)
    res = solve_central(scenario, args.cap)
    if args.out:
        persist.save_oracle(res, args.out, scenario.name)
    print(f"P* {report.fmt(res.optimal_cost)}")
    print(f"evaluations {res.evaluations}")
    return EXIT_OK


def cmd_gap(args) -> int:
    trace = persist.load_trace(args.trace)
    p_star = persist.load_oracle(args.oracle).optimal_cost if args.oracle else None
    for line in report.gap_report(trace, p_star).lines():
        print(line)
    return EXIT_OK


def cmd_plot(args) -> int:
    if Path(args.trace).suffix.lower() == ".csv":
        cols = persist.read_trace_csv(args.trace)
        svg = report.convergence_svg(cols["k"], cols["primal"], cols["dual"], Path(args.trace).stem)
    else:
        svg = report.trace_svg(persist.load_trace(args.trace))
    Path(args.out).write_text(svg, encoding="utf-8")
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="drsmooth",
        description="Distributed demand response by double smoothing and a fast gradient method.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a seeded random scenario")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--households", type=int, required=True)
    g.add_argument("--slots", type=int, required=True)
    g.add_argument("--appliances", type=int, required=True, help="appliances per household")
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_generate)

    r = sub.add_parser("run", help="run the distributed algorithm")
    r.add_argument("--scenario", required=True)
    r.add_argument("--params", help="parameter file (defaults apply when omitted)")
    r.add_argument("--trace-out", help="trace file; a .csv suffix writes the CSV table")
    r.add_argument("--solution-out", help="best recovered solution bundle")
    r.add_argument("--maxiter", type=int, help="override the parameter file's maxiter")
    r.add_argument("--workers", type=int, help=f"worker threads (overrides {WORKERS_ENV})")
    r.set_defaults(fn=cmd_run)

    o = sub.add_parser("oracle", help="solve the centralized problem exactly")
    o.add_argument("--scenario", required=True)
    o.add_argument("--out")
    o.add_argument("--cap", type=int, default=ORACLE_CAP, help="evaluation cap (default %(default)s)")
    o.set_defaults(fn=cmd_oracle)

    q = sub.add_parser("gap", help="report the recovered gap of a run")
    q.add_argument("--trace", required=True, help="trace JSON written by run")
    q.add_argument("--oracle", help="oracle result written by the oracle command")
    q.set_defaults(fn=cmd_gap)

    v = sub.add_parser("plot", help="SVG chart of primal and dual against k")
    v.add_argument("--trace", required=True, help="trace JSON or CSV")
    v.add_argument("--out", required=True)
    v.set_defaults(fn=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    try:
        return args.fn(args)
    except FileNotFoundError as e:
        code, msg = EXIT_MISSING, f"file not found: {e.filename}"
    except (SchemaError, VersionError) as e:
        code, msg = EXIT_SCHEMA, str(e)
    except ChoiceSpaceTooLarge as e:
        code, msg = EXIT_CAP, str(e)
    except Infeasible as e:
        code, msg = EXIT_INFEASIBLE, str(e)
    except NonFiniteDual as e:
        code, msg = EXIT_NONFINITE, str(e)
    except (ValueError, OSError) as e:
        code, msg = EXIT_ERROR, str(e)
    print(f"drsmooth: error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
