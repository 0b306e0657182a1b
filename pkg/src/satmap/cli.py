"""Command-line front end.

Subcommands:
  map          search for the lowest-II mapping and write the mapping document
  check        validate a mapping: rules, register pressure, simulation
  mii          print the II lower bounds for a graph/architecture pair
  report       render figures and CSV tables for an existing mapping
  solve-dimacs run the embedded SAT solver on a DIMACS file

Exit codes for map: 0 mapped, 2 no mapping up to ii-max, 3 timed out,
1 error.  Other subcommands use 0 for success and 1 for failure, except
solve-dimacs which uses 3 for a solver timeout.  Diagnostics go to stderr
as key=value records; result payloads go to stdout or the chosen file.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from pathlib import Path

from .arch import load_arch
from .dfg import load_dfg
from .driver import DEFAULT_II_MAX, DEFAULT_TIMEOUT, DriverConfig, run_toolchain
from .encoder import parse_dimacs
from .errors import SatmapError
from .regalloc import check_register_pressure, compute_lifetimes
from .sat import solve
from .schedule import build_mobility, compute_mii
from .verify import (arch_fingerprint, check_mapping, dfg_fingerprint, format_trace,
                     interpret, load_mapping, mapping_to_document, simulate)

log = logging.getLogger("satmap.cli")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="satmap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_map = sub.add_parser("map", help="find a lowest-II mapping")
    p_map.add_argument("--dfg", required=True)
    p_map.add_argument("--arch", required=True)
    p_map.add_argument("--ii-start", type=int, default=None)
    p_map.add_argument("--ii-max", type=int, default=DEFAULT_II_MAX)
    p_map.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)
    p_map.add_argument("--slack", default="auto",
                       help="mobility slack per candidate II: 'auto' (ii-1) or an integer")
    p_map.add_argument("--solver", default="embedded",
                       help="'embedded' or 'cmd:<template>' with {cnf} for the file path")
    p_map.add_argument("--seed", type=int, default=None)
    p_map.add_argument("--emit-cnf", default=None, metavar="DIR")
    p_map.add_argument("--emit-trace", action="store_true")
    p_map.add_argument("-o", "--output", default=None)

    p_check = sub.add_parser("check", help="validate a mapping document")
    p_check.add_argument("--dfg", required=True)
    p_check.add_argument("--arch", required=True)
    p_check.add_argument("--mapping", required=True)
    p_check.add_argument("--iterations", type=int, default=None)
    p_check.add_argument("--seed", type=int, default=0)

    p_mii = sub.add_parser("mii", help="print ResII, RecII, and mII")
    p_mii.add_argument("--dfg", required=True)
    p_mii.add_argument("--arch", required=True)

    p_report = sub.add_parser("report", help="render mapping figures and CSVs")
    p_report.add_argument("--dfg", required=True)
    p_report.add_argument("--arch", required=True)
    p_report.add_argument("--mapping", required=True)
    p_report.add_argument("--out", required=True, metavar="DIR")
    p_report.add_argument("--slack", default="auto")

    p_solve = sub.add_parser("solve-dimacs", help="solve a DIMACS CNF file")
    p_solve.add_argument("cnf")
    p_solve.add_argument("--timeout", type=float, default=None)
    p_solve.add_argument("--seed", type=int, default=None)

    return parser


def _slack_value(text: str) -> int | None:
    if text == "auto":
        return None
    try:
        value = int(text)
    except ValueError:
        raise _UsageError(f"--slack must be 'auto' or an integer, got {text!r}")
    if value < 0:
        raise _UsageError("--slack must be non-negative")
    return value


def _synthetic_inputs(g, iterations: int) -> dict[int, list[int]]:
    return {sid: list(range(1, iterations + 1)) for sid in g.input_streams()}


def _cmd_map(args) -> int:
    g = load_dfg(args.dfg)
    a = load_arch(args.arch)
    cfg = DriverConfig(ii_start=args.ii_start, ii_max=args.ii_max,
                       timeout_total=args.timeout, extra_slack=_slack_value(args.slack),
                       solver=args.solver, seed=args.seed, emit_cnf_dir=args.emit_cnf)
    result = run_toolchain(g, a, cfg)
    if result.outcome == "timed_out":
        log.info("event=result outcome=timed_out")
        return 3
    if result.outcome == "no_mapping_up_to_ii_max":
        log.info("event=result outcome=no_mapping ii_max=%d", cfg.ii_max)
        return 2
    doc = mapping_to_document(result.mapping, result.report)
    payload = json.dumps(doc, indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(payload, encoding="utf-8")
        log.info("event=result outcome=mapped ii=%d output=%s", result.mapping.ii, args.output)
    else:
        sys.stdout.write(payload)
        log.info("event=result outcome=mapped ii=%d", result.mapping.ii)
    if args.emit_trace:
        iterations = max(p.label for p in result.mapping.assignment.values()) + 2
        trace = simulate(g, a, result.mapping, iterations, _synthetic_inputs(g, iterations))
        sink = sys.stdout if args.output else sys.stderr
        sink.write(format_trace(trace, a))
    return 0


def _cmd_check(args) -> int:
    g = load_dfg(args.dfg)
    a = load_arch(args.arch)
    m = load_mapping(args.mapping)
    failed = False
    if m.dfg_sha256 and m.dfg_sha256 != dfg_fingerprint(g):
        log.info("event=check kind=fingerprint detail=dfg")
        failed = True
    if m.arch_sha256 and m.arch_sha256 != arch_fingerprint(a):
        log.info("event=check kind=fingerprint detail=arch")
        failed = True
    violations = check_mapping(g, a, m)
    for v in violations:
        log.info("event=check kind=%s detail=%s", v.kind, v.message.replace(" ", "_"))
    if violations or failed:
        log.info("event=check result=invalid")
        return 1
    report = check_register_pressure(compute_lifetimes(g, m), a, m.ii)
    if not report.ok:
        for v in report.violations:
            log.info("event=check kind=register-pressure pe=%d slot=%d pressure=%d capacity=%d",
                     v.pe, v.slot, v.pressure, v.capacity)
        log.info("event=check result=invalid")
        return 1
    max_label = max(p.label for p in m.assignment.values())
    iterations = args.iterations or max_label + 3
    rng = random.Random(args.seed)
    streams = {sid: [rng.randrange(-2**31, 2**31) for _ in range(iterations)]
               for sid in g.input_streams()}
    got = simulate(g, a, m, iterations, streams).outputs
    want = interpret(g, iterations, streams)
    if got != want:
        log.info("event=check kind=simulation detail=stream_mismatch")
        log.info("event=check result=invalid")
        return 1
    log.info("event=check result=valid ii=%d iterations=%d max_pressure=%d",
             m.ii, iterations, report.max_pressure)
    return 0


def _cmd_mii(args) -> int:
    g = load_dfg(args.dfg)
    a = load_arch(args.arch)
    bounds = compute_mii(g, a)
    sys.stdout.write(f"res_ii={bounds.res_ii} rec_ii={bounds.rec_ii} m_ii={bounds.m_ii}\n")
    return 0


def _cmd_report(args) -> int:
    from .report import write_report

    g = load_dfg(args.dfg)
    a = load_arch(args.arch)
    m = load_mapping(args.mapping)
    violations = check_mapping(g, a, m)
    if violations:
        log.info("event=report result=invalid detail=%s", violations[0].kind)
        return 1
    pressure = check_register_pressure(compute_lifetimes(g, m), a, m.ii)
    slack = _slack_value(args.slack)
    ms = build_mobility(g, m.ii - 1 if slack is None else slack)
    for path in write_report(g, a, m, pressure, ms, args.out):
        log.info("event=report wrote=%s", path)
    return 0


def _cmd_solve_dimacs(args) -> int:
    import time

    text = Path(args.cnf).read_text(encoding="ascii")
    formula = parse_dimacs(text)
    deadline = None if args.timeout is None else time.monotonic() + args.timeout
    outcome = solve(formula, deadline=deadline, seed=args.seed)
    if outcome.status == "timeout":
        sys.stdout.write("s UNKNOWN\n")
        return 3
    if outcome.status == "unsat":
        sys.stdout.write("s UNSATISFIABLE\n")
        return 0
    sys.stdout.write("s SATISFIABLE\n")
    lits = [v if outcome.model[v] else -v for v in range(1, formula.var_count + 1)]
    for i in range(0, len(lits), 20):
        sys.stdout.write("v " + " ".join(str(x) for x in lits[i:i + 20]) + "\n")
    sys.stdout.write("v 0\n")
    return 0


_COMMANDS = {
    "map": _cmd_map,
    "check": _cmd_check,
    "mii": _cmd_mii,
    "report": _cmd_report,
    "solve-dimacs": _cmd_solve_dimacs,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except SatmapError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except (OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


def entry():
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entry()
