"""Command-line front-end.

Exit status: 0 when a verdict was reached (or a certificate is valid),
2 when the answer is unknown, 1 on usage, input or solver errors.
"""

from __future__ import annotations

import argparse
import json
import random
import shlex
import sys
import time
from pathlib import Path

from . import __version__
from .formula import FormulaError, format_predicate, negate, parse_predicate
from .io import (
    ParseError,
    Problem,
    load_net,
    load_problem,
    parse_property,
    print_net_text,
    read_certificate,
    write_certificate,
    write_certificate_script,
    write_trace,
)
from .oracle import ExploreBounds, OracleReachable, OracleUnreachable, bfs_reach
from .pdr import STRATEGIES, Invariant, Options, Reachable, StrategyError, check_certificate, prove
from .petri import NetError
from .randnet import random_problem
from .smt import SOLVER_ENV, SolverError, default_command, quantified_check

EXIT_OK, EXIT_ERROR, EXIT_UNKNOWN = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _add_problem_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--net", help="net file (.net text format or .pnml)")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--property", help="predicate text, e.g. 'p >= 1'")
    group.add_argument("--property-file", help="property file with optional goal/net/expect headers")
    p.add_argument("--goal", choices=("invariant", "reachable"), help="meaning of --property (default: invariant)")


def _add_solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver-cmd", help=f"solver command line (default: ${SOLVER_ENV} or 'z3 -in')")
    p.add_argument("--query-timeout", type=float, default=60.0, help="seconds per solver query (default: 60)")


def _add_engine_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--timeout", type=float, help="overall time limit in seconds")
    p.add_argument("--max-level", type=int, default=1000)
    p.add_argument("--max-obligations", type=int, default=10_000)
    p.add_argument("--max-witnesses", type=int, help="stop after this many generalized witnesses")
    p.add_argument("--no-minimize-cores", action="store_true", help="keep solver cores as returned")
    p.add_argument("--validate-oars", action="store_true", help="check the frame invariants during the run")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pnpdr", description="PDR model checker for linear properties of Petri nets.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    check = sub.add_parser("check", help="decide a property")
    _add_problem_args(check)
    check.add_argument("--strategy", choices=STRATEGIES, default="auto")
    _add_solver_args(check)
    _add_engine_args(check)
    check.add_argument("--certificate-out", help="write the certificate here (plus a .smt2 check script)")
    check.add_argument("--trace-out", help="write the counterexample trace here")

    cert = sub.add_parser("certify", help="check a certificate of invariance")
    _add_problem_args(cert)
    cert.add_argument("--certificate", required=True, help="certificate file ('#' lines)")
    _add_solver_args(cert)

    bench = sub.add_parser("bench", help="run every problem of a directory")
    bench.add_argument("directory")
    bench.add_argument("--strategy", action="append", choices=STRATEGIES, help="repeatable (default: auto)")
    _add_solver_args(bench)
    bench.add_argument("--timeout", type=float, default=60.0, help="seconds per problem and strategy")
    bench.add_argument("--jsonl", help="write one JSON record per problem to this file ('-' for stdout)")
    bench.add_argument("--validate-oars", action="store_true")

    gen = sub.add_parser("generate", help="write random bounded problems with oracle expectations")
    gen.add_argument("directory")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--count", type=int, default=10)
    gen.add_argument("--monotonic", action="store_true", help="generate coverability-style properties")
    return parser


def _problem(args) -> Problem:
    if args.property_file:
        headers, _ = parse_property(Path(args.property_file).read_text())
        if args.net is None and "net" not in headers:
            raise ParseError("--net is required")
        prob = load_problem(args.property_file, args.net)
        if args.goal:
            prob = Problem(prob.net, prob.m0, args.goal, prob.predicate, prob.name, prob.expect)
        return prob
    if args.net is None or args.property is None:
        raise ParseError("--net and one of --property/--property-file are required")
    net, m0 = load_net(args.net)
    pred = parse_predicate(args.property, net)
    return Problem(net, m0, args.goal or "invariant", pred, Path(args.net).stem)


def _options(args, strategy: str, timeout: float | None) -> Options:
    return Options(
        strategy=strategy,
        solver_cmd=args.solver_cmd,
        timeout=timeout,
        query_timeout=args.query_timeout,
        max_level=getattr(args, "max_level", 1000),
        max_obligations=getattr(args, "max_obligations", 10_000),
        max_witnesses=getattr(args, "max_witnesses", None),
        minimize_cores=not getattr(args, "no_minimize_cores", False),
        validate_oars=getattr(args, "validate_oars", False),
    )


def cmd_check(args) -> int:
    prob = _problem(args)
    started = time.monotonic()
    verdict = prove(prob.net, prob.m0, prob.invariant, _options(args, args.strategy, args.timeout))
    elapsed = time.monotonic() - started
    print(f"verdict: {verdict.name}")
    print(f"property: {format_predicate(prob.invariant)}")
    print(f"strategy: {verdict.stats.strategy or args.strategy}")
    print(f"time: {elapsed:.3f}s")
    if isinstance(verdict, Invariant):
        text = write_certificate(verdict.certificate)
        sys.stdout.write(text)
        if args.certificate_out:
            Path(args.certificate_out).write_text(text)
            argv = shlex.split(args.solver_cmd or default_command())
            script = write_certificate_script(
                prob.net, prob.m0, prob.invariant, verdict.certificate, quantified_check(argv)
            )
            Path(args.certificate_out).with_suffix(".smt2").write_text(script)
        return EXIT_OK
    if isinstance(verdict, Reachable):
        text = write_trace(verdict.trace, prob.net, prob.m0, verdict.final)
        sys.stdout.write(text)
        if args.trace_out:
            Path(args.trace_out).write_text(text)
        return EXIT_OK
    print(f"reason: {verdict.reason}")
    return EXIT_UNKNOWN


def cmd_certify(args) -> int:
    prob = _problem(args)
    cert = read_certificate(Path(args.certificate).read_text(), prob.net)
    report = check_certificate(prob.net, prob.m0, prob.invariant, cert, args.solver_cmd, args.query_timeout)
    for key in ("initial", "inductive", "entails"):
        value = getattr(report, key)
        print(f"{key}: {'ok' if value else 'FAILED' if value is False else 'unknown'}")
    print(f"certificate: {'VALID' if report.valid else 'INVALID'}")
    if report.valid:
        return EXIT_OK
    return EXIT_UNKNOWN if report.indeterminate else EXIT_ERROR


def cmd_bench(args) -> int:
    directory = Path(args.directory)
    if not directory.is_dir():
        raise ParseError(f"{directory} is not a directory")
    strategies = args.strategy or ["auto"]
    problems = sorted(directory.glob("*.prop"))
    out = None
    if args.jsonl == "-":
        out = sys.stdout
    elif args.jsonl:
        out = open(args.jsonl, "w")
    header = f"{'problem':24} {'expect':10} " + " ".join(f"{s:>22}" for s in strategies)
    if out is not sys.stdout:
        print(header)
    mismatches = 0
    try:
        for path in problems:
            prob = load_problem(path)
            record = {"problem": prob.name, "expect": prob.expect, "results": {}}
            cells = []
            for strategy in strategies:
                started = time.monotonic()
                try:
                    v = prove(prob.net, prob.m0, prob.invariant, _options(args, strategy, args.timeout))
                    name, reason = v.name, getattr(v, "reason", None)
                except StrategyError as exc:
                    name, reason = "N/A", str(exc)
                elapsed = time.monotonic() - started
                bad = prob.expect is not None and name in ("INVARIANT", "REACHABLE") and name != prob.expect
                mismatches += bad
                record["results"][strategy] = {"verdict": name, "seconds": round(elapsed, 3), "reason": reason, "mismatch": bad}
                cells.append(f"{name + ('!' if bad else ''):>12} {elapsed:8.2f}s")
            if out is not None:
                out.write(json.dumps(record) + "\n")
                out.flush()
            if out is not sys.stdout:
                print(f"{prob.name:24} {prob.expect or '-':10} " + " ".join(cells))
    finally:
        if out is not None and out is not sys.stdout:
            out.close()
    if out is not sys.stdout:
        print(f"{len(problems)} problems, {mismatches} mismatches")
    return EXIT_ERROR if mismatches else EXIT_OK


def cmd_generate(args) -> int:
    directory = Path(args.directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)
    for i in range(args.count):
        pr = random_problem(rng, monotonic=args.monotonic)
        name = f"rand_{args.seed}_{i:03d}"
        oracle = bfs_reach(pr.net, pr.m0, negate(pr.prop), ExploreBounds())
        expect = {OracleReachable: "REACHABLE", OracleUnreachable: "INVARIANT"}.get(type(oracle))
        (directory / f"{name}.net").write_text(print_net_text(pr.net, pr.m0))
        lines = ["goal: invariant", f"net: {name}.net"]
        if expect:
            lines.append(f"expect: {expect}")
        lines.append(format_predicate(pr.prop))
        (directory / f"{name}.prop").write_text("\n".join(lines) + "\n")
    print(f"wrote {args.count} problems to {directory}")
    return EXIT_OK


COMMANDS = {"check": cmd_check, "certify": cmd_certify, "bench": cmd_bench, "generate": cmd_generate}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_ERROR
    if args.command in ("check", "certify") and not (args.net or args.property_file):
        parser._subparsers._group_actions[0].choices[args.command].print_help(sys.stderr)
        return EXIT_ERROR
    try:
        return COMMANDS[args.command](args)
    except (OSError, ParseError, FormulaError, NetError, StrategyError, SolverError) as exc:
        print(f"pnpdr: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
