"""Command-line entry point.

Exit codes: 0 all checks pass, 2 safety failure, 3 liveness/budget failure,
64 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from . import checker, harness, trace
from .protocols import PROTOCOLS, get_protocol
from .simnet import RandomPolicy


def _parse_checks(text: str) -> tuple[str, ...]:
    checks = tuple(c.strip() for c in text.split(",") if c.strip())
    unknown = [c for c in checks if c not in harness.ALL_CHECKS]
    if unknown:
        raise argparse.ArgumentTypeError(
            f"unknown checks {unknown}; choose from {list(harness.ALL_CHECKS)}")
    return checks


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snowlab",
        description="Read-only-transaction protocol laboratory: simulate, "
                    "explore, and verify.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one workload and check its histories")
    run.add_argument("--protocol", required=True, choices=sorted(PROTOCOLS))
    run.add_argument("--objects", type=int, default=2, metavar="K")
    run.add_argument("--writers", type=int, default=1, metavar="N")
    run.add_argument("--readers", type=int, default=1, metavar="N")
    run.add_argument("--txns", type=int, default=4, metavar="N")
    run.add_argument("--seed", type=int, default=0, metavar="S")
    run.add_argument("--explore", choices=["exhaustive"],
                     help="enumerate every schedule instead of one random run")
    run.add_argument("--max-depth", type=int, default=64,
                     help="exploration bound on schedule length")
    run.add_argument("--node-limit", type=int, default=1_000_000,
                     help="exploration bound on explored states")
    run.add_argument("--scenario", choices=["canonical"],
                     help="use the built-in two-server demonstration scenario "
                          "instead of a generated workload")
    run.add_argument("--checks", type=_parse_checks, default=harness.ALL_CHECKS)
    run.add_argument("--out", metavar="DIR")

    check = sub.add_parser("check", help="check a recorded trace file")
    check.add_argument("--trace", required=True, metavar="FILE")
    check.add_argument("--checks", type=_parse_checks, default=harness.ALL_CHECKS)

    fuzz = sub.add_parser("fuzz", help="random-schedule campaign")
    fuzz.add_argument("--protocol", required=True, choices=sorted(PROTOCOLS))
    fuzz.add_argument("--runs", type=int, required=True, metavar="N")
    fuzz.add_argument("--seed0", type=int, default=0, metavar="S")
    fuzz.add_argument("--objects", type=int, default=4, metavar="K")
    fuzz.add_argument("--max-writers", type=int, default=3)
    fuzz.add_argument("--max-readers", type=int, default=3)
    fuzz.add_argument("--max-txns", type=int, default=8)
    fuzz.add_argument("--checks", type=_parse_checks, default=harness.ALL_CHECKS)
    fuzz.add_argument("--out", metavar="DIR")
    return parser


def _cmd_run(args) -> int:
    if args.scenario == "canonical":
        workload = harness.canonical_snow_scenario(args.protocol)
    else:
        workload = harness.generate_workload(
            args.protocol, args.seed, k=args.objects, n_writers=args.writers,
            n_readers=args.readers, n_txns=args.txns)
    if args.explore == "exhaustive":
        policy = harness.Exhaustive(args.max_depth, args.node_limit)
    else:
        policy = RandomPolicy(args.seed)
    report = harness.run_experiment(workload, policy, checks=args.checks,
                                    out_dir=args.out)
    print(report.summary())
    return report.exit_code()


def _cmd_check(args) -> int:
    with open(args.trace) as f:
        history = trace.loads(f.read())
    proto = get_protocol(history.config.protocol)
    verdict = harness.check_history(history, proto, checks=args.checks)
    print(json.dumps(verdict.wire(), indent=2, sort_keys=True))
    if verdict.safety_failure:
        return harness.EXIT_SAFETY
    if verdict.liveness is not None and verdict.liveness.failed:
        return harness.EXIT_LIVENESS
    return harness.EXIT_OK


def _cmd_fuzz(args) -> int:
    report = harness.fuzz_campaign(
        args.protocol, args.runs, args.seed0, checks=args.checks,
        k=args.objects, max_writers=args.max_writers,
        max_readers=args.max_readers, max_txns=args.max_txns,
        out_dir=args.out)
    print(report.summary())
    return report.exit_code()


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors; remap to the documented code.
        return harness.EXIT_USAGE if e.code not in (0, None) else 0
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "check":
            return _cmd_check(args)
        if args.command == "fuzz":
            return _cmd_fuzz(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return harness.EXIT_USAGE
    return harness.EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
