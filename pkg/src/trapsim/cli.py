"""Command line entry point: ``python -m trapsim <command>``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import harness
from .game_params import as_fraction, params_report


def _fraction(text: str) -> Fraction:
    try:
        return as_fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not an exact number: {text!r}") from None


def _int_list(text: str) -> list[int]:
    """'10,13' or '7-13' or a mix of both."""
    out = []
    try:
        for part in text.split(","):
            if "-" in part:
                lo, hi = part.split("-")
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None
    return out


def _print_kv(report: dict, out=None):
    out = out or sys.stdout
    for key, value in report.items():
        if isinstance(value, bool):
            value = "yes" if value else "no"
        print(f"{key}: {value}", file=out)


def cmd_params(args) -> int:
    if (args.k is None) != (args.t is None):
        print("error: give both k and t, or neither", file=sys.stderr)
        return 2
    if args.n < 1 or (args.k is not None and (args.k < 0 or args.t < 0)):
        print("error: n must be positive and k, t non-negative", file=sys.stderr)
        return 2
    report = params_report(args.n, args.k, args.t, args.G, args.d)
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        _print_kv(report)
    return 0


def cmd_simulate(args) -> int:
    status = 0
    reports = []
    for ref in args.scenario:
        try:
            sc = harness.load_scenario(ref)
        except harness.ScenarioError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        if args.seeds is not None:
            sc.seeds = tuple(args.seeds)
        report = harness.run_scenario(sc, args.threads, args.trace_dir)
        reports.append(report)
        agg = report["aggregate"]
        verdict = "PASS" if report["passed"] else "FAIL"
        print(f"{verdict} {sc.name}: runs={agg['runs']} disagreements={agg['disagreements']} "
              f"non_terminated={agg['non_terminated']} classes={json.dumps(agg['class_histogram'], sort_keys=True)}")
        for a in report["assertions"]:
            if not a["passed"]:
                print(f"  assertion {a['assertion']} failed: {a['detail']}")
        if not report["passed"]:
            status = 1
    if args.out:
        body = reports[0] if len(reports) == 1 else reports
        Path(args.out).write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    return status


def cmd_sweep(args) -> int:
    rows = harness.sweep(args.n, args.k, args.t, args.d, args.G, args.threads)
    if not args.all:
        rows = [r for r in rows if r.get("feasible")]
    text = json.dumps(rows, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def cmd_verify(args) -> int:
    from . import acceptance

    only = set(args.only) if args.only else None
    results = acceptance.run_all(only=only, quick=args.quick)
    for r in results:
        print(r.line())
    summary = {"passed": all(r.passed for r in results),
               "failing": [r.number for r in results if not r.passed],
               "criteria": [r.as_dict() for r in results]}
    if args.json:
        Path(args.json).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if not summary["passed"]:
        print("failing criteria: " + ", ".join(str(n) for n in summary["failing"]))
        return 1
    return 0


def cmd_trace(args) -> int:
    try:
        if args.update:
            path = harness.write_golden(args.name)
            print(f"wrote {path}")
            return 0
        lines, out, _ = harness.replay_golden(args.name, isolation_cap=args.isolation_cap)
    except harness.ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        # output piped into head and friends
        sys.stdout = open(os.devnull, "w")
        return 0
    if args.full:
        for line in out.trace.lines():
            print(line)
        return 0
    diff = harness.diff_golden(args.name, lines)
    if not out.terminated:
        print("non-termination: some correct player never decided")
    if diff:
        print("\n".join(diff))
        return 1
    print(f"{args.name}: {len(lines)} milestone lines match")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="trapsim", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params", help="closed-form thresholds for n (and optionally k, t)")
    p.add_argument("n", type=int)
    p.add_argument("k", type=int, nargs="?")
    p.add_argument("t", type=int, nargs="?")
    p.add_argument("--G", type=_fraction, default=Fraction(1), help="total coalition gain")
    p.add_argument("--d", type=_fraction, default=None, help="deposit coefficient, e.g. 0.01 or 1/300")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("simulate", help="run scenario files or bundled scenarios")
    p.add_argument("scenario", nargs="+", help="path or bundled name: " + ", ".join(harness.bundled_scenarios()))
    p.add_argument("--seeds", type=int, nargs=2, metavar=("FIRST", "LAST"))
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--trace-dir", help="write one trace log per seed into this directory")
    p.add_argument("--threads", type=int, default=None, help="defaults to TRAP_THREADS or 1")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="params reports over a cartesian grid")
    p.add_argument("--n", type=_int_list, required=True)
    p.add_argument("--k", type=_int_list, required=True)
    p.add_argument("--t", type=_int_list, required=True)
    p.add_argument("--d", type=_fraction, nargs="+", default=[None])
    p.add_argument("--G", type=_fraction, default=Fraction(1))
    p.add_argument("--all", action="store_true", help="keep infeasible rows")
    p.add_argument("--out")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--only", type=_int_list, help="criterion numbers, e.g. 1,2,9")
    p.add_argument("--quick", action="store_true", help="fewer seeds; for smoke checks only")
    p.add_argument("--json", help="write a machine-readable summary here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("trace", help="replay a golden trace and diff its milestones")
    p.add_argument("name", nargs="?", default="baiting_n10")
    p.add_argument("--update", action="store_true", help="rewrite the golden log")
    p.add_argument("--full", action="store_true", help="print the whole trace instead of a diff")
    p.add_argument("--isolation-cap", type=int, default=None,
                   help="partition length in steps; negative never heals")
    p.set_defaults(func=cmd_trace)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except harness.ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        # output piped into head and friends
        sys.stdout = open(os.devnull, "w")
        return 0


if __name__ == "__main__":
    sys.exit(main())
