"""Command-line entry point: ``quadba run | sweep | verify-expander | analyze``."""
from __future__ import annotations

import argparse
import json
import sys

from . import expander, harness
from .adversaries import ADVERSARIES
from .protocols import PROTOCOLS

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _inputs(text: str):
    if text in ("unanimous", "split", "random") or text.startswith("unanimous:"):
        return text
    return [v.strip() for v in text.split(",")]


def _params(text: str | None) -> dict:
    if not text:
        return {}
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise harness.ConfigError(f"--adversary-params is not JSON: {e}") from None
    if not isinstance(d, dict):
        raise harness.ConfigError("--adversary-params must be a JSON object")
    return d


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="quadba", description="Quadratic Byzantine agreement simulator.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="simulate one configuration")
    r.add_argument("--protocol", required=True, choices=PROTOCOLS)
    r.add_argument("--n", type=int, required=True)
    r.add_argument("--f", default="max", help="fault budget, or 'max' for the protocol bound")
    r.add_argument("--epsilon", type=float, default=None)
    r.add_argument("--M", type=int, default=4, help="base-case committee size")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--adversary", default="passive", choices=ADVERSARIES)
    r.add_argument("--adversary-params", default=None, help="JSON object")
    r.add_argument("--inputs", default="unanimous",
                   help="unanimous, unanimous:V, split, random or a comma-separated list")
    r.add_argument("--domain", type=int, default=2, help="size of the value domain")
    r.add_argument("--over-bound", action="store_true", help="allow f above the fault bound")
    r.add_argument("--transcript", default=None, help="write the JSONL transcript here")
    r.add_argument("--out", default=None, help="write the run record (JSON) here")

    s = sub.add_parser("sweep", help="run every configuration of a sweep file")
    s.add_argument("config", help="YAML sweep file")
    s.add_argument("--out", default=None, help="JSONL records file")
    s.add_argument("--csv", default=None, help="CSV summary file")
    s.add_argument("--jobs", type=int, default=None, help=f"worker processes (default: ${harness.JOBS_ENV})")

    v = sub.add_parser("verify-expander", help="build and verify a random expander")
    v.add_argument("--n", type=int, required=True)
    v.add_argument("--epsilon", type=float, required=True)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--budget", type=int, default=expander.DEFAULT_BUDGET)
    v.add_argument("--closed", action="store_true", help="count S among its own neighbours")
    v.add_argument("--out", default=None)

    a = sub.add_parser("analyze", help="scaling report over a records file")
    a.add_argument("records", help="JSONL records file")
    a.add_argument("--out", default=None)
    return p


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _cmd_run(args) -> int:
    f = harness.max_faults(args.protocol, args.n, args.epsilon) if args.f == "max" else int(args.f)
    cfg = harness.RunConfig(
        protocol=args.protocol, n=args.n, f=f, epsilon=args.epsilon, M=args.M, seed=args.seed,
        adversary=args.adversary, adversary_params=_params(args.adversary_params),
        domain=args.domain, inputs=_inputs(args.inputs), over_bound=args.over_bound)
    rec, transcript = harness.execute(cfg)
    if args.transcript:
        with open(args.transcript, "w") as fh:
            fh.write(transcript.to_jsonl())
    _emit(json.dumps(rec.to_dict(), sort_keys=True, indent=2), args.out)
    return EXIT_VIOLATION if rec.violation else EXIT_OK


def _cmd_sweep(args) -> int:
    configs = harness.load_sweep(args.config)
    records = harness.run_suite(configs, jobs=args.jobs)
    if args.out:
        harness.write_records(records, args.out)
    else:
        for r in records:
            print(r.to_json())
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(harness.summary_csv(records))
    bad = sum(r.violation for r in records)
    over = sum(not r.in_bound for r in records)
    print(f"{len(records)} runs, {bad} violations, {over} over-bound", file=sys.stderr)
    return EXIT_VIOLATION if bad else EXIT_OK


def _cmd_verify(args) -> int:
    rep = expander.report(args.n, args.epsilon, args.seed, budget=args.budget, closed=args.closed)
    _emit(json.dumps(rep, sort_keys=True), args.out)
    return EXIT_OK


def _cmd_analyze(args) -> int:
    rep = harness.scaling_report(harness.read_records(args.records))
    _emit(json.dumps(rep, sort_keys=True, indent=2), args.out)
    ok = all(g["verdict"] == "quadratic-consistent" for g in rep.values())
    return EXIT_OK if ok else EXIT_VIOLATION


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "verify-expander": _cmd_verify, "analyze": _cmd_analyze}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (harness.ConfigError, harness.InsufficientData, expander.ExpanderError,
            ValueError, OSError) as e:
        print(f"quadba: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
