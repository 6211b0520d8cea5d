"""hsim: run scenario files or the full connection-outcome matrix."""

from __future__ import annotations

import argparse
import json
import sys

from ..sim.scenario import Indicator, ScenarioError, effectiveness_matrix, load_scenario, run_scenario


def cmd_run(args) -> int:
    config = load_scenario(args.scenario)
    observed = run_scenario(config)
    if args.json:
        print(json.dumps({
            "result": observed.result.value,
            "status": str(observed.outcome.status) if observed.outcome.status else None,
            "round_trips": observed.metrics.round_trips,
            "wall_time_ms": observed.metrics.wall_time,
            "dns_messages": [[size, kind] for size, kind in observed.dns_message_log],
            "plaintext_requests": len(observed.tap.http_requests),
            "transcript": observed.outcome.transcript_text().splitlines(),
        }, indent=2))
    else:
        sys.stdout.write(observed.to_text())
    return 0


def cmd_matrix(args) -> int:
    matrix = effectiveness_matrix(Indicator(args.indicator), seed=args.seed)
    if args.csv:
        sys.stdout.write(matrix.to_csv())
    else:
        sys.stdout.write(matrix.render())
    problems = matrix.deviations()
    for problem in problems:
        print(f"deviation: {problem}", file=sys.stderr)
    return 1 if problems else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hsim", description="HSTS-Enforced attack simulator")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one scenario file")
    r.add_argument("scenario")
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=cmd_run)
    m = sub.add_parser("matrix", help="run every server/scheme/indicator combination")
    m.add_argument("--csv", action="store_true")
    m.add_argument("--indicator", default="httpreq",
                   choices=[i.value for i in Indicator if i is not Indicator.NONE])
    m.add_argument("--seed", type=int, default=0)
    m.set_defaults(func=cmd_matrix)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, OSError) as exc:
        print(f"hsim: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
