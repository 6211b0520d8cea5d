"""hsget: fetch a URL under the HSTS-Enforced policy.

There is deliberately no flag to bypass the policy.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from ..policy import InvalidTarget, Result, UrlTarget, plan_connection
from ..sim.clock import BASE_EPOCH
from ..sim.scenario import ScenarioError, load_scenario, run_scenario
from .config import CliConfig, ConfigError
from .netenv import NetworkEnv, parse_connect_to
from .report import EXIT_USAGE, blocked_message, build_report, dump_report, exit_code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hsget", description="Fetch a URL with HTTPS enforced "
                                "unless the site carries an HTTP-Required indicator.")
    p.add_argument("url")
    p.add_argument("--config", metavar="FILE", help="JSON config file")
    p.add_argument("--preload", metavar="FILE", help="HTTP-Required preload list (.hrpl)")
    p.add_argument("--anchor", metavar="FILE", action="append", default=None,
                   help="trust anchor file (repeatable)")
    p.add_argument("--resolver", metavar="ADDR", help="recursive resolver host:port")
    p.add_argument("--now", metavar="EPOCH", type=int, help="override the clock")
    p.add_argument("--timeout", metavar="SECONDS", type=float, help="per-probe timeout")
    p.add_argument("--ca-file", metavar="FILE", help="CA bundle for trusted HTTPS")
    p.add_argument("--connect-to", metavar="HOST:PORT:CHOST:CPORT", action="append",
                   default=[], help="dial CHOST:CPORT when connecting to HOST:PORT")
    p.add_argument("--world", metavar="SCENARIO", help="run against a simulated world")
    p.add_argument("--explain", action="store_true", help="print the decision transcript")
    p.add_argument("--json", action="store_true", help="print a JSON report")
    return p


def _simulated(args, cfg: CliConfig, target: UrlTarget):
    config = load_scenario(args.world)
    changes = dict(domain=target.host, scheme=target.scheme, path=target.path)
    if args.now is not None:
        changes["clock_offset"] = args.now - BASE_EPOCH
    config = dataclasses.replace(config, **changes)
    observed = run_scenario(config, preload=cfg.load_preload() if cfg.preload_path else None)
    return observed.outcome, observed.metrics, None


def _real(args, cfg: CliConfig, target: UrlTarget):
    connect_to = dict(parse_connect_to(spec) for spec in args.connect_to)
    env = NetworkEnv(cfg.load_anchors(), cfg.load_preload(), cfg.resolver(),
                     timeout=cfg.probe_timeout, dns_timeout=cfg.dns_timeout, now=args.now,
                     ca_file=args.ca_file, connect_to=connect_to, reserved=cfg.reserved_set())
    outcome = plan_connection(target, env)
    return outcome, env.metrics, env.response


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = CliConfig.from_file(args.config) if args.config else CliConfig()
        if args.preload:
            cfg.preload_path = args.preload
        if args.anchor:
            cfg.trust_anchor_paths = args.anchor
        if args.resolver:
            cfg.resolver_address = args.resolver
        if args.timeout is not None:
            cfg.probe_timeout = args.timeout
        target = UrlTarget.parse(args.url)
        if args.world:
            outcome, metrics, response = _simulated(args, cfg, target)
        else:
            outcome, metrics, response = _real(args, cfg, target)
    except (ConfigError, InvalidTarget, ScenarioError, ValueError, OSError) as exc:
        print(f"hsget: {exc}", file=sys.stderr)
        return EXIT_USAGE

    code = exit_code(outcome)
    if args.json or cfg.output == "json":
        print(dump_report(build_report(args.url, outcome, metrics, response)))
    else:
        if args.explain:
            sys.stderr.write(outcome.transcript_text())
        if outcome.result is Result.BLOCKED:
            print(blocked_message(outcome), file=sys.stderr)
        else:
            how = outcome.result.value
            if outcome.status is not None and outcome.status.disabled \
                    and outcome.result is not Result.TRUSTED_HTTPS:
                how += f" (allowed by {outcome.status.source.value})"
            print(f"hsget: fetched over {how}", file=sys.stderr)
            if response and "body" in response:
                sys.stdout.buffer.write(response["body"])
                sys.stdout.flush()
            elif response and "error" in response:
                print(f"hsget: request failed: {response['error']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
