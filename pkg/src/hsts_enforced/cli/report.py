"""Versioned JSON report emitted by ``hsget --json``."""

from __future__ import annotations

import json

from ..policy import ConnectionOutcome, Event, Result
from ..resolver import ResolutionMetrics

SCHEMA = "hsget-report/1"

EXIT_OK = 0
EXIT_FETCH_FAILED = 1
EXIT_USAGE = 2
EXIT_BLOCKED = 3

BLOCKED_NO_INDICATOR = "blocked: HSTS enforced, no HTTP-Required indicator"


def exit_code(outcome: ConnectionOutcome) -> int:
    if outcome.result is Result.BLOCKED:
        return EXIT_BLOCKED
    return EXIT_OK if outcome.request_ok else EXIT_FETCH_FAILED


def indicator(outcome: ConnectionOutcome) -> str | None:
    """The source that authorized an unsecure connection, if one was made."""
    if outcome.result in (Result.HTTP, Result.UNTRUSTED_HTTPS) and outcome.status is not None:
        return outcome.status.source.value
    return None


def blocked_message(outcome: ConnectionOutcome) -> str:
    if outcome.status is not None and outcome.status.disabled:
        return "blocked: no reachable server"
    return BLOCKED_NO_INDICATOR


def build_report(url: str, outcome: ConnectionOutcome, metrics: ResolutionMetrics | None,
                 response: dict | None = None) -> dict:
    report = {
        "schema": SCHEMA,
        "url": url,
        "result": outcome.result.value,
        "exit_code": exit_code(outcome),
        "indicator": indicator(outcome),
        "status": str(outcome.status) if outcome.status is not None else None,
        "request_ok": outcome.request_ok,
        "transcript": [{"ms": e.ms, "kind": e.kind, "detail": e.detail}
                       for e in outcome.transcript],
        "dns": None,
        "http_status": None,
    }
    if metrics is not None:
        report["dns"] = {
            "round_trips": metrics.round_trips,
            "wall_time_ms": round(metrics.wall_time, 3),
            "responses": [{"type": m.query_type, "size_bytes": m.size_bytes}
                          for m in metrics.responses()],
        }
    if response and "status" in response:
        report["http_status"] = response["status"]
    if outcome.result is Result.BLOCKED:
        report["message"] = blocked_message(outcome)
    return report


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)


def parse_report(text: str) -> dict:
    report = json.loads(text)
    if report.get("schema") != SCHEMA:
        raise ValueError(f"unsupported report schema {report.get('schema')!r}")
    missing = {"url", "result", "exit_code", "indicator", "status", "transcript"} - set(report)
    if missing:
        raise ValueError(f"report missing fields: {', '.join(sorted(missing))}")
    Result(report["result"])
    report["transcript"] = [Event(e["ms"], e["kind"], e["detail"]) for e in report["transcript"]]
    return report
