"""Vantage points that fetch ``http://<domain>/`` and report the HTTP-Required header."""

from __future__ import annotations

import http.client
from dataclasses import dataclass, field
from typing import Protocol

from .store import VantageResult

HEADER = "HTTP-Required"
INCLUDE_SUBDOMAINS = "includesubdomains"


@dataclass(frozen=True)
class ProbeResponse:
    status: int | None
    headers: dict = field(default_factory=dict)
    error: str | None = None

    def header(self, name: str) -> str | None:
        for key, value in self.headers.items():
            if key.lower() == name.lower():
                return value
        return None


class VantagePoint(Protocol):
    id: str

    def fetch(self, domain: str) -> ProbeResponse: ...


def format_header(include_subdomains: bool = False) -> str:
    return "1; includeSubdomains" if include_subdomains else "1"


def parse_header(value: str) -> tuple[bool, bool]:
    """Return (value present, includeSubdomains directive present)."""
    parts = [p.strip() for p in value.split(";")]
    present = bool(parts and parts[0])
    return present, any(p.lower() == INCLUDE_SUBDOMAINS for p in parts[1:])


def judge(response: ProbeResponse, include_subdomains: bool) -> tuple[bool, str]:
    if response.error is not None:
        return False, f"unreachable: {response.error}"
    value = response.header(HEADER)
    if value is None:
        return False, f"no {HEADER} header (HTTP {response.status})"
    present, sub = parse_header(value)
    if not present:
        return False, f"empty {HEADER} header"
    if include_subdomains and not sub:
        return False, f"{HEADER} header lacks includeSubdomains"
    return True, f"{HEADER}: {value}"


def probe(vantage: VantagePoint, domain: str, include_subdomains: bool) -> VantageResult:
    try:
        response = vantage.fetch(domain)
    except Exception as exc:  # any probe failure counts against the domain
        response = ProbeResponse(None, error=f"{type(exc).__name__}: {exc}")
    passed, reason = judge(response, include_subdomains)
    return VantageResult(vantage.id, passed, reason)


class SimSites:
    """In-process stand-in for the web: domain -> response headers."""

    def __init__(self):
        self.headers: dict = {}

    def serve(self, domain: str, headers: dict | None = None):
        self.headers[domain] = dict(headers or {})

    def set_header(self, domain: str, value: str | None):
        site = self.headers.setdefault(domain, {})
        if value is None:
            site.pop(HEADER, None)
        else:
            site[HEADER] = value

    def take_down(self, domain: str):
        self.headers.pop(domain, None)


@dataclass
class SimVantage:
    id: str
    sites: SimSites
    # per-vantage view, e.g. a routing attacker in front of one vantage
    overrides: dict = field(default_factory=dict)
    unreachable: set = field(default_factory=set)

    def fetch(self, domain: str) -> ProbeResponse:
        if domain in self.unreachable:
            return ProbeResponse(None, error="timed out")
        if domain in self.overrides:
            return ProbeResponse(200, dict(self.overrides[domain]))
        if domain not in self.sites.headers:
            return ProbeResponse(None, error="connection refused")
        return ProbeResponse(200, dict(self.sites.headers[domain]))


@dataclass
class HttpVantage:
    """Plain-HTTP probe over the network, optionally through a forward proxy."""

    id: str
    proxy: str | None = None
    timeout: float = 10.0
    connect_to: dict = field(default_factory=dict)

    def fetch(self, domain: str) -> ProbeResponse:
        host, port = self.connect_to.get(domain, (domain, 80))
        path = "/"
        if self.proxy:
            host, _, p = self.proxy.partition(":")
            port = int(p or 3128)
            path = f"http://{domain}/"
        conn = http.client.HTTPConnection(host, port, timeout=self.timeout)
        try:
            conn.request("GET", path, headers={"Host": domain, "User-Agent": "hreg-vantage/1"})
            resp = conn.getresponse()
            resp.read(65536)
            return ProbeResponse(resp.status, {k: v for k, v in resp.getheaders()})
        except (OSError, http.client.HTTPException) as exc:
            return ProbeResponse(None, error=str(exc) or type(exc).__name__)
        finally:
            conn.close()
