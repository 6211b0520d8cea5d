"""Scenario files, the scenario runner and the connection-outcome matrix.

A scenario file has one ``key = value`` per line; ``#`` starts a comment.
List values are comma separated.  Example::

    servers = http-only, trusted-https
    scheme = http
    indicator = httpreq
    attacker = block-https
    rtt_ms = 20
    clock_offset = +43d
"""

from __future__ import annotations

import enum
import io
import random
import re
from dataclasses import dataclass, field, fields

from ..dns.chain import ValidationResult
from ..dns.name import Name
from ..policy import (DEFAULT_RESERVED, ConnectionOutcome, Result, Scheme, UrlTarget,
                      plan_connection)
from ..preload import DEFAULT_VALIDITY, PreloadArtifact, PreloadEntry, build
from ..resolver import CacheStore, ResolutionMetrics, StubResolver
from .clock import BASE_EPOCH, VirtualClock
from .dnsworld import DnsWorld, build_dns_world
from .network import Attack, ServerKind, SimDnsTransport, SimNetwork, Tap


class Indicator(enum.Enum):
    NONE = "none"
    PRELOAD = "preload"
    HTTPREQ = "httpreq"
    HTTPREQ_CUSTOM_ANCHOR = "httpreq-custom-anchor"


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    servers: frozenset
    scheme: Scheme = Scheme.NONE
    indicator: Indicator = Indicator.NONE
    attacker: frozenset = frozenset()
    rtt_ms: float = 20.0
    seed: int = 0
    clock_offset: int = 0
    domain: str = "example.tld"
    include_subdomains: bool = False
    resolver_cache: str = "cold"
    processing_ms: float = 2.0
    path: str = "/"

    def __post_init__(self):
        object.__setattr__(self, "servers", frozenset(self.servers))
        object.__setattr__(self, "attacker", frozenset(self.attacker))
        if not self.servers:
            raise ScenarioError("servers must not be empty")
        if self.rtt_ms < 0 or self.processing_ms < 0:
            raise ScenarioError("rtt_ms and processing_ms must be >= 0")
        if self.resolver_cache not in ("cold", "typical"):
            raise ScenarioError("resolver_cache must be 'cold' or 'typical'")

    def url(self) -> str:
        if self.scheme is Scheme.NONE:
            return f"{self.domain}{self.path}"
        return f"{self.scheme.value}://{self.domain}{self.path}"


# --- scenario text format ---------------------------------------------------------

def _parse_duration(text: str) -> int:
    m = re.fullmatch(r"([+-]?\d+)\s*([smhd]?)", text.strip())
    if not m:
        raise ValueError(f"bad duration {text!r}")
    scale = {"": 1, "s": 1, "m": 60, "h": 3600, "d": 86400}[m.group(2)]
    return int(m.group(1)) * scale


def _parse_bool(text: str) -> bool:
    if text.lower() in ("true", "yes", "1", "on"):
        return True
    if text.lower() in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"bad boolean {text!r}")


def _parse_set(enum_type, text: str) -> frozenset:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if items == ["none"] and enum_type is Attack:
        return frozenset()
    return frozenset(enum_type(t) for t in items)


_PARSERS = {
    "servers": lambda v: _parse_set(ServerKind, v),
    "scheme": lambda v: Scheme(v.lower()),
    "indicator": lambda v: Indicator(v.lower()),
    "attacker": lambda v: _parse_set(Attack, v),
    "rtt_ms": float,
    "seed": int,
    "clock_offset": _parse_duration,
    "domain": str,
    "include_subdomains": _parse_bool,
    "resolver_cache": str,
    "processing_ms": float,
    "path": str,
}


def parse_scenario(text: str, source: str = "<scenario>") -> ScenarioConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ScenarioError(f"{source}:{lineno}: expected 'key = value'")
        if key not in _PARSERS:
            raise ScenarioError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ScenarioError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ScenarioError(f"{source}:{lineno}: {key}: {exc}") from None
    if "servers" not in values:
        raise ScenarioError(f"{source}: missing required key 'servers'")
    try:
        return ScenarioConfig(**values)
    except ScenarioError as exc:
        raise ScenarioError(f"{source}: {exc}") from None


def format_scenario(config: ScenarioConfig) -> str:
    out = []
    for f in fields(config):
        value = getattr(config, f.name)
        if isinstance(value, frozenset):
            text = ", ".join(sorted(v.value for v in value)) or "none"
        elif isinstance(value, enum.Enum):
            text = value.value
        elif isinstance(value, bool):
            text = str(value).lower()
        else:
            text = str(value)
        out.append(f"{f.name} = {text}")
    return "\n".join(out) + "\n"


def load_scenario(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read(), str(path))


# --- running ----------------------------------------------------------------------

@dataclass
class Observed:
    config: ScenarioConfig
    outcome: ConnectionOutcome
    metrics: ResolutionMetrics
    dns_message_log: list
    tap: Tap
    resolutions: list = field(default_factory=list)

    @property
    def result(self) -> Result:
        return self.outcome.result

    def to_text(self) -> str:
        out = io.StringIO()
        out.write(f"result: {self.outcome.result.value}\n")
        out.write(f"status: {self.outcome.status or 'not checked'}\n")
        out.write(f"dns round trips: {self.metrics.round_trips}"
                  f" ({self.metrics.wall_time:.0f} ms)\n")
        out.write(f"plaintext requests seen on path: {len(self.tap.http_requests)}\n")
        out.write("transcript:\n")
        for line in self.outcome.transcript_text().splitlines():
            out.write(f"  {line}\n")
        return out.getvalue()


class SimEnv:
    """PolicyEnv backed by a SimNetwork."""

    def __init__(self, network: SimNetwork, anchors, preload: PreloadArtifact | None,
                 cache: CacheStore, reserved=DEFAULT_RESERVED, seed: int = 0,
                 dns_timeout: float = 2.0):
        self.network = network
        self.anchors = anchors
        self._preload = preload
        self.cache = cache
        self.reserved = reserved
        self.metrics = ResolutionMetrics()
        self.results: list = []
        self.rng = random.Random(f"stub:{seed}")
        self.dns_timeout = dns_timeout

    def now(self) -> int:
        return self.network.clock.now()

    def monotonic_ms(self) -> float:
        return self.network.clock.monotonic_ms()

    def preload(self) -> PreloadArtifact | None:
        return self._preload

    def resolve_httpreq(self, domain: str) -> ValidationResult:
        resolver = StubResolver(self.network.dns_transport(), self.anchors, self.cache,
                                clock=self.network.clock.monotonic_ms,
                                timeout=self.dns_timeout, rng=self.rng)
        result, metrics = resolver.resolve(domain, self.now())
        if not self.metrics.domain_length:
            self.metrics.domain_length = metrics.domain_length
        self.metrics.merge(metrics)
        self.results.append(result)
        return result

    def probe_http(self, host, port):
        return self.network.probe_http(host, port)

    def connect_https(self, host, port):
        return self.network.connect_https(host, port)

    def send_request(self, target, transport):
        return self.network.send_request(target, transport)


_WORLD_CACHE: dict = {}


def world_for(config: ScenarioConfig) -> DnsWorld:
    # signing is the costly part of a run; worlds are immutable once built
    flags = None
    if config.indicator in (Indicator.HTTPREQ, Indicator.HTTPREQ_CUSTOM_ANCHOR):
        flags = 1 if config.include_subdomains else 0
    key = (config.domain, flags, config.indicator is Indicator.HTTPREQ_CUSTOM_ANCHOR, config.seed)
    if key not in _WORLD_CACHE:
        _WORLD_CACHE[key] = build_dns_world(config.domain, httpreq_flags=flags,
                                            custom_anchor=key[2], seed=config.seed)
    return _WORLD_CACHE[key]


def default_preload(config: ScenarioConfig) -> PreloadArtifact:
    entries = []
    if config.indicator is Indicator.PRELOAD:
        entries.append(PreloadEntry(config.domain, config.include_subdomains))
    return build(entries, issued_at=BASE_EPOCH, validity=DEFAULT_VALIDITY)


def warm_cache(world: DnsWorld, cache: CacheStore, anchors, now: int):
    """Fill the cache the way an earlier lookup of a sibling domain would."""
    if world.site_zone.is_root or world.site_zone.parent().is_root:
        return
    scratch = VirtualClock()
    net = SimNetwork(scratch, world, frozenset({ServerKind.HTTP_ONLY}))
    StubResolver(SimDnsTransport(net, attacked=False), anchors, cache,
                 clock=scratch.monotonic_ms, rng=random.Random(0)).resolve(
        world.site_zone.parent(), now)


def run_scenario(config: ScenarioConfig, preload: PreloadArtifact | None = None) -> Observed:
    world = world_for(config)
    clock = VirtualClock(offset=config.clock_offset)
    network = SimNetwork(clock, world, config.servers, config.attacker, config.rtt_ms,
                         config.processing_ms, rng=random.Random(f"attack:{config.seed}"),
                         host=Name.from_text(config.domain).to_text(omit_final_dot=True))
    cache = CacheStore()
    if config.resolver_cache == "typical":
        warm_cache(world, cache, world.anchors, clock.now())
    artifact = preload if preload is not None else default_preload(config)
    env = SimEnv(network, world.anchors, artifact, cache, seed=config.seed)
    outcome = plan_connection(UrlTarget.parse(config.url()), env)
    log = [(m.size_bytes, m.query_type) for m in env.metrics.responses()]
    return Observed(config, outcome, env.metrics, log, network.tap, env.results)


# --- outcome matrix ---------------------------------------------------------------

SERVER_SETS = (
    ("HTTP", frozenset({ServerKind.HTTP_ONLY})),
    ("untrusted HTTPS", frozenset({ServerKind.UNTRUSTED_HTTPS})),
    ("HTTP + untrusted HTTPS", frozenset({ServerKind.HTTP_ONLY, ServerKind.UNTRUSTED_HTTPS})),
    ("HTTP + HTTPS", frozenset({ServerKind.HTTP_ONLY, ServerKind.TRUSTED_HTTPS})),
    ("HTTPS", frozenset({ServerKind.TRUSTED_HTTPS})),
)
SCHEMES = (Scheme.HTTP, Scheme.HTTPS, Scheme.NONE)
ANY_SCHEME = SCHEMES
WEB_SCHEMES = (Scheme.HTTPS, Scheme.NONE)

# table columns: server set plus the schemes merged into the column
COLUMNS = (
    ("HTTP", "any", ANY_SCHEME),
    ("untrusted HTTPS", "any", ANY_SCHEME),
    ("HTTP + untrusted HTTPS", "HTTP", (Scheme.HTTP,)),
    ("HTTP + untrusted HTTPS", "HTTPS/None", WEB_SCHEMES),
    ("HTTP + HTTPS", "HTTP", (Scheme.HTTP,)),
    ("HTTP + HTTPS", "HTTPS/None", WEB_SCHEMES),
    ("HTTPS", "any", ANY_SCHEME),
)

EXPECTED_ROWS = {
    "no indicator": ("Blocked", "Blocked", "Blocked", "Blocked", "Trusted", "Trusted", "Trusted"),
    "indicator": ("Http", "Untrusted", "Http", "Untrusted", "Http", "Trusted", "Trusted"),
}


class MergeError(AssertionError):
    pass


@dataclass
class Matrix:
    indicator: Indicator
    cells: dict  # (row, server label, scheme) -> Observed

    def result(self, row: str, servers: str, scheme: Scheme) -> Result:
        return self.cells[(row, servers, scheme)].result

    def row(self, row: str) -> tuple:
        """Merged row; raises MergeError if a merged column hides a difference."""
        out = []
        for servers, _, schemes in COLUMNS:
            results = {self.result(row, servers, s) for s in schemes}
            if len(results) != 1:
                raise MergeError(f"{row} / {servers}: schemes disagree: {sorted(r.value for r in results)}")
            out.append(results.pop().short)
        return tuple(out)

    def deviations(self) -> list[str]:
        problems = []
        for row, expected in EXPECTED_ROWS.items():
            try:
                got = self.row(row)
            except MergeError as exc:
                problems.append(str(exc))
                continue
            for (servers, schemes, _), want, have in zip(COLUMNS, expected, got):
                if want != have:
                    problems.append(f"{row} / {servers} ({schemes}): expected {want}, got {have}")
        return problems

    def render(self) -> str:
        headers = [f"{s} [{sch}]" if sch != "any" else s for s, sch, _ in COLUMNS]
        rows = [(label, self.row(label)) for label in EXPECTED_ROWS]
        first = max(len(label) for label, _ in rows)
        widths = [max(len(h), *(len(r[i]) for _, r in rows)) for i, h in enumerate(headers)]
        lines = ["  ".join([" " * first] + [h.ljust(w) for h, w in zip(headers, widths)]).rstrip()]
        for label, cells in rows:
            lines.append("  ".join([label.ljust(first)]
                                   + [c.ljust(w) for c, w in zip(cells, widths)]).rstrip())
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("row,servers,scheme,result\n")
        for (row, servers, scheme), observed in self.cells.items():
            out.write(f"{row},{servers},{scheme.value},{observed.result.value}\n")
        return out.getvalue()


def effectiveness_matrix(indicator: Indicator = Indicator.HTTPREQ, seed: int = 0,
                         rtt_ms: float = 20.0) -> Matrix:
    """Run the full 5 x 3 x 2 cross-product of servers, schemes and indicator rows."""
    cells = {}
    for row, row_indicator in (("no indicator", Indicator.NONE), ("indicator", indicator)):
        for label, servers in SERVER_SETS:
            for scheme in SCHEMES:
                config = ScenarioConfig(servers, scheme, row_indicator, seed=seed, rtt_ms=rtt_ms)
                cells[(row, label, scheme)] = run_scenario(config)
    return Matrix(indicator, cells)
