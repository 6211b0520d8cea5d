"""HSTS-Enforced connection policy.

HTTPS is the default for every host.  Plaintext HTTP, or HTTPS with an
untrusted certificate, is only used after a status check finds an
HTTP-Required indicator (or an accessibility exemption) for the host.

The engine does no I/O; all effects go through a :class:`PolicyEnv`.
"""

from __future__ import annotations

import enum
import ipaddress
import re
from dataclasses import dataclass, field
from typing import Protocol
from urllib.parse import urlsplit

from .dns.chain import AnchorKind, ValidationResult
from .preload import LookupStatus, PreloadArtifact


class InvalidTarget(ValueError):
    pass


class Scheme(enum.Enum):
    HTTP = "http"
    HTTPS = "https"
    NONE = "none"


_LABEL = re.compile(r"^[a-z0-9_](?:[a-z0-9_-]{0,61}[a-z0-9_])?$")


def normalize_host(host: str) -> str:
    """Lowercase and check a host; IPv6 literals may carry brackets."""
    if not host:
        raise InvalidTarget("empty host")
    if host.startswith("[") and host.endswith("]"):
        host = host[1:-1]
    if ":" in host:
        try:
            return str(ipaddress.IPv6Address(host))
        except ValueError as exc:
            raise InvalidTarget(f"bad IPv6 literal {host!r}") from exc
    host = host.lower()
    if host.endswith("."):
        host = host[:-1]
    if _looks_like_ipv4(host):
        try:
            return str(ipaddress.IPv4Address(host))
        except ValueError as exc:
            raise InvalidTarget(f"bad IPv4 literal {host!r}") from exc
    if not host or len(host) > 253:
        raise InvalidTarget("host must be 1-253 characters")
    for label in host.split("."):
        if not _LABEL.match(label):
            raise InvalidTarget(f"bad label {label!r} in {host!r}")
    return host


def _looks_like_ipv4(host: str) -> bool:
    return bool(re.fullmatch(r"[0-9.]+", host))


@dataclass(frozen=True)
class UrlTarget:
    scheme: Scheme
    host: str
    port: int | None = None
    path: str = "/"

    def __post_init__(self):
        object.__setattr__(self, "host", normalize_host(self.host))
        if self.port is not None and not 1 <= self.port <= 65535:
            raise InvalidTarget(f"port {self.port} out of range")

    @classmethod
    def parse(cls, url: str) -> "UrlTarget":
        url = url.strip()
        if not url:
            raise InvalidTarget("empty URL")
        try:
            parts = urlsplit(url if "://" in url else "//" + url)
        except ValueError as exc:
            raise InvalidTarget(str(exc)) from None
        if "://" not in url:
            scheme = Scheme.NONE
        else:
            try:
                scheme = Scheme(parts.scheme.lower())
            except ValueError:
                raise InvalidTarget(f"unsupported scheme {parts.scheme!r}") from None
            if scheme is Scheme.NONE:
                raise InvalidTarget("unsupported scheme 'none'")
        try:
            port = parts.port
        except ValueError as exc:
            raise InvalidTarget(str(exc)) from exc
        host = parts.hostname or ""
        if parts.netloc.startswith("[") or (parts.hostname and ":" in parts.hostname):
            host = f"[{parts.hostname}]"
        path = parts.path or "/"
        if parts.query:
            path += "?" + parts.query
        return cls(scheme, host, port, path)

    @property
    def http_port(self) -> int:
        return self.port or 80

    @property
    def https_port(self) -> int:
        return self.port or 443

    def url(self) -> str:
        host = f"[{self.host}]" if ":" in self.host else self.host
        port = f":{self.port}" if self.port else ""
        prefix = "" if self.scheme is Scheme.NONE else f"{self.scheme.value}://"
        return f"{prefix}{host}{port}{self.path}"


# --- authority classification ---------------------------------------------------

class AuthorityClass(enum.Enum):
    IP_LITERAL = "ip-literal"
    LOCALHOST = "localhost"
    MDNS = "mdns"
    RESERVED = "reserved"
    PUBLIC_DOMAIN = "public-domain"


# names set aside by the IANA special-use registry that never resolve publicly
DEFAULT_RESERVED = frozenset({"test", "invalid", "home.arpa", "localhost", "local"})
# the documentation names too; opt in through configuration
IANA_SPECIAL_USE = DEFAULT_RESERVED | {"example", "example.com", "example.net", "example.org",
                                       "onion", "alt"}


def _suffix_match(host: str, suffix: str) -> bool:
    suffix = suffix.strip(".").lower()
    return host == suffix or host.endswith("." + suffix)


def classify_authority(host: str, reserved_set=DEFAULT_RESERVED) -> AuthorityClass:
    host = normalize_host(host)
    if ":" in host or _looks_like_ipv4(host):
        return AuthorityClass.IP_LITERAL
    if _suffix_match(host, "localhost"):
        return AuthorityClass.LOCALHOST
    if _suffix_match(host, "local"):
        return AuthorityClass.MDNS
    if any(_suffix_match(host, s) for s in reserved_set):
        return AuthorityClass.RESERVED
    return AuthorityClass.PUBLIC_DOMAIN


# --- status ---------------------------------------------------------------------

class HstsState(enum.Enum):
    ENABLED = "enabled"
    DISABLED = "disabled"


class StatusSource(enum.Enum):
    NONE = "none"
    EXEMPTION = "exemption"
    PRELOAD_LIST = "preload-list"
    HTTPREQ_RECORD = "httpreq-record"
    CUSTOM_ANCHOR_HTTPREQ = "custom-anchor-httpreq"


@dataclass(frozen=True)
class HstsStatus:
    state: HstsState
    source: StatusSource = StatusSource.NONE

    def __post_init__(self):
        if (self.state is HstsState.DISABLED) == (self.source is StatusSource.NONE):
            raise ValueError("Disabled needs exactly one source; Enabled has none")

    @property
    def disabled(self) -> bool:
        return self.state is HstsState.DISABLED

    def __str__(self) -> str:
        if self.disabled:
            return f"disabled/{self.source.value}"
        return "enabled"


ENABLED = HstsStatus(HstsState.ENABLED)


class HttpListener(enum.Enum):
    PRESENT = "present"
    ABSENT = "absent"
    TIMEOUT = "timeout"


class HttpsResult(enum.Enum):
    TRUSTED_OK = "trusted-ok"
    UNTRUSTED_CERT = "untrusted-cert"
    NO_LISTENER = "no-listener"
    TIMEOUT = "timeout"


class Transport(enum.Enum):
    HTTP = "http"
    TRUSTED_HTTPS = "trusted-https"
    UNTRUSTED_HTTPS = "untrusted-https"


class PolicyEnv(Protocol):
    """Everything the engine needs from the outside world."""

    reserved: frozenset

    def now(self) -> int: ...

    def monotonic_ms(self) -> float: ...

    def preload(self) -> PreloadArtifact | None: ...

    def resolve_httpreq(self, domain: str) -> ValidationResult: ...

    def probe_http(self, host: str, port: int) -> HttpListener: ...

    def connect_https(self, host: str, port: int) -> HttpsResult: ...

    def send_request(self, target: UrlTarget, transport: Transport) -> bool: ...


@dataclass(frozen=True)
class Event:
    ms: int
    kind: str
    detail: str = ""

    def to_line(self) -> str:
        return f"{self.ms} {self.kind} {self.detail}".rstrip()


INDICATOR_LOOKUPS = ("preload-lookup", "httpreq-resolve")


def hsts_status(domain: str, env: PolicyEnv, log=None) -> HstsStatus:
    """Fixed order: exemptions, then the preload list, then an HTTPREQ record."""
    log = log or (lambda kind, detail="": None)
    authority = classify_authority(domain, env.reserved)
    if authority is not AuthorityClass.PUBLIC_DOMAIN:
        log("exemption", authority.value)
        return HstsStatus(HstsState.DISABLED, StatusSource.EXEMPTION)

    artifact = env.preload()
    if artifact is None:
        log("preload-lookup", "EXPIRED (no list loaded)")
    else:
        hit = artifact.lookup(domain, env.now())
        log("preload-lookup", str(hit))
        if hit.status is LookupStatus.HIT:
            return HstsStatus(HstsState.DISABLED, StatusSource.PRELOAD_LIST)

    try:
        result = env.resolve_httpreq(domain)
    except Exception as exc:  # fail secure on anything the resolver lets slip
        log("httpreq-resolve", f"error ({exc})")
        return ENABLED
    log("httpreq-resolve", result.describe())
    if result.secure_present:
        if result.anchor_kind is AnchorKind.CUSTOM:
            return HstsStatus(HstsState.DISABLED, StatusSource.CUSTOM_ANCHOR_HTTPREQ)
        return HstsStatus(HstsState.DISABLED, StatusSource.HTTPREQ_RECORD)
    return ENABLED


# --- connection flows -----------------------------------------------------------

class Result(enum.Enum):
    TRUSTED_HTTPS = "trusted-https"
    HTTP = "http"
    UNTRUSTED_HTTPS = "untrusted-https"
    BLOCKED = "blocked"

    @property
    def short(self) -> str:
        return _SHORT[self]


_SHORT = {Result.TRUSTED_HTTPS: "Trusted", Result.HTTP: "Http",
          Result.UNTRUSTED_HTTPS: "Untrusted", Result.BLOCKED: "Blocked"}

_TRANSPORT_RESULT = {Transport.HTTP: Result.HTTP, Transport.TRUSTED_HTTPS: Result.TRUSTED_HTTPS,
                     Transport.UNTRUSTED_HTTPS: Result.UNTRUSTED_HTTPS}


@dataclass(frozen=True)
class ConnectionOutcome:
    result: Result
    transcript: tuple
    status: HstsStatus | None = None
    request_ok: bool = True

    @property
    def blocked(self) -> bool:
        return self.result is Result.BLOCKED

    def count(self, kind: str) -> int:
        return sum(1 for e in self.transcript if e.kind == kind)

    @property
    def status_checks(self) -> int:
        return self.count("status-check")

    @property
    def indicator_lookups(self) -> int:
        return sum(self.count(k) for k in INDICATOR_LOOKUPS)

    def transcript_text(self) -> str:
        return "".join(e.to_line() + "\n" for e in self.transcript)


def parse_transcript(text: str) -> list[Event]:
    events = []
    for line in text.splitlines():
        if not line.strip():
            continue
        ms, _, rest = line.partition(" ")
        kind, _, detail = rest.partition(" ")
        events.append(Event(int(ms), kind, detail))
    return events


@dataclass
class _Run:
    target: UrlTarget
    env: PolicyEnv
    events: list = field(default_factory=list)
    status: HstsStatus | None = None
    start: float = 0.0

    def __post_init__(self):
        self.start = self.env.monotonic_ms()

    def log(self, kind: str, detail: str = ""):
        self.events.append(Event(int(round(self.env.monotonic_ms() - self.start)), kind, detail))

    def check_status(self, fresh: bool = False) -> HstsStatus:
        # one check per navigation; a failed plaintext request forces a fresh one
        if self.status is not None and not fresh:
            self.log("status-cached", str(self.status))
            return self.status
        self.log("status-check", self.target.host)
        self.status = hsts_status(self.target.host, self.env, self.log)
        self.log("status", str(self.status))
        return self.status

    def attempt_https(self) -> HttpsResult:
        port = self.target.https_port
        self.log("https-attempt", f"{self.target.host}:{port}")
        result = self.env.connect_https(self.target.host, port)
        self.log("https-result", result.value)
        return result

    def probe_http(self) -> HttpListener:
        port = self.target.http_port
        self.log("http-probe", f"{self.target.host}:{port}")
        result = self.env.probe_http(self.target.host, port)
        self.log("http-probe-result", result.value)
        return result

    def finish(self, result: Result, why: str, ok: bool = True) -> ConnectionOutcome:
        self.log("outcome", f"{result.value} ({why})")
        return ConnectionOutcome(result, tuple(self.events), self.status, ok)

    def request(self, transport: Transport) -> bool:
        self.log("request", f"{transport.value} {self.target.path}")
        ok = self.env.send_request(self.target, transport)
        self.log("response", "ok" if ok else "failed")
        return ok

    def use(self, transport: Transport, why: str) -> ConnectionOutcome:
        ok = self.request(transport)
        return self.finish(_TRANSPORT_RESULT[transport], why, ok)

    # HTTPS or no scheme given: trusted HTTPS first, unsecure only after a check
    def https_first(self) -> ConnectionOutcome:
        https = self.attempt_https()
        if https is HttpsResult.TRUSTED_OK:
            return self.use(Transport.TRUSTED_HTTPS, "trusted certificate")
        if https is HttpsResult.UNTRUSTED_CERT:
            if self.check_status().disabled:
                return self.use(Transport.UNTRUSTED_HTTPS, f"HSTS {self.status}")
            return self.finish(Result.BLOCKED, "untrusted certificate, HSTS enabled")
        if not self.check_status().disabled:
            return self.finish(Result.BLOCKED, f"HTTPS {https.value}, HSTS enabled")
        if self.probe_http() is HttpListener.PRESENT:
            return self.use(Transport.HTTP, f"HSTS {self.status}")
        return self.finish(Result.BLOCKED, "no HTTPS and no HTTP listener")

    # HTTP given: plaintext only when a listener exists and the check allows it
    def http_first(self) -> ConnectionOutcome:
        if self.probe_http() is not HttpListener.PRESENT:
            self.log("fallback", "https (no HTTP listener)")
            return self.https_after_probe()
        if not self.check_status().disabled:
            self.log("fallback", "https (HSTS enabled)")
            return self.https_after_probe()
        if self.request(Transport.HTTP):
            return self.finish(Result.HTTP, f"HSTS {self.status}")
        self.log("fallback", "https (HTTP request failed)")
        https = self.attempt_https()
        if https is HttpsResult.TRUSTED_OK:
            return self.use(Transport.TRUSTED_HTTPS, "trusted certificate")
        if https is HttpsResult.UNTRUSTED_CERT and self.check_status(fresh=True).disabled:
            return self.use(Transport.UNTRUSTED_HTTPS, f"HSTS {self.status}")
        # plaintext was permitted and tried; report it as such, with the failure
        return self.finish(Result.HTTP, "HTTP request failed and no usable HTTPS", ok=False)

    def https_after_probe(self) -> ConnectionOutcome:
        https = self.attempt_https()
        if https is HttpsResult.TRUSTED_OK:
            return self.use(Transport.TRUSTED_HTTPS, "trusted certificate")
        if https is HttpsResult.UNTRUSTED_CERT:
            if self.check_status().disabled:
                return self.use(Transport.UNTRUSTED_HTTPS, f"HSTS {self.status}")
            return self.finish(Result.BLOCKED, "untrusted certificate, HSTS enabled")
        return self.finish(Result.BLOCKED, f"HTTPS {https.value}, no usable server")


def plan_connection(target: UrlTarget, env: PolicyEnv) -> ConnectionOutcome:
    run = _Run(target, env)
    run.log("navigate", target.url())
    if target.scheme is Scheme.HTTP:
        return run.http_first()
    return run.https_first()
