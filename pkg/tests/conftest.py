import random
from dataclasses import dataclass, field

import pytest

from hsts_enforced.dns.chain import AnchorKind, ValidationResult, ValidationState
from hsts_enforced.dns.name import Name
from hsts_enforced.dns.rdata import HTTPREQ, IN, ARecord, HTTPREQRecord
from hsts_enforced.dns.wire import RR
from hsts_enforced.policy import DEFAULT_RESERVED, HttpListener, HttpsResult
from hsts_enforced.preload import PreloadEntry, build
from hsts_enforced.sim.clock import BASE_EPOCH
from hsts_enforced.sim.dnsworld import build_dns_world
from hsts_enforced.sim.signer import ZoneKey, sign_zone

NOW = BASE_EPOCH


def n(text):
    return Name.from_text(text)


@pytest.fixture(scope="session")
def world():
    """root -> tld -> example.tld with an HTTPREQ at the apex."""
    return build_dns_world("example.tld", httpreq_flags=0)


@pytest.fixture(scope="session")
def world_absent():
    return build_dns_world("example.tld")


@pytest.fixture(scope="session")
def signed_apex():
    key = ZoneKey.generate(rng=random.Random(7))
    zone = sign_zone(n("example.test"), [
        RR(n("example.test"), 1, IN, 300, ARecord("192.0.2.1")),
        RR(n("example.test"), HTTPREQ, IN, 300, HTTPREQRecord(1)),
    ], [key], inception=NOW - 10, expiration=NOW + 1000)
    return zone, key


@dataclass
class ScriptedEnv:
    """PolicyEnv with canned probe results and an optional indicator."""

    http: HttpListener = HttpListener.ABSENT
    https: HttpsResult = HttpsResult.NO_LISTENER
    indicator: str | None = None  # "preload", "httpreq", "custom"
    request_ok: bool = True
    reserved: frozenset = DEFAULT_RESERVED
    clock_ms: float = 0.0
    epoch: int = NOW
    resolutions: list = field(default_factory=list)
    requests: list = field(default_factory=list)

    def now(self):
        return self.epoch

    def monotonic_ms(self):
        return self.clock_ms

    def preload(self):
        entries = []
        if self.indicator == "preload":
            entries.append(PreloadEntry("site.example", False))
        return build(entries, issued_at=NOW)

    def resolve_httpreq(self, domain):
        self.resolutions.append(domain)
        self.clock_ms += 5
        if self.indicator in ("httpreq", "custom"):
            kind = AnchorKind.CUSTOM if self.indicator == "custom" else AnchorKind.ROOT
            return ValidationResult(ValidationState.SECURE_PRESENT, anchor_kind=kind)
        return ValidationResult(ValidationState.SECURE_ABSENT, anchor_kind=AnchorKind.ROOT)

    def probe_http(self, host, port):
        self.clock_ms += 1
        return self.http

    def connect_https(self, host, port):
        self.clock_ms += 2
        return self.https

    def send_request(self, target, transport):
        self.clock_ms += 1
        self.requests.append(transport)
        return self.request_ok


# --- chains built straight from signed zones (no resolver involved) ---------

from hsts_enforced.dns.chain import DnsChain, ZoneLink
from hsts_enforced.dns.dnssec import SignedRRset
from hsts_enforced.dns.rdata import DNSKEY, DS, RRSIG, decode_rdata
from hsts_enforced.dns.wire import RRset


def chain_from_world(world, target=None, start=None):
    """Assemble the validation chain for ``target`` directly from the world.

    ``start`` names the top zone of the chain (the scope of the anchor in use).
    """
    target = n(target) if isinstance(target, str) else (target or world.host)
    apexes = sorted((a for a in world.zones if target.is_subdomain_of(a)), key=len)
    if start is not None:
        start = n(start) if isinstance(start, str) else start
        apexes = [a for a in apexes if a.is_subdomain_of(start)]
    links = []
    for i, apex in enumerate(apexes):
        zone = world.zones[apex]
        keyset = zone.signed(apex, DNSKEY)
        if i + 1 < len(apexes):
            child = apexes[i + 1]
            ds = zone.signed(child, DS)
            if ds is None:
                links.append(ZoneLink(apex, keyset, no_ds=zone.nsec_for(child)))
                break
            links.append(ZoneLink(apex, keyset, ds=ds))
        else:
            links.append(ZoneLink(apex, keyset))
    site = world.zones[apexes[-1]]
    answer = site.signed(target, HTTPREQ)
    if answer is not None:
        return DnsChain(target, tuple(links), answer=answer)
    return DnsChain(target, tuple(links), denial=(site.nsec_for(target),))


def _mutate_bytes(data: bytes, rng) -> bytes:
    """Change one byte so that it also differs after ASCII case folding."""
    raw = bytearray(data)
    pos = rng.randrange(len(raw))
    old = raw[pos]
    while True:
        new = rng.randrange(256)
        if bytes([new]).lower() != bytes([old]).lower():
            break
    raw[pos] = new
    return bytes(raw)


def mutate_signed(proofed: SignedRRset, rng):
    """One single-byte mutation of an rdata, RRSIG or owner name; None if undecodable."""
    rrset = proofed.rrset
    slots = [("rdata", i) for i in range(len(rrset.rdatas))]
    slots += [("rrsig", i) for i in range(len(proofed.rrsigs))]
    slots.append(("owner", 0))
    kind, i = rng.choice(slots)
    try:
        if kind == "owner":
            labels = list(rrset.name.labels)
            if not labels:
                return None
            j = rng.randrange(len(labels))
            labels[j] = _mutate_bytes(labels[j], rng)
            owner = Name(tuple(labels))
            return SignedRRset(RRset(owner, rrset.rtype, rrset.rclass, rrset.ttl, rrset.rdatas),
                               proofed.rrsigs)
        if kind == "rdata":
            wire = _mutate_bytes(rrset.rdatas[i].to_wire(), rng)
            rd = decode_rdata(rrset.rtype, wire, 0, len(wire))
            rdatas = rrset.rdatas[:i] + (rd,) + rrset.rdatas[i + 1:]
            return SignedRRset(RRset(rrset.name, rrset.rtype, rrset.rclass, rrset.ttl, rdatas),
                               proofed.rrsigs)
        wire = _mutate_bytes(proofed.rrsigs[i].to_wire(), rng)
        sig = decode_rdata(RRSIG, wire, 0, len(wire))
        return SignedRRset(rrset, proofed.rrsigs[:i] + (sig,) + proofed.rrsigs[i + 1:])
    except Exception:
        return None


def mutate_chain(chain: DnsChain, rng):
    """Apply one single-byte mutation somewhere in ``chain``; None if undecodable."""
    spots = []
    for li, link in enumerate(chain.links):
        for attr in ("dnskey", "ds", "no_ds"):
            if getattr(link, attr) is not None:
                spots.append(("link", li, attr))
    if chain.answer is not None:
        spots.append(("answer", 0, None))
    spots += [("denial", i, None) for i in range(len(chain.denial))]
    where, idx, attr = rng.choice(spots)
    if where == "link":
        link = chain.links[idx]
        mutated = mutate_signed(getattr(link, attr), rng)
        if mutated is None:
            return None
        fields = {"zone": link.zone, "dnskey": link.dnskey, "ds": link.ds, "no_ds": link.no_ds}
        fields[attr] = mutated
        links = chain.links[:idx] + (ZoneLink(**fields),) + chain.links[idx + 1:]
        return DnsChain(chain.target, links, chain.answer, chain.denial)
    if where == "answer":
        mutated = mutate_signed(chain.answer, rng)
        return None if mutated is None else DnsChain(chain.target, chain.links, mutated, chain.denial)
    mutated = mutate_signed(chain.denial[idx], rng)
    if mutated is None:
        return None
    denial = chain.denial[:idx] + (mutated,) + chain.denial[idx + 1:]
    return DnsChain(chain.target, chain.links, chain.answer, denial)


# --- acceptance summary -----------------------------------------------------------

ACCEPTANCE_LINES: dict = {}


def record_acceptance(criterion: str, passed: bool, detail: str):
    ACCEPTANCE_LINES[criterion] = f"{criterion} {'PASS' if passed else 'FAIL'}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
