"""Validating stub resolver for HTTPREQ indicators.

Queries go one at a time to a recursive resolver: the HTTPREQ answer names
the signing zone, the zone's DNSKEY and DS come next, the DS answer names the
parent zone, and so on up to a trust anchor.  Nothing enters the cache until
the chain it belongs to validates.
"""

from __future__ import annotations

import io
import random
import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

from .dns.chain import (DnsChain, ValidationResult, ValidationState, ZoneLink,
                        bogus, select_anchors, validate_chain)
from .dns.dnssec import SignedRRset
from .dns.name import Name
from .dns.rdata import DNSKEY, DS, HTTPREQ, NSEC, RRSIG, SOA, type_label
from .dns.wire import (FLAG_QR, FLAG_TC, NOERROR, NXDOMAIN, UDP_PAYLOAD, RRset, WireError,
                       decode_message, encode_message, group_rrsets, make_query)

# Ethernet + IPv4 + UDP headers around a DNS message
FRAME_OVERHEAD = 14 + 20 + 8
DEFAULT_TIMEOUT = 2.0
DEFAULT_RETRIES = 1


class DnsTransport(Protocol):
    def exchange(self, wire: bytes, timeout: float) -> bytes | None:
        """Send one query and return the response, or None on timeout."""


# --- cache ----------------------------------------------------------------------

@dataclass(frozen=True)
class Answer:
    """A verified response to one (name, type) question."""

    signer: Name | None
    rrset: SignedRRset | None = None
    denial: tuple = ()
    nxdomain: bool = False

    @property
    def positive(self) -> bool:
        return self.rrset is not None

    def nsec_proofs(self) -> tuple:
        return tuple(p for p in self.denial if p.rtype == NSEC)


@dataclass
class CacheEntry:
    value: Answer
    inserted_at: int
    ttl: int

    def live(self, now: int) -> bool:
        return now < self.inserted_at + self.ttl


class CacheStore:
    """TTL cache keyed by (name, type); concurrent readers, serialized writers."""

    def __init__(self):
        self._entries: dict = {}
        self._lock = threading.Lock()

    def put(self, name: Name, rtype: int, value: Answer, ttl: int, now: int):
        with self._lock:
            self._entries[(name, rtype)] = CacheEntry(value, now, max(0, int(ttl)))

    def get(self, name: Name, rtype: int, now: int) -> Answer | None:
        entry = self._entries.get((name, rtype))
        if entry is None:
            return None
        if not entry.live(now):
            with self._lock:
                if self._entries.get((name, rtype)) is entry:
                    del self._entries[(name, rtype)]
            return None
        return entry.value

    def __contains__(self, key) -> bool:
        return key in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def clear(self):
        with self._lock:
            self._entries.clear()


def answer_ttl(answer: Answer) -> int:
    if answer.rrset is not None:
        return answer.rrset.rrset.ttl
    soa = next((p.rrset for p in answer.denial if p.rtype == SOA), None)
    if soa is None:
        return min((p.rrset.ttl for p in answer.denial), default=0)
    # negative answers live for the SOA minimum, capped by the SOA's own TTL
    return min(soa.rdatas[0].minimum, soa.ttl)


# --- metrics --------------------------------------------------------------------

@dataclass(frozen=True)
class MessageRecord:
    query_type: str
    direction: str
    size_bytes: int
    rtt_index: int

    @property
    def frame_bytes(self) -> int:
        return self.size_bytes + FRAME_OVERHEAD


@dataclass
class ResolutionMetrics:
    domain_length: int = 0
    round_trips: int = 0
    wall_time: float = 0.0
    messages: list = field(default_factory=list)

    def responses(self, query_type: str | None = None) -> list[MessageRecord]:
        return [m for m in self.messages if m.direction == "response"
                and (query_type is None or m.query_type == query_type)]

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("query_type,size_bytes,rtt_index\n")
        for m in self.responses():
            out.write(f"{m.query_type},{m.size_bytes},{m.rtt_index}\n")
        return out.getvalue()

    def merge(self, other: "ResolutionMetrics"):
        offset = self.round_trips
        self.round_trips += other.round_trips
        self.wall_time += other.wall_time
        self.messages.extend(MessageRecord(m.query_type, m.direction, m.size_bytes,
                                           m.rtt_index + offset) for m in other.messages)


# --- planning -------------------------------------------------------------------

def _stop_scopes(anchors, target: Name) -> list[Name]:
    return [a.scope for a in select_anchors(anchors, target)]


def plan_queries(target: Name, cache: CacheStore, now: int, anchors=None) -> list[tuple]:
    """Queries a cold walk would send, given what ``cache`` already holds.

    Zone cuts not yet learned from cached signer names are assumed at every
    label, which is exact for a chain such as root -> tld -> example.tld.
    """
    scopes = _stop_scopes(anchors, target) if anchors else [Name.from_text(".")]
    plan = []
    cached = cache.get(target, HTTPREQ, now)
    if cached is None:
        plan.append((target, HTTPREQ))
        zone = target
    else:
        zone = cached.signer or target
    stop = scopes[0] if scopes else Name.from_text(".")
    current = zone
    while True:
        if cache.get(current, DNSKEY, now) is None:
            plan.append((current, DNSKEY))
        if current == stop or current.is_root:
            break
        ds = cache.get(current, DS, now)
        if ds is None:
            plan.append((current, DS))
            current = current.parent()
        else:
            current = ds.signer if ds.signer is not None else current.parent()
    return plan


# --- resolution -----------------------------------------------------------------

class QueryFailed(Exception):
    pass


def _ms_clock() -> float:
    return time.monotonic() * 1000.0


class StubResolver:
    def __init__(self, transport: DnsTransport, anchors, cache: CacheStore | None = None,
                 clock: Callable[[], float] = _ms_clock, timeout: float = DEFAULT_TIMEOUT,
                 retries: int = DEFAULT_RETRIES, skew: int = 0,
                 rng: random.Random | None = None, follow_parents: bool = True):
        self.transport = transport
        self.anchors = list(anchors)
        self.cache = cache if cache is not None else CacheStore()
        self.clock = clock
        self.timeout = timeout
        self.retries = retries
        self.skew = skew
        self.rng = rng or random.Random()
        self.follow_parents = follow_parents

    def resolve(self, target, now: int) -> tuple[ValidationResult, ResolutionMetrics]:
        target = target if isinstance(target, Name) else Name.from_text(target)
        metrics = ResolutionMetrics(domain_length=len(target.to_text(omit_final_dot=True)))
        start = self.clock()
        try:
            result, zone = self._resolve_name(target, now, metrics)
            if (self.follow_parents and result.state is ValidationState.SECURE_ABSENT
                    and zone is not None):
                result = self._covering_ancestor(target, zone, now, metrics) or result
        except QueryFailed as exc:
            result = bogus(str(exc))
        metrics.wall_time = self.clock() - start
        return result, metrics

    def _covering_ancestor(self, target: Name, zone: Name, now, metrics):
        # an include_subdomains HTTPREQ higher up in the same zone covers the target
        for ancestor in target.ancestors()[1:]:
            if not ancestor.is_subdomain_of(zone):
                break
            result, _ = self._resolve_name(ancestor, now, metrics)
            if result.secure_present and result.include_subdomains:
                return result
            if result.state is not ValidationState.SECURE_ABSENT:
                break
        return None

    def _resolve_name(self, target: Name, now: int, metrics) -> tuple[ValidationResult, Name]:
        candidates = select_anchors(self.anchors, target)
        if not candidates:
            return bogus("no trust anchor in scope"), None
        fetched: dict = {}
        answer = self._fetch(target, HTTPREQ, now, metrics, fetched)
        zone = _zone_of(answer, target)
        if not answer.positive and not answer.denial:
            return bogus("empty answer without proof"), zone

        dnskeys: dict = {}
        ds_sets: dict = {}
        no_ds: dict = {}
        order = []
        current = zone
        result = bogus("no anchor reached")
        stops = [a.scope for a in candidates]
        while True:
            order.append(current)
            keyset = self._fetch(current, DNSKEY, now, metrics, fetched)
            if keyset.positive:
                dnskeys[current] = keyset.rrset
            if current in stops:
                chain = _assemble(target, order, dnskeys, ds_sets, no_ds, answer)
                result = validate_chain(chain, [a for a in candidates if a.scope == current],
                                        now, self.skew)
                if result.state is not ValidationState.BOGUS or current == stops[-1]:
                    break
            if current.is_root:
                break
            ds = self._fetch(current, DS, now, metrics, fetched)
            parent = ds.signer
            if parent is None or current == parent or not current.is_subdomain_of(parent):
                result = bogus(f"DS answer for {current} names no parent zone")
                break
            if ds.positive:
                ds_sets[current] = ds.rrset
            else:
                proof = next((p for p in ds.nsec_proofs() if p.name == current), None)
                if proof is not None:
                    no_ds[parent] = proof
            current = parent

        if result.state is not ValidationState.BOGUS:
            self._store(fetched, result, now)
        return result, zone

    def _store(self, fetched: dict, result: ValidationResult, now: int):
        insecure = result.state is ValidationState.INSECURE
        for (name, rtype), answer in fetched.items():
            if answer is None:
                continue
            # an insecure verdict proves nothing about records below the cut
            if insecure and (rtype == HTTPREQ or (rtype == DNSKEY and not answer.positive)):
                continue
            self.cache.put(name, rtype, answer, answer_ttl(answer), now)

    def _fetch(self, name: Name, rtype: int, now: int, metrics, fetched: dict) -> Answer:
        cached = self.cache.get(name, rtype, now)
        if cached is not None:
            return cached
        answer = self._query(name, rtype, metrics)
        fetched[(name, rtype)] = answer
        return answer

    def _query(self, name: Name, rtype: int, metrics: ResolutionMetrics) -> Answer:
        metrics.round_trips += 1
        index = metrics.round_trips
        label = type_label(rtype)
        for _ in range(1 + self.retries):
            msg_id = self.rng.randrange(0, 0x10000)
            wire = encode_message(make_query(name, rtype, msg_id))
            metrics.messages.append(MessageRecord(label, "query", len(wire), index))
            data = self.transport.exchange(wire, self.timeout)
            if data is None:
                continue
            metrics.messages.append(MessageRecord(label, "response", len(data), index))
            if len(data) > UDP_PAYLOAD:
                raise QueryFailed(f"{label} response exceeds {UDP_PAYLOAD} bytes")
            try:
                msg = decode_message(data)
            except (WireError, ValueError) as exc:
                raise QueryFailed(f"undecodable {label} response: {exc}") from None
            if msg.id != msg_id or not msg.flags & FLAG_QR:
                continue
            if msg.flags & FLAG_TC:
                raise QueryFailed(f"truncated {label} response")
            if len(msg.question) != 1 or msg.question[0].name != name \
                    or msg.question[0].rtype != rtype:
                raise QueryFailed(f"{label} response answers a different question")
            if msg.rcode not in (NOERROR, NXDOMAIN):
                raise QueryFailed(f"{label} query for {name} failed with rcode {msg.rcode}")
            return _parse_answer(msg, name, rtype)
        raise QueryFailed(f"{label} query for {name} timed out")


def _rrsigs_for(rrs, name: Name, rtype: int) -> tuple:
    return tuple(rr.rdata for rr in rrs
                 if rr.rtype == RRSIG and rr.name == name and rr.rdata.type_covered == rtype)


def _signed_sets(rrs) -> list[SignedRRset]:
    out = []
    for rrset in group_rrsets(rr for rr in rrs if rr.rtype != RRSIG):
        out.append(SignedRRset(rrset, _rrsigs_for(rrs, rrset.name, rrset.rtype)))
    return out


def _parse_answer(msg, name: Name, rtype: int) -> Answer:
    matching = [rr for rr in msg.answer if rr.name == name and rr.rtype == rtype]
    if matching:
        signed = SignedRRset(RRset.from_rrs(matching), _rrsigs_for(msg.answer, name, rtype))
        signer = signed.rrsigs[0].signer if signed.rrsigs else None
        return Answer(signer, rrset=signed)
    denial = tuple(_signed_sets(msg.authority))
    signer = None
    for proof in denial:
        if proof.rtype == NSEC and proof.rrsigs:
            signer = proof.rrsigs[0].signer
            break
    if signer is None:
        signer = next((p.name for p in denial if p.rtype == SOA), None)
    return Answer(signer, denial=denial, nxdomain=msg.rcode == NXDOMAIN)


def _zone_of(answer: Answer, target: Name) -> Name:
    if answer.signer is not None and target.is_subdomain_of(answer.signer):
        return answer.signer
    return target


def _assemble(target, order, dnskeys, ds_sets, no_ds, answer: Answer) -> DnsChain:
    """Arrange fetched RRsets top-down into a DnsChain."""
    zones = list(reversed(order))  # anchor zone first
    links = []
    for i, zone in enumerate(zones):
        keyset = dnskeys.get(zone)
        if keyset is None:
            break
        child = zones[i + 1] if i + 1 < len(zones) else None
        if zone in no_ds:
            links.append(ZoneLink(zone, keyset, no_ds=no_ds[zone]))
            break
        links.append(ZoneLink(zone, keyset, ds=ds_sets.get(child) if child is not None else None))
    return DnsChain(target, tuple(links), answer=answer.rrset,
                    denial=answer.denial if answer.rrset is None else ())


def resolve_httpreq(target, cache: CacheStore, transport: DnsTransport, anchors, now: int,
                    **options) -> tuple[ValidationResult, ResolutionMetrics]:
    return StubResolver(transport, anchors, cache, **options).resolve(target, now)


# --- real UDP transport ----------------------------------------------------------

def parse_address(address: str, default_port: int = 53) -> tuple[str, int]:
    if address.startswith("["):
        host, _, rest = address[1:].partition("]")
        return host, int(rest[1:]) if rest.startswith(":") else default_port
    if address.count(":") == 1:
        host, port = address.split(":")
        return host, int(port)
    return address, default_port


class UdpTransport:
    """Plain DNS over UDP to a single recursive resolver."""

    def __init__(self, address: str):
        self.host, self.port = parse_address(address)

    def exchange(self, wire: bytes, timeout: float) -> bytes | None:
        family = socket.AF_INET6 if ":" in self.host else socket.AF_INET
        with socket.socket(family, socket.SOCK_DGRAM) as sock:
            sock.settimeout(timeout)
            try:
                sock.sendto(wire, (self.host, self.port))
                deadline = time.monotonic() + timeout
                while True:
                    data, peer = sock.recvfrom(65535)
                    if data[:2] == wire[:2]:
                        return data
                    sock.settimeout(max(0.001, deadline - time.monotonic()))
            except (socket.timeout, OSError):
                return None
