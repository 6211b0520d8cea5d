"""Simulated links, web servers and on-path attackers.

Every link shares one attacker position (the strongest one).  Costs in
virtual time: a TCP connect or refusal is one RTT, a TLS handshake one more,
an HTTP exchange one RTT, a DNS exchange one RTT plus resolver processing.
Anything that gets no answer costs the full timeout.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field

from ..dns.rdata import HTTPREQ, RRSIG, RRSIGRecord
from ..dns.wire import WireError, decode_message, encode_message
from ..policy import HttpListener, HttpsResult, Transport, UrlTarget
from .clock import VirtualClock
from .dnsworld import DnsWorld


class ServerKind(enum.Enum):
    HTTP_ONLY = "http-only"
    UNTRUSTED_HTTPS = "untrusted-https"
    TRUSTED_HTTPS = "trusted-https"


class Attack(enum.Enum):
    BLOCK_HTTPS = "block-https"
    DROP_DNS = "drop-dns"
    TAMPER_RRSIG = "tamper-rrsig"
    STRIP_HTTPREQ = "strip-httpreq"


@dataclass
class Tap:
    """Everything the on-path observer saw in plaintext."""

    http_requests: list = field(default_factory=list)

    @property
    def saw_plaintext(self) -> bool:
        return bool(self.http_requests)


@dataclass
class SimNetwork:
    clock: VirtualClock
    dns: DnsWorld
    servers: frozenset
    attacks: frozenset = frozenset()
    rtt_ms: float = 20.0
    processing_ms: float = 2.0
    probe_timeout: float = 3.0
    rng: random.Random = field(default_factory=random.Random)
    tap: Tap = field(default_factory=Tap)
    host: str = ""

    # --- DNS ---

    def dns_transport(self) -> "SimDnsTransport":
        return SimDnsTransport(self)

    def tamper_response(self, data: bytes) -> bytes | None:
        if Attack.DROP_DNS in self.attacks:
            return None
        if not self.attacks & {Attack.STRIP_HTTPREQ, Attack.TAMPER_RRSIG}:
            return data
        try:
            msg = decode_message(data)
        except WireError:
            return data
        if Attack.STRIP_HTTPREQ in self.attacks:
            msg.answer = [rr for rr in msg.answer if not _is_httpreq(rr)]
        if Attack.TAMPER_RRSIG in self.attacks:
            for section in (msg.answer, msg.authority):
                for i, rr in enumerate(section):
                    if rr.rtype == RRSIG:
                        section[i] = _flip_signature(rr, self.rng)
        return encode_message(msg)

    # --- web ---

    def _reaches(self, host: str) -> bool:
        return host == self.host

    def probe_http(self, host: str, port: int) -> HttpListener:
        self.clock.advance(self.rtt_ms)
        if Attack.BLOCK_HTTPS in self.attacks:
            # a stripping attacker happily answers plaintext itself
            return HttpListener.PRESENT
        if self._reaches(host) and ServerKind.HTTP_ONLY in self.servers:
            return HttpListener.PRESENT
        return HttpListener.ABSENT

    def connect_https(self, host: str, port: int) -> HttpsResult:
        if Attack.BLOCK_HTTPS in self.attacks:
            self.clock.advance(self.probe_timeout * 1000)
            return HttpsResult.TIMEOUT
        self.clock.advance(self.rtt_ms)
        if not self._reaches(host):
            return HttpsResult.NO_LISTENER
        if ServerKind.TRUSTED_HTTPS in self.servers:
            self.clock.advance(self.rtt_ms)
            return HttpsResult.TRUSTED_OK
        if ServerKind.UNTRUSTED_HTTPS in self.servers:
            self.clock.advance(self.rtt_ms)
            return HttpsResult.UNTRUSTED_CERT
        return HttpsResult.NO_LISTENER

    def send_request(self, target: UrlTarget, transport: Transport) -> bool:
        self.clock.advance(self.rtt_ms)
        if transport is Transport.HTTP:
            self.tap.http_requests.append(
                f"GET {target.path} HTTP/1.1\r\nHost: {target.host}\r\n\r\n".encode())
        return True


class SimDnsTransport:
    def __init__(self, network: SimNetwork, attacked: bool = True):
        self.network = network
        self.attacked = attacked

    def exchange(self, wire: bytes, timeout: float) -> bytes | None:
        net = self.network
        response = net.dns.handle_wire(wire)
        if response is not None and self.attacked:
            response = net.tamper_response(response)
        if response is None:
            net.clock.advance(timeout * 1000)
            return None
        net.clock.advance(net.rtt_ms + net.processing_ms)
        return response


def _is_httpreq(rr) -> bool:
    return rr.rtype == HTTPREQ or (rr.rtype == RRSIG and rr.rdata.type_covered == HTTPREQ)


def _flip_signature(rr, rng: random.Random):
    sig: RRSIGRecord = rr.rdata
    raw = bytearray(sig.signature)
    raw[rng.randrange(len(raw))] ^= rng.randrange(1, 256)
    tampered = RRSIGRecord(sig.type_covered, sig.algorithm, sig.labels, sig.original_ttl,
                           sig.expiration, sig.inception, sig.key_tag, sig.signer, bytes(raw))
    return type(rr)(rr.name, rr.rtype, rr.rclass, rr.ttl, tampered)
