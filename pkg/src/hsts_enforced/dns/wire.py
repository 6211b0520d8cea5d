"""DNS message framing: header, question, resource records and RRsets."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .name import BadName, Name, read_name
from .rdata import IN, OPT, RRSIG, MalformedRecord, Rdata, decode_rdata, type_to_text

# rcodes
NOERROR = 0
SERVFAIL = 2
NXDOMAIN = 3
REFUSED = 5

FLAG_QR = 0x8000
FLAG_AA = 0x0400
FLAG_TC = 0x0200
FLAG_RD = 0x0100
FLAG_RA = 0x0080
FLAG_AD = 0x0020
FLAG_CD = 0x0010

EDNS_DO = 0x8000
UDP_PAYLOAD = 1232


class WireError(ValueError):
    """A DNS message that cannot be decoded."""


@dataclass(frozen=True)
class RR:
    name: Name
    rtype: int
    rclass: int
    ttl: int
    rdata: Rdata

    def to_text(self) -> str:
        return f"{self.name} {self.ttl} IN {type_to_text(self.rtype)} {self.rdata.to_text()}"


@dataclass(frozen=True)
class RRset:
    """Records sharing owner, type, class and TTL."""

    name: Name
    rtype: int
    rclass: int
    ttl: int
    rdatas: tuple

    def __post_init__(self):
        if not self.rdatas:
            raise ValueError("empty RRset")

    @classmethod
    def from_rrs(cls, rrs) -> "RRset":
        rrs = list(rrs)
        first = rrs[0]
        for rr in rrs[1:]:
            if (rr.name, rr.rtype, rr.rclass) != (first.name, first.rtype, first.rclass):
                raise ValueError("records do not share name/type/class")
        # RFC 2181: differing TTLs in one set are clamped to the minimum
        ttl = min(rr.ttl for rr in rrs)
        return cls(first.name, first.rtype, first.rclass, ttl, tuple(rr.rdata for rr in rrs))

    def rrs(self) -> list[RR]:
        return [RR(self.name, self.rtype, self.rclass, self.ttl, rd) for rd in self.rdatas]

    def with_ttl(self, ttl: int) -> "RRset":
        return RRset(self.name, self.rtype, self.rclass, ttl, self.rdatas)


@dataclass(frozen=True)
class Question:
    name: Name
    rtype: int
    rclass: int = IN


@dataclass
class Message:
    id: int = 0
    flags: int = 0
    rcode: int = NOERROR
    question: list = field(default_factory=list)
    answer: list = field(default_factory=list)
    authority: list = field(default_factory=list)
    additional: list = field(default_factory=list)
    edns: bool = False
    dnssec_ok: bool = False
    payload: int = UDP_PAYLOAD

    @property
    def is_response(self) -> bool:
        return bool(self.flags & FLAG_QR)

    def rrsets(self, section: str = "answer") -> list[RRset]:
        return group_rrsets(getattr(self, section))


def group_rrsets(rrs) -> list[RRset]:
    groups: dict = {}
    for rr in rrs:
        # RRSIGs group by what they cover as well, keeping per-type sets separate
        covered = rr.rdata.type_covered if rr.rtype == RRSIG else None
        groups.setdefault((rr.name, rr.rtype, rr.rclass, covered), []).append(rr)
    return [RRset.from_rrs(g) for g in groups.values()]


def make_query(name: Name, rtype: int, msg_id: int, dnssec_ok: bool = True) -> Message:
    return Message(id=msg_id, flags=FLAG_RD | FLAG_CD, question=[Question(name, rtype)],
                   edns=True, dnssec_ok=dnssec_ok)


class _Writer:
    def __init__(self):
        self.buf = bytearray()
        self.offsets: dict = {}

    def name(self, name: Name):
        labels = name.labels
        for i in range(len(labels)):
            key = tuple(l.lower() for l in labels[i:])
            if key in self.offsets:
                self.buf += struct.pack("!H", 0xC000 | self.offsets[key])
                return
            if len(self.buf) < 0x3FFF:
                self.offsets[key] = len(self.buf)
            self.buf.append(len(labels[i]))
            self.buf += labels[i]
        self.buf.append(0)


def encode_message(msg: Message) -> bytes:
    w = _Writer()
    additional = list(msg.additional)
    if msg.edns:
        additional.append(RR(Name(()), OPT, msg.payload,
                             (EDNS_DO if msg.dnssec_ok else 0), _EMPTY_OPT))
    flags = (msg.flags & 0xFFF0) | (msg.rcode & 0xF)
    w.buf += struct.pack("!HHHHHH", msg.id, flags, len(msg.question), len(msg.answer),
                         len(msg.authority), len(additional))
    for q in msg.question:
        w.name(q.name)
        w.buf += struct.pack("!HH", q.rtype, q.rclass)
    for rr in list(msg.answer) + list(msg.authority) + additional:
        w.name(rr.name)
        # names inside RDATA are never compressed
        rdata = rr.rdata.to_wire()
        w.buf += struct.pack("!HHIH", rr.rtype, rr.rclass, rr.ttl, len(rdata)) + rdata
    return bytes(w.buf)


def decode_message(data: bytes) -> Message:
    try:
        return _decode(data)
    except (BadName, MalformedRecord, struct.error) as exc:
        raise WireError(str(exc)) from exc


def _decode(data: bytes) -> Message:
    if len(data) < 12:
        raise WireError("message shorter than header")
    msg_id, flags, qd, an, ns, ar = struct.unpack("!HHHHHH", data[:12])
    msg = Message(id=msg_id, flags=flags & 0xFFF0, rcode=flags & 0xF)
    pos = 12
    for _ in range(qd):
        name, pos = read_name(data, pos)
        rtype, rclass = struct.unpack("!HH", data[pos:pos + 4])
        pos += 4
        msg.question.append(Question(name, rtype, rclass))
    for count, section in ((an, msg.answer), (ns, msg.authority), (ar, msg.additional)):
        for _ in range(count):
            rr, pos = _read_rr(data, pos)
            if rr.rtype == OPT:
                msg.edns = True
                msg.payload = rr.rclass
                msg.dnssec_ok = bool(rr.ttl & EDNS_DO)
                continue
            section.append(rr)
    if pos != len(data):
        raise WireError("trailing bytes after message")
    return msg


def _read_rr(data: bytes, pos: int) -> tuple[RR, int]:
    name, pos = read_name(data, pos)
    if pos + 10 > len(data):
        raise WireError("truncated RR header")
    rtype, rclass, ttl, rdlen = struct.unpack("!HHIH", data[pos:pos + 10])
    pos += 10
    if pos + rdlen > len(data):
        raise WireError("truncated RDATA")
    rdata = decode_rdata(rtype, data, pos, rdlen)
    return RR(name, rtype, rclass, ttl, rdata), pos + rdlen


_EMPTY_OPT = decode_rdata(OPT, b"", 0, 0)
