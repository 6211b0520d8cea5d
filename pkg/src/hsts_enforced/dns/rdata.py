"""RDATA codecs for the record types used to prove or deny an HTTPREQ indicator."""

from __future__ import annotations

import base64
import ipaddress
import struct
from dataclasses import dataclass

from .name import BadName, Name, read_name

# type codes
A = 1
NS = 2
SOA = 6
TXT = 16
AAAA = 28
OPT = 41
DS = 43
RRSIG = 46
NSEC = 47
DNSKEY = 48
NSEC3 = 50
HTTPREQ = 65280  # first private-use RR type

IN = 1

# presentation names; HTTPREQ is private-use, so zone files spell it TYPE65280
TYPE_NAMES = {
    A: "A", NS: "NS", SOA: "SOA", TXT: "TXT", AAAA: "AAAA", OPT: "OPT", DS: "DS",
    RRSIG: "RRSIG", NSEC: "NSEC", DNSKEY: "DNSKEY", NSEC3: "NSEC3",
}
TYPE_CODES = {v: k for k, v in TYPE_NAMES.items()}
TYPE_CODES["HTTPREQ"] = HTTPREQ

HTTPREQ_INCLUDE_SUBDOMAINS = 0x01


class MalformedRecord(ValueError):
    """RDATA that does not decode under its type's contract."""


def type_to_text(rtype: int) -> str:
    return TYPE_NAMES.get(rtype, f"TYPE{rtype}")


def type_label(rtype: int) -> str:
    """Short mnemonic for logs and metrics."""
    return "HTTPREQ" if rtype == HTTPREQ else type_to_text(rtype)


def type_from_text(text: str) -> int:
    text = text.upper()
    if text in TYPE_CODES:
        return TYPE_CODES[text]
    if text.startswith("TYPE") and text[4:].isdigit():
        return int(text[4:])
    raise ValueError(f"unknown RR type {text!r}")


class Rdata:
    """Base for typed RDATA; subclasses are frozen dataclasses."""

    rtype: int = 0

    def to_wire(self, canonical: bool = False) -> bytes:
        raise NotImplementedError

    def to_text(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Generic(Rdata):
    type_code: int
    data: bytes

    @property
    def rtype(self) -> int:
        return self.type_code

    def to_wire(self, canonical: bool = False) -> bytes:
        return self.data

    def to_text(self) -> str:
        return f"\\# {len(self.data)} {self.data.hex()}" if self.data else "\\# 0"


@dataclass(frozen=True)
class ARecord(Rdata):
    address: str
    rtype = A

    def to_wire(self, canonical: bool = False) -> bytes:
        return ipaddress.IPv4Address(self.address).packed

    def to_text(self) -> str:
        return self.address


@dataclass(frozen=True)
class NSRecord(Rdata):
    target: Name
    rtype = NS

    def to_wire(self, canonical: bool = False) -> bytes:
        return self.target.to_wire(canonical)

    def to_text(self) -> str:
        return self.target.to_text()


@dataclass(frozen=True)
class SOARecord(Rdata):
    mname: Name
    rname: Name
    serial: int
    refresh: int
    retry: int
    expire: int
    minimum: int
    rtype = SOA

    def to_wire(self, canonical: bool = False) -> bytes:
        return (self.mname.to_wire(canonical) + self.rname.to_wire(canonical)
                + struct.pack("!IIIII", self.serial, self.refresh, self.retry,
                              self.expire, self.minimum))

    def to_text(self) -> str:
        return (f"{self.mname} {self.rname} {self.serial} {self.refresh} "
                f"{self.retry} {self.expire} {self.minimum}")


@dataclass(frozen=True)
class DNSKEYRecord(Rdata):
    flags: int
    protocol: int
    algorithm: int
    public_key: bytes
    rtype = DNSKEY

    ZONE = 0x0100
    SEP = 0x0001

    def to_wire(self, canonical: bool = False) -> bytes:
        return struct.pack("!HBB", self.flags, self.protocol, self.algorithm) + self.public_key

    def to_text(self) -> str:
        key = base64.b64encode(self.public_key).decode()
        return f"{self.flags} {self.protocol} {self.algorithm} {key}"

    @property
    def is_zone_key(self) -> bool:
        return bool(self.flags & self.ZONE)

    def key_tag(self) -> int:
        return key_tag(self.to_wire())


@dataclass(frozen=True)
class DSRecord(Rdata):
    key_tag: int
    algorithm: int
    digest_type: int
    digest: bytes
    rtype = DS

    def to_wire(self, canonical: bool = False) -> bytes:
        return struct.pack("!HBB", self.key_tag, self.algorithm, self.digest_type) + self.digest

    def to_text(self) -> str:
        return f"{self.key_tag} {self.algorithm} {self.digest_type} {self.digest.hex().upper()}"


@dataclass(frozen=True)
class RRSIGRecord(Rdata):
    type_covered: int
    algorithm: int
    labels: int
    original_ttl: int
    expiration: int
    inception: int
    key_tag: int
    signer: Name
    signature: bytes
    rtype = RRSIG

    def header_wire(self) -> bytes:
        """RDATA without the signature field, signer in canonical form."""
        return struct.pack("!HBBIIIH", self.type_covered, self.algorithm, self.labels,
                           self.original_ttl, self.expiration, self.inception,
                           self.key_tag) + self.signer.to_wire(canonical=True)

    def to_wire(self, canonical: bool = False) -> bytes:
        return struct.pack("!HBBIIIH", self.type_covered, self.algorithm, self.labels,
                           self.original_ttl, self.expiration, self.inception,
                           self.key_tag) + self.signer.to_wire(canonical) + self.signature

    def to_text(self) -> str:
        sig = base64.b64encode(self.signature).decode()
        return (f"{type_to_text(self.type_covered)} {self.algorithm} {self.labels} "
                f"{self.original_ttl} {self.expiration} {self.inception} {self.key_tag} "
                f"{self.signer} {sig}")


@dataclass(frozen=True)
class NSECRecord(Rdata):
    next_name: Name
    types: frozenset
    rtype = NSEC

    def to_wire(self, canonical: bool = False) -> bytes:
        # next name is not case-folded in canonical form
        return self.next_name.to_wire() + encode_type_bitmap(self.types)

    def to_text(self) -> str:
        return f"{self.next_name} " + " ".join(type_to_text(t) for t in sorted(self.types))

    def covers(self, owner: Name, name: Name) -> bool:
        """True when ``name`` falls strictly between ``owner`` and the next name."""
        if owner < self.next_name:
            return owner < name < self.next_name
        # last NSEC in the chain wraps around to the apex
        return name > owner or name < self.next_name


@dataclass(frozen=True)
class HTTPREQRecord(Rdata):
    flags: int = 0
    rtype = HTTPREQ

    def __post_init__(self):
        if not 0 <= self.flags <= 0xFF:
            raise MalformedRecord("HTTPREQ flags must fit one octet")
        if self.flags & ~HTTPREQ_INCLUDE_SUBDOMAINS:
            raise MalformedRecord(f"HTTPREQ reserved flag bits set: {self.flags:#04x}")

    @property
    def include_subdomains(self) -> bool:
        return bool(self.flags & HTTPREQ_INCLUDE_SUBDOMAINS)

    def to_wire(self, canonical: bool = False) -> bytes:
        return bytes([self.flags])

    def to_text(self) -> str:
        # generic presentation; the type is private-use
        return f"\\# 1 {self.flags:02x}"


@dataclass(frozen=True)
class OPTRecord(Rdata):
    options: bytes = b""
    rtype = OPT

    def to_wire(self, canonical: bool = False) -> bytes:
        return self.options

    def to_text(self) -> str:
        return self.options.hex()


def key_tag(dnskey_rdata: bytes) -> int:
    acc = 0
    for i, byte in enumerate(dnskey_rdata):
        acc += byte << 8 if i % 2 == 0 else byte
    acc += (acc >> 16) & 0xFFFF
    return acc & 0xFFFF


def encode_type_bitmap(types) -> bytes:
    windows: dict[int, bytearray] = {}
    for t in sorted(types):
        window, low = divmod(t, 256)
        bitmap = windows.setdefault(window, bytearray(32))
        bitmap[low // 8] |= 0x80 >> (low % 8)
    out = bytearray()
    for window in sorted(windows):
        bitmap = windows[window].rstrip(b"\x00")
        out += bytes([window, len(bitmap)]) + bitmap
    return bytes(out)


def decode_type_bitmap(data: bytes) -> frozenset:
    types = set()
    pos = 0
    last_window = -1
    while pos < len(data):
        if pos + 2 > len(data):
            raise MalformedRecord("truncated NSEC type bitmap")
        window, length = data[pos], data[pos + 1]
        if window <= last_window or not 1 <= length <= 32 or pos + 2 + length > len(data):
            raise MalformedRecord("bad NSEC type bitmap window")
        last_window = window
        for i, byte in enumerate(data[pos + 2:pos + 2 + length]):
            for bit in range(8):
                if byte & (0x80 >> bit):
                    types.add(window * 256 + i * 8 + bit)
        pos += 2 + length
    return frozenset(types)


def decode_httpreq(data: bytes) -> HTTPREQRecord:
    if len(data) != 1:
        raise MalformedRecord(f"HTTPREQ RDATA must be exactly 1 octet, got {len(data)}")
    return HTTPREQRecord(data[0])


def encode_httpreq(record: HTTPREQRecord) -> bytes:
    return record.to_wire()


def decode_rdata(rtype: int, message: bytes, offset: int, length: int) -> Rdata:
    """Decode RDATA at ``message[offset:offset+length]``.

    ``message`` is the enclosing buffer so compressed names in NS/SOA resolve.
    """
    end = offset + length
    data = message[offset:end]
    try:
        if rtype == HTTPREQ:
            return decode_httpreq(data)
        if rtype == A:
            if length != 4:
                raise MalformedRecord("A RDATA must be 4 octets")
            return ARecord(str(ipaddress.IPv4Address(data)))
        if rtype == NS:
            name, pos = read_name(message, offset)
            _expect_end(pos, end)
            return NSRecord(name)
        if rtype == SOA:
            mname, pos = read_name(message, offset)
            rname, pos = read_name(message, pos)
            _expect_end(pos + 20, end)
            return SOARecord(mname, rname, *struct.unpack("!IIIII", message[pos:pos + 20]))
        if rtype == DNSKEY:
            if length < 4:
                raise MalformedRecord("DNSKEY RDATA too short")
            flags, protocol, algorithm = struct.unpack("!HBB", data[:4])
            return DNSKEYRecord(flags, protocol, algorithm, data[4:])
        if rtype == DS:
            if length < 4:
                raise MalformedRecord("DS RDATA too short")
            tag, algorithm, digest_type = struct.unpack("!HBB", data[:4])
            return DSRecord(tag, algorithm, digest_type, data[4:])
        if rtype == RRSIG:
            if length < 19:
                raise MalformedRecord("RRSIG RDATA too short")
            fields = struct.unpack("!HBBIIIH", data[:18])
            signer, pos = read_name(message, offset + 18)
            if pos > end:
                raise MalformedRecord("RRSIG signer overruns RDATA")
            return RRSIGRecord(*fields, signer, message[pos:end])
        if rtype == NSEC:
            next_name, pos = read_name(message, offset)
            if pos > end:
                raise MalformedRecord("NSEC next name overruns RDATA")
            return NSECRecord(next_name, decode_type_bitmap(message[pos:end]))
        if rtype == OPT:
            return OPTRecord(data)
    except (BadName, struct.error) as exc:
        raise MalformedRecord(f"{type_to_text(rtype)}: {exc}") from exc
    return Generic(rtype, data)


def _expect_end(pos: int, end: int):
    if pos != end:
        raise MalformedRecord("RDATA length mismatch")
