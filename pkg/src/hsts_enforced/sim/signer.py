"""Zone signer used to build test worlds and as the oracle for validator tests.

The signing input is assembled here from first principles rather than through
``hsts_enforced.dns.dnssec`` so that verification tests exercise two
independent constructions of the same RFC 4034 byte string.
"""

from __future__ import annotations

import hashlib
import random
import struct
from dataclasses import dataclass, field

from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec, ed25519
from cryptography.hazmat.primitives.asymmetric.utils import decode_dss_signature

from ..dns.dnssec import SignedRRset
from ..dns.name import Name
from ..dns.rdata import (DNSKEY, DS, IN, NS, NSEC, RRSIG, SOA, DNSKEYRecord, DSRecord,
                         NSECRecord, NSRecord, RRSIGRecord, SOARecord, key_tag)
from ..dns.wire import RR, RRset, group_rrsets

ECDSAP256SHA256 = 13
ED25519 = 15
SIGNING_ALGORITHMS = (ECDSAP256SHA256, ED25519)

_P256_ORDER = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551


class SigningError(ValueError):
    pass


@dataclass(frozen=True)
class ZoneKey:
    algorithm: int
    private: object
    flags: int = 257

    @classmethod
    def generate(cls, algorithm: int = ECDSAP256SHA256, rng: random.Random | None = None,
                 flags: int = 257) -> "ZoneKey":
        rng = rng or random.Random()
        if algorithm == ECDSAP256SHA256:
            private = ec.derive_private_key(rng.randrange(1, _P256_ORDER), ec.SECP256R1())
        elif algorithm == ED25519:
            private = ed25519.Ed25519PrivateKey.from_private_bytes(rng.randbytes(32))
        else:
            raise SigningError(f"cannot sign with algorithm {algorithm}")
        return cls(algorithm, private, flags)

    @property
    def dnskey(self) -> DNSKEYRecord:
        if self.algorithm == ECDSAP256SHA256:
            raw = self.private.public_key().public_bytes(
                serialization.Encoding.X962, serialization.PublicFormat.UncompressedPoint)[1:]
        else:
            raw = self.private.public_key().public_bytes(
                serialization.Encoding.Raw, serialization.PublicFormat.Raw)
        return DNSKEYRecord(self.flags, 3, self.algorithm, raw)

    @property
    def is_sep(self) -> bool:
        return bool(self.flags & 1)

    def sign(self, data: bytes) -> bytes:
        if self.algorithm == ECDSAP256SHA256:
            der = self.private.sign(data, ec.ECDSA(hashes.SHA256(), deterministic_signing=True))
            r, s = decode_dss_signature(der)
            return r.to_bytes(32, "big") + s.to_bytes(32, "big")
        return self.private.sign(data)


@dataclass
class SignedZone:
    apex: Name
    rrsets: dict
    rrsigs: dict
    keys: list
    nsec_chain: list
    parent_ds: RRset | None
    delegations: set = field(default_factory=set)

    def signed(self, name: Name, rtype: int) -> SignedRRset | None:
        rrset = self.rrsets.get((name, rtype))
        if rrset is None:
            return None
        return SignedRRset(rrset, tuple(self.rrsigs.get((name, rtype), ())))

    def names(self) -> list[Name]:
        return [rr.name for rr in self.nsec_chain]

    def types_at(self, name: Name) -> set:
        return {t for (n, t) in self.rrsets if n == name}

    def nsec_for(self, name: Name) -> SignedRRset | None:
        """The NSEC owned by ``name``, or the one whose span covers it."""
        for rr in self.nsec_chain:
            if rr.name == name or rr.rdata.covers(rr.name, name):
                return self.signed(rr.name, NSEC)
        return None

    def delegation_above(self, name: Name) -> Name | None:
        for cut in self.delegations:
            if name.is_subdomain_of(cut):
                return cut
        return None

    @property
    def soa(self) -> SOARecord:
        return self.rrsets[(self.apex, SOA)].rdatas[0]

    def all_rrs(self) -> list[RR]:
        out = []
        for key in sorted(self.rrsets, key=lambda k: (k[0], k[1])):
            out.extend(self.rrsets[key].rrs())
            for sig in self.rrsigs.get(key, ()):
                out.append(RR(key[0], RRSIG, IN, self.rrsets[key].ttl, sig))
        return out


def sign_zone(apex: Name, records, keys, parent: Name | None = None, *,
              inception: int, expiration: int, dnskey_ttl: int = 3600,
              ds_ttl: int = 3600) -> SignedZone:
    """Sign ``records`` for the zone at ``apex``.

    Adds default SOA/NS at the apex when absent, the DNSKEY RRset for ``keys``,
    a closed NSEC chain and RRSIGs over every authoritative RRset.  With
    ``parent`` given, the DS RRset for the parent side is returned in
    ``parent_ds``.
    """
    if not keys:
        raise SigningError("zone needs at least one key")
    for key in keys:
        if key.algorithm not in SIGNING_ALGORITHMS:
            raise SigningError(f"cannot sign with algorithm {key.algorithm}")
    records = list(records)
    for rr in records:
        if not rr.name.is_subdomain_of(apex):
            raise SigningError(f"{rr.name} is outside zone {apex}")
        if rr.rtype in (RRSIG, NSEC, DNSKEY):
            raise SigningError(f"{rr.name}: signer generates {rr.rtype} records itself")

    present = {(rr.name, rr.rtype) for rr in records}
    if (apex, SOA) not in present:
        records.append(RR(apex, SOA, IN, 3600, SOARecord(
            apex.prepend("ns1"), apex.prepend("hostmaster"), 1, 7200, 3600, 1209600, 300)))
    if (apex, NS) not in present:
        records.append(RR(apex, NS, IN, 3600, NSRecord(apex.prepend("ns1"))))
    for key in keys:
        records.append(RR(apex, DNSKEY, IN, dnskey_ttl, key.dnskey))

    delegations = {rr.name for rr in records if rr.rtype == NS and rr.name != apex}
    for rr in records:
        if rr.rtype == DS and rr.name not in delegations:
            raise SigningError(f"DS at {rr.name} without a delegation")

    def occluded(name):
        return any(name != cut and name.is_subdomain_of(cut) for cut in delegations)

    rrsets = {}
    for rrset in group_rrsets(r for r in records if not occluded(r.name)):
        rrsets[(rrset.name, rrset.rtype)] = rrset

    soa_min = min(rrsets[(apex, SOA)].rdatas[0].minimum, rrsets[(apex, SOA)].ttl)
    names = sorted({name for name, _ in rrsets})
    nsec_chain = []
    for i, name in enumerate(names):
        following = names[(i + 1) % len(names)]
        # RRSIG is always listed: the NSEC itself is signed even at unsigned cuts
        types = {t for (n, t) in rrsets if n == name} | {NSEC, RRSIG}
        nsec_rr = RR(name, NSEC, IN, soa_min, NSECRecord(following, frozenset(types)))
        nsec_chain.append(nsec_rr)
        rrsets[(name, NSEC)] = RRset.from_rrs([nsec_rr])

    ksks = [k for k in keys if k.is_sep]
    zsks = [k for k in keys if not k.is_sep]
    rrsigs = {}
    for (name, rtype), rrset in rrsets.items():
        if name in delegations and rtype == NS:
            continue  # delegation NS sets are not authoritative here
        if ksks and zsks:
            signers = ksks if rtype == DNSKEY else zsks
        else:
            signers = keys
        rrsigs[(name, rtype)] = [_sign_rrset(rrset, key, apex, inception, expiration)
                                 for key in signers]

    parent_ds = None
    if parent is not None:
        ds_keys = ksks or keys
        parent_ds = RRset(apex, DS, IN, ds_ttl, tuple(ds_record(apex, k.dnskey) for k in ds_keys))

    return SignedZone(apex, rrsets, rrsigs, list(keys), nsec_chain, parent_ds, delegations)


def ds_record(owner: Name, dnskey: DNSKEYRecord) -> DSRecord:
    rdata = struct.pack("!HBB", dnskey.flags, dnskey.protocol, dnskey.algorithm) + dnskey.public_key
    digest = hashlib.sha256(_owner_wire(owner) + rdata).digest()
    return DSRecord(key_tag(rdata), dnskey.algorithm, 2, digest)


def _owner_wire(name: Name) -> bytes:
    return b"".join(bytes([len(l)]) + l.lower() for l in name.labels) + b"\x00"


def _sign_rrset(rrset: RRset, key: ZoneKey, signer: Name, inception: int,
                expiration: int) -> RRSIGRecord:
    dnskey = key.dnskey
    labels = len([l for l in rrset.name.labels if l != b"*"])
    tag = key_tag(dnskey.to_wire())
    header = struct.pack("!HBBIIIH", rrset.rtype, key.algorithm, labels, rrset.ttl,
                         expiration, inception, tag) + _owner_wire(signer)
    owner = _owner_wire(rrset.name)
    blobs = sorted({rd.to_wire(canonical=True) for rd in rrset.rdatas})
    body = b"".join(owner + struct.pack("!HHIH", rrset.rtype, rrset.rclass, rrset.ttl, len(b)) + b
                    for b in blobs)
    return RRSIGRecord(rrset.rtype, key.algorithm, labels, rrset.ttl, expiration, inception,
                       tag, signer, key.sign(header + body))


def resign(rrset: RRset, key: ZoneKey, signer: Name, inception: int,
           expiration: int) -> RRSIGRecord:
    """Sign a single RRset outside of a zone build (used by mirror zones and tests)."""
    return _sign_rrset(rrset, key, signer, inception, expiration)
