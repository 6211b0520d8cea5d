"""RRset signature verification and DS digests (validator side)."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ec, ed25519, padding, rsa
from cryptography.hazmat.primitives.asymmetric.utils import encode_dss_signature

from .name import Name
from .rdata import DNSKEYRecord, DSRecord, RRSIGRecord
from .wire import RRset

RSASHA256 = 8
ECDSAP256SHA256 = 13
ED25519 = 15

SUPPORTED_ALGORITHMS = frozenset({RSASHA256, ECDSAP256SHA256, ED25519})

DIGEST_SHA256 = 2
SUPPORTED_DIGESTS = {DIGEST_SHA256: hashlib.sha256}


class UnsupportedAlgorithm(Exception):
    """The key or signature uses an algorithm this validator does not implement."""

    def __init__(self, algorithm: int):
        super().__init__(f"unsupported DNSSEC algorithm {algorithm}")
        self.algorithm = algorithm


@dataclass(frozen=True)
class SignedRRset:
    """An RRset together with the RRSIGs that cover it."""

    rrset: RRset
    rrsigs: tuple = ()

    @property
    def name(self) -> Name:
        return self.rrset.name

    @property
    def rtype(self) -> int:
        return self.rrset.rtype


def canonical_rrset_wire(rrset: RRset, original_ttl: int) -> bytes:
    owner = rrset.name.to_wire(canonical=True)
    rdatas = sorted({rd.to_wire(canonical=True) for rd in rrset.rdatas})
    out = bytearray()
    for rd in rdatas:
        out += owner + struct.pack("!HHIH", rrset.rtype, rrset.rclass, original_ttl, len(rd)) + rd
    return bytes(out)


def signed_data(rrset: RRset, rrsig: RRSIGRecord) -> bytes:
    return rrsig.header_wire() + canonical_rrset_wire(rrset, rrsig.original_ttl)


def ds_digest(owner: Name, key: DNSKEYRecord, digest_type: int = DIGEST_SHA256) -> bytes:
    if digest_type not in SUPPORTED_DIGESTS:
        raise ValueError(f"unsupported DS digest type {digest_type}")
    return SUPPORTED_DIGESTS[digest_type](owner.to_wire(canonical=True) + key.to_wire()).digest()


def make_ds(owner: Name, key: DNSKEYRecord, digest_type: int = DIGEST_SHA256) -> DSRecord:
    return DSRecord(key.key_tag(), key.algorithm, digest_type, ds_digest(owner, key, digest_type))


def ds_matches(owner: Name, ds: DSRecord, key: DNSKEYRecord) -> bool:
    if ds.digest_type not in SUPPORTED_DIGESTS:
        return False
    if ds.algorithm != key.algorithm or ds.key_tag != key.key_tag():
        return False
    return ds_digest(owner, key, ds.digest_type) == ds.digest


def owner_label_count(name: Name) -> int:
    labels = name.labels
    return len(labels) - (1 if labels and labels[0] == b"*" else 0)


def verify_rrset(proofed: SignedRRset, key: DNSKEYRecord, now: int,
                 key_owner: Name | None = None, skew: int = 0) -> bool:
    """Check that one of the RRSIGs on ``proofed`` verifies under ``key``.

    Raises UnsupportedAlgorithm when ``key`` uses an algorithm outside
    SUPPORTED_ALGORITHMS.
    """
    if key.algorithm not in SUPPORTED_ALGORITHMS:
        raise UnsupportedAlgorithm(key.algorithm)
    if not key.is_zone_key or key.protocol != 3:
        return False
    rrset = proofed.rrset
    tag = key.key_tag()
    for rrsig in proofed.rrsigs:
        if rrsig.type_covered != rrset.rtype or rrsig.algorithm != key.algorithm:
            continue
        if rrsig.key_tag != tag:
            continue
        if key_owner is not None and rrsig.signer != key_owner:
            continue
        if not rrset.name.is_subdomain_of(rrsig.signer):
            continue
        # wildcard-expanded answers are not supported
        if rrsig.labels != owner_label_count(rrset.name):
            continue
        if not rrsig.inception - skew <= now <= rrsig.expiration + skew:
            continue
        if _verify_signature(key, signed_data(rrset, rrsig), rrsig.signature):
            return True
    return False


def _verify_signature(key: DNSKEYRecord, data: bytes, signature: bytes) -> bool:
    try:
        if key.algorithm == ECDSAP256SHA256:
            if len(key.public_key) != 64 or len(signature) != 64:
                return False
            public = ec.EllipticCurvePublicNumbers(
                int.from_bytes(key.public_key[:32], "big"),
                int.from_bytes(key.public_key[32:], "big"),
                ec.SECP256R1(),
            ).public_key()
            der = encode_dss_signature(int.from_bytes(signature[:32], "big"),
                                       int.from_bytes(signature[32:], "big"))
            public.verify(der, data, ec.ECDSA(hashes.SHA256()))
            return True
        if key.algorithm == ED25519:
            if len(key.public_key) != 32 or len(signature) != 64:
                return False
            ed25519.Ed25519PublicKey.from_public_bytes(key.public_key).verify(signature, data)
            return True
        if key.algorithm == RSASHA256:
            _rsa_public(key.public_key).verify(signature, data, padding.PKCS1v15(),
                                               hashes.SHA256())
            return True
    except (InvalidSignature, ValueError):
        return False
    raise UnsupportedAlgorithm(key.algorithm)


def _rsa_public(blob: bytes) -> rsa.RSAPublicKey:
    if not blob:
        raise ValueError("empty RSA key")
    if blob[0] == 0:
        exp_len = int.from_bytes(blob[1:3], "big")
        pos = 3
    else:
        exp_len = blob[0]
        pos = 1
    exponent = int.from_bytes(blob[pos:pos + exp_len], "big")
    modulus = int.from_bytes(blob[pos + exp_len:], "big")
    if exponent == 0 or modulus == 0:
        raise ValueError("degenerate RSA key")
    return rsa.RSAPublicNumbers(exponent, modulus).public_key()
