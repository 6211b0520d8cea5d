"""Chain-of-trust validation for HTTPREQ presence or absence proofs.

A :class:`DnsChain` carries every RRset needed to walk from a trust anchor
down to the queried name.  :func:`validate_chain` never raises; every failure
mode becomes a :class:`ValidationResult`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .dnssec import (SUPPORTED_ALGORITHMS, SUPPORTED_DIGESTS, SignedRRset,
                     UnsupportedAlgorithm, ds_matches, verify_rrset)
from .name import ROOT, BadName, Name
from .rdata import (DNSKEY, DS, HTTPREQ, NS, NSEC, NSEC3, SOA, DNSKEYRecord, DSRecord,
                    HTTPREQRecord, NSECRecord)


class AnchorKind(enum.Enum):
    ROOT = "root"
    CUSTOM = "custom"


class ValidationState(enum.Enum):
    SECURE_PRESENT = "secure-present"
    SECURE_ABSENT = "secure-absent"
    INSECURE = "insecure"
    BOGUS = "bogus"


@dataclass(frozen=True)
class ValidationResult:
    state: ValidationState
    include_subdomains: bool = False
    anchor_kind: AnchorKind | None = None
    reason: str = ""

    @property
    def secure_present(self) -> bool:
        return self.state is ValidationState.SECURE_PRESENT

    def describe(self) -> str:
        if self.state is ValidationState.SECURE_PRESENT:
            return (f"{self.state.value} include_subdomains={str(self.include_subdomains).lower()}"
                    f" anchor={self.anchor_kind.value}")
        return f"{self.state.value}" + (f" ({self.reason})" if self.reason else "")


def bogus(reason: str) -> ValidationResult:
    return ValidationResult(ValidationState.BOGUS, reason=reason)


@dataclass(frozen=True)
class TrustAnchor:
    """A DNSKEY or DS accepted axiomatically for names under ``scope``."""

    scope: Name
    kind: AnchorKind
    dnskey: DNSKEYRecord | None = None
    ds: DSRecord | None = None

    def __post_init__(self):
        if (self.dnskey is None) == (self.ds is None):
            raise ValueError("trust anchor needs exactly one of dnskey or ds")
        if self.kind is AnchorKind.CUSTOM and self.scope.is_root:
            raise ValueError("custom trust anchors cannot be scoped to the root")
        if self.kind is AnchorKind.ROOT and not self.scope.is_root:
            raise ValueError("root trust anchors must be scoped to '.'")

    @property
    def algorithm(self) -> int:
        return self.dnskey.algorithm if self.dnskey is not None else self.ds.algorithm

    def covers(self, name: Name) -> bool:
        return name.is_subdomain_of(self.scope)


@dataclass(frozen=True)
class ZoneLink:
    """One zone on the path: its DNSKEY set plus the delegation toward the child.

    ``ds`` is the child's DS RRset as signed by this zone.  ``no_ds`` is an
    NSEC proving the child delegation is unsigned, which ends the chain.
    """

    zone: Name
    dnskey: SignedRRset
    ds: SignedRRset | None = None
    no_ds: SignedRRset | None = None


@dataclass(frozen=True)
class DnsChain:
    target: Name
    links: tuple
    answer: SignedRRset | None = None
    denial: tuple = field(default_factory=tuple)

    def all_rrsets(self) -> list[SignedRRset]:
        out = []
        for link in self.links:
            out.append(link.dnskey)
            if link.ds is not None:
                out.append(link.ds)
            if link.no_ds is not None:
                out.append(link.no_ds)
        if self.answer is not None:
            out.append(self.answer)
        out.extend(self.denial)
        return out


def select_anchors(anchors, target: Name) -> list[TrustAnchor]:
    """In-scope anchors, deepest scope first, root anchors last."""
    inside = [a for a in anchors if a.covers(target)]
    return sorted(inside, key=lambda a: (a.kind is AnchorKind.ROOT, -len(a.scope)))


def validate_chain(chain: DnsChain, anchors, now: int, skew: int = 0) -> ValidationResult:
    candidates = select_anchors(anchors, chain.target)
    if not candidates:
        return bogus("no trust anchor in scope")
    result = None
    for anchor in candidates:
        try:
            result = _validate_from(chain, anchor, now, skew)
        except UnsupportedAlgorithm as exc:
            result = bogus(str(exc))
        if result.state is not ValidationState.BOGUS:
            return result
    return result


def _validate_from(chain: DnsChain, anchor: TrustAnchor, now: int, skew: int) -> ValidationResult:
    links = chain.links
    start = next((i for i, link in enumerate(links) if link.zone == anchor.scope), None)
    if start is None:
        return bogus(f"anchor zone {anchor.scope} not on chain")
    for upper, lower in zip(links, links[1:]):
        if lower.zone == upper.zone or not lower.zone.is_subdomain_of(upper.zone):
            return bogus("zone links do not strictly descend")
    if not chain.target.is_subdomain_of(links[-1].zone) and links[-1].no_ds is None:
        return bogus("target outside the last zone")

    keys = _anchor_keys(links[start], anchor, now, skew)
    if not keys:
        return bogus(f"DNSKEY set of {anchor.scope} does not verify against the anchor")

    for j in range(start, len(links)):
        link = links[j]
        if link.dnskey.rrset.name != link.zone or link.dnskey.rtype != DNSKEY:
            return bogus(f"DNSKEY set for {link.zone} has wrong owner or type")
        if j > start:
            keys = _child_keys(links[j - 1].ds, link, now, skew)
            if keys is None:
                return ValidationResult(ValidationState.INSECURE, anchor_kind=anchor.kind,
                                        reason=f"no supported DS algorithm for {link.zone}")
            if not keys:
                return bogus(f"DNSKEY set of {link.zone} does not match its DS")
        if link.no_ds is not None:
            return _insecure_delegation(chain, link, keys, now, skew, anchor)
        if j + 1 < len(links):
            ds = link.ds
            if ds is None:
                return bogus(f"missing DS for {links[j + 1].zone}")
            if ds.rtype != DS or ds.name != links[j + 1].zone:
                return bogus("DS RRset does not name the child zone")
            if not _signed_by(ds, keys, link.zone, now, skew):
                return bogus(f"DS for {ds.name} fails verification")

    zone = links[-1].zone
    if chain.answer is not None:
        return _presence(chain, zone, keys, now, skew, anchor)
    if chain.denial:
        return _absence(chain, zone, keys, now, skew, anchor)
    return bogus("chain carries neither an answer nor a denial")


def _anchor_keys(link: ZoneLink, anchor: TrustAnchor, now, skew) -> list[DNSKEYRecord]:
    keyset = link.dnskey
    if anchor.dnskey is not None:
        trusted = [k for k in keyset.rrset.rdatas
                   if isinstance(k, DNSKEYRecord) and k.algorithm == anchor.dnskey.algorithm
                   and k.public_key == anchor.dnskey.public_key]
    else:
        trusted = [k for k in keyset.rrset.rdatas
                   if isinstance(k, DNSKEYRecord) and ds_matches(link.zone, anchor.ds, k)]
    for key in trusted:
        if verify_rrset(keyset, key, now, link.zone, skew):
            return _zone_keys(keyset)
    return []


def _child_keys(ds_set, link, now, skew):
    """Trusted keys of ``link.zone`` via the parent's DS set.

    Returns None when the DS set lists only unsupported algorithms (insecure),
    an empty list when nothing matches (bogus).
    """
    supported = [ds for ds in ds_set.rrset.rdatas
                 if isinstance(ds, DSRecord) and ds.algorithm in SUPPORTED_ALGORITHMS
                 and ds.digest_type in SUPPORTED_DIGESTS]
    if not supported:
        return None
    keyset = link.dnskey
    for ds in supported:
        for key in keyset.rrset.rdatas:
            if isinstance(key, DNSKEYRecord) and ds_matches(link.zone, ds, key):
                if verify_rrset(keyset, key, now, link.zone, skew):
                    return _zone_keys(keyset)
    return []


def _zone_keys(keyset: SignedRRset) -> list[DNSKEYRecord]:
    return [k for k in keyset.rrset.rdatas
            if isinstance(k, DNSKEYRecord) and k.is_zone_key
            and k.protocol == 3 and k.algorithm in SUPPORTED_ALGORITHMS]


def _signed_by(proofed: SignedRRset, keys, zone: Name, now, skew) -> bool:
    if not proofed.name.is_subdomain_of(zone):
        return False
    return any(verify_rrset(proofed, key, now, zone, skew) for key in keys)


def _insecure_delegation(chain, link, keys, now, skew, anchor) -> ValidationResult:
    proof = link.no_ds
    if proof.rtype != NSEC or len(proof.rrset.rdatas) != 1:
        return bogus("unsigned-delegation proof is not a single NSEC")
    child = proof.name
    nsec = proof.rrset.rdatas[0]
    if child == link.zone or not child.is_subdomain_of(link.zone):
        return bogus("unsigned-delegation proof is not below the zone")
    if not chain.target.is_subdomain_of(child):
        return bogus("unsigned delegation does not lead to the target")
    if NS not in nsec.types or DS in nsec.types or SOA in nsec.types:
        return bogus("NSEC does not prove an unsigned delegation")
    if not _signed_by(proof, keys, link.zone, now, skew):
        return bogus("unsigned-delegation NSEC fails verification")
    return ValidationResult(ValidationState.INSECURE, anchor_kind=anchor.kind,
                            reason=f"unsigned delegation at {child}")


def _presence(chain, zone, keys, now, skew, anchor) -> ValidationResult:
    answer = chain.answer
    if answer.rtype != HTTPREQ or answer.name != chain.target:
        return bogus("answer is not an HTTPREQ RRset for the target")
    if not all(isinstance(rd, HTTPREQRecord) for rd in answer.rrset.rdatas):
        return bogus("malformed HTTPREQ RDATA")
    if not _signed_by(answer, keys, zone, now, skew):
        return bogus("HTTPREQ RRset fails verification")
    include = any(rd.include_subdomains for rd in answer.rrset.rdatas)
    return ValidationResult(ValidationState.SECURE_PRESENT, include_subdomains=include,
                            anchor_kind=anchor.kind)


def _absence(chain, zone, keys, now, skew, anchor) -> ValidationResult:
    target = chain.target
    for proof in chain.denial:
        if proof.rtype == NSEC3:
            return bogus("NSEC3 denial is not supported")
    for proof in chain.denial:
        if proof.rtype != NSEC or not proof.name.is_subdomain_of(zone):
            continue
        if len(proof.rrset.rdatas) != 1 or not isinstance(proof.rrset.rdatas[0], NSECRecord):
            continue
        nsec = proof.rrset.rdatas[0]
        if not _signed_by(proof, keys, zone, now, skew):
            return bogus(f"NSEC at {proof.name} fails verification")
        if proof.name == target:
            if HTTPREQ in nsec.types:
                return bogus("NSEC asserts HTTPREQ exists")
            if NS in nsec.types and SOA not in nsec.types and proof.name != zone:
                return bogus("NSEC is from the parent side of a delegation")
            return ValidationResult(ValidationState.SECURE_ABSENT, anchor_kind=anchor.kind,
                                    reason="no HTTPREQ at name")
        if nsec.covers(proof.name, target) and nsec.next_name.is_subdomain_of(zone):
            return ValidationResult(ValidationState.SECURE_ABSENT, anchor_kind=anchor.kind,
                                    reason="name does not exist")
    return bogus("no NSEC proves HTTPREQ absence")


# --- trust anchor files -------------------------------------------------------
#
# one anchor per line: ``scope algorithm key-or-ds-hex kind``
# key form:  bare hex of the DNSKEY public key (flags 257, protocol 3 implied)
# DS form:   ``ds:`` followed by hex of the full DS RDATA


class AnchorFileError(ValueError):
    pass


def parse_anchor_line(line: str) -> TrustAnchor:
    parts = line.split()
    if len(parts) != 4:
        raise AnchorFileError("expected 'scope algorithm key-or-ds-hex kind'")
    scope_text, alg_text, material, kind_text = parts
    try:
        scope = Name.from_text(scope_text)
        algorithm = int(alg_text)
        kind = AnchorKind(kind_text.lower())
    except (BadName, ValueError) as exc:
        raise AnchorFileError(str(exc)) from exc
    try:
        if material.lower().startswith("ds:"):
            raw = bytes.fromhex(material[3:])
            if len(raw) < 5:
                raise AnchorFileError("DS material too short")
            ds = DSRecord(int.from_bytes(raw[:2], "big"), raw[2], raw[3], raw[4:])
            if ds.algorithm != algorithm:
                raise AnchorFileError("DS algorithm disagrees with algorithm column")
            return TrustAnchor(scope, kind, ds=ds)
        key = DNSKEYRecord(257, 3, algorithm, bytes.fromhex(material))
        return TrustAnchor(scope, kind, dnskey=key)
    except ValueError as exc:
        if isinstance(exc, AnchorFileError):
            raise
        raise AnchorFileError(str(exc)) from exc


def format_anchor(anchor: TrustAnchor) -> str:
    if anchor.ds is not None:
        material = "ds:" + anchor.ds.to_wire().hex()
    else:
        material = anchor.dnskey.public_key.hex()
    return f"{anchor.scope} {anchor.algorithm} {material} {anchor.kind.value}"


def load_anchors(path) -> list[TrustAnchor]:
    anchors = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                anchors.append(parse_anchor_line(line))
            except AnchorFileError as exc:
                raise AnchorFileError(f"{path}:{lineno}: {exc}") from None
    return anchors


# KSK-2017 of the DNS root zone, for validation against the public Internet
IANA_ROOT_ANCHOR = TrustAnchor(
    ROOT, AnchorKind.ROOT,
    ds=DSRecord(20326, 8, 2, bytes.fromhex(
        "E06D44B80B8F1D39A95C0B0D7C65D08458E880409BBC683457104237C7F8EC8D")),
)
