"""Signed zone tree and the recursive resolver that serves it.

The recursive resolver answers straight from the hosted zones, so only the
stub-to-recursive link costs round trips, just as a warm recursive would.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..dns.chain import AnchorKind, TrustAnchor
from ..dns.name import ROOT, Name
from ..dns.rdata import DS, HTTPREQ, IN, NS, RRSIG, SOA, ARecord, HTTPREQRecord, NSRecord
from ..dns.wire import (FLAG_CD, FLAG_QR, FLAG_RA, FLAG_RD, NOERROR, NXDOMAIN, REFUSED,
                        RR, Message, WireError, decode_message, encode_message)
from .clock import BASE_EPOCH
from .signer import ECDSAP256SHA256, SignedZone, ZoneKey, sign_zone

DAY = 86400
SIGNATURE_LIFETIME = 90 * DAY


@dataclass
class DnsWorld:
    zones: dict
    anchors: list
    site_zone: Name
    host: Name
    keys: dict = field(default_factory=dict)

    def zone(self, apex) -> SignedZone:
        return self.zones[Name.from_text(apex)]

    def authoritative_zone(self, name: Name, rtype: int) -> SignedZone | None:
        """Deepest hosted zone for ``name``; DS lives on the parent side of a cut."""
        best = None
        for apex, zone in self.zones.items():
            if not name.is_subdomain_of(apex):
                continue
            if rtype == DS and name == apex and not apex.is_root:
                continue
            if best is None or len(apex) > len(best.apex):
                best = zone
        return best

    def answer(self, query: Message) -> Message:
        response = Message(id=query.id, flags=FLAG_QR | FLAG_RA | (query.flags & (FLAG_RD | FLAG_CD)),
                           question=list(query.question), edns=query.edns,
                           dnssec_ok=query.dnssec_ok)
        if len(query.question) != 1:
            response.rcode = REFUSED
            return response
        q = query.question[0]
        zone = self.authoritative_zone(q.name, q.rtype)
        if zone is None or q.rclass != IN:
            response.rcode = REFUSED
            return response

        signed = zone.signed(q.name, q.rtype)
        if signed is not None and not (q.rtype == NS and q.name in zone.delegations):
            response.answer = _with_sigs(signed)
            return response
        # negative answer: SOA plus the NSEC that owns or covers the name
        response.authority = _with_sigs(zone.signed(zone.apex, SOA))
        nsec = zone.nsec_for(q.name)
        if nsec is not None:
            response.authority += _with_sigs(nsec)
        if q.name not in zone.names():
            response.rcode = NXDOMAIN
        return response

    def handle_wire(self, data: bytes) -> bytes | None:
        try:
            query = decode_message(data)
        except WireError:
            return None
        if query.is_response:
            return None
        return encode_message(self.answer(query))


def _with_sigs(signed) -> list[RR]:
    rrset = signed.rrset
    out = rrset.rrs()
    out += [RR(rrset.name, RRSIG, IN, rrset.ttl, sig) for sig in signed.rrsigs]
    return out


def zone_path(domain: Name, site_labels: int = 2) -> list[Name]:
    """Zone apexes from the root down to the site zone holding ``domain``."""
    depth = min(site_labels, len(domain))
    site = Name(domain.labels[len(domain) - depth:])
    return [a for a in reversed(site.ancestors())]


def build_dns_world(domain, *, httpreq_flags: int | None = None, custom_anchor: bool = False,
                    seed: int = 0, epoch: int = BASE_EPOCH, algorithm: int = ECDSAP256SHA256,
                    extra_records=(), site_labels: int = 2) -> DnsWorld:
    """Sign root -> ... -> site zone for ``domain``.

    ``httpreq_flags`` places an HTTPREQ record at ``domain``.  With
    ``custom_anchor`` the site zone is delegated without a DS and the client
    trusts the site key through a custom anchor scoped to the site zone.
    """
    host = Name.from_text(domain)
    rng = random.Random(f"dns-world:{seed}")
    path = zone_path(host, site_labels)
    inception = epoch - 3600
    expiration = epoch + SIGNATURE_LIFETIME
    keys = {apex: ZoneKey.generate(algorithm, rng) for apex in path}

    site = path[-1]
    records = [RR(site, 1, IN, 3600, ARecord("192.0.2.10"))]
    if host != site:
        records.append(RR(host, 1, IN, 3600, ARecord("192.0.2.10")))
    if httpreq_flags is not None:
        records.append(RR(host, HTTPREQ, IN, 3600, HTTPREQRecord(httpreq_flags)))
    records += [rr for rr in extra_records if rr.name.is_subdomain_of(site)]

    zones = {}
    child = None
    child_ds = None
    for apex in reversed(path):
        if apex == site:
            zone_records = records
        else:
            zone_records = [rr for rr in extra_records
                            if rr.name.is_subdomain_of(apex) and not rr.name.is_subdomain_of(child)]
            zone_records.append(RR(child, NS, IN, 3600, NSRecord(child.prepend("ns1"))))
            if child_ds is not None:
                zone_records += child_ds.rrs()
        parent = None if apex.is_root else apex.parent()
        zone = sign_zone(apex, zone_records, [keys[apex]], parent,
                         inception=inception, expiration=expiration)
        zones[apex] = zone
        child = apex
        chained = not (custom_anchor and apex == site)
        child_ds = zone.parent_ds if chained else None

    anchors = [TrustAnchor(ROOT, AnchorKind.ROOT, dnskey=keys[ROOT].dnskey)]
    if custom_anchor:
        anchors.append(TrustAnchor(site, AnchorKind.CUSTOM, dnskey=keys[site].dnskey))
    return DnsWorld(zones, anchors, site, host, keys)
