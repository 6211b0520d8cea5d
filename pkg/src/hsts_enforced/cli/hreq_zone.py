"""hreq-zone: sign a small test zone carrying an HTTPREQ record.

Prints the signed zone in presentation format, the DS record to hand to the
parent zone, and a trust-anchor line for use as a custom anchor.
"""

from __future__ import annotations

import argparse
import random
import sys
import time

from ..dns.chain import AnchorKind, TrustAnchor, format_anchor
from ..dns.name import BadName, Name
from ..dns.rdata import HTTPREQ, IN, ARecord, HTTPREQRecord
from ..dns.wire import RR
from ..sim.signer import ECDSAP256SHA256, ED25519, SigningError, ZoneKey, ds_record, sign_zone

DAY = 86400


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hreq-zone", description=__doc__.splitlines()[0])
    p.add_argument("domain", help="owner name of the HTTPREQ record")
    p.add_argument("--zone", help="zone apex (default: the domain itself)")
    p.add_argument("--include-subdomains", action="store_true")
    p.add_argument("--no-httpreq", action="store_true", help="sign the zone without HTTPREQ")
    p.add_argument("--address", default="192.0.2.10", help="A record for the domain")
    p.add_argument("--algorithm", type=int, choices=(ECDSAP256SHA256, ED25519),
                   default=ECDSAP256SHA256)
    p.add_argument("--seed", type=int, help="derive the key deterministically")
    p.add_argument("--inception", type=int, metavar="EPOCH")
    p.add_argument("--days", type=int, default=90, help="signature lifetime")
    p.add_argument("--anchor-out", metavar="FILE", help="also write the anchor line here")
    return p


def render(domain: Name, apex: Name, args) -> tuple[str, str]:
    rng = random.Random(args.seed) if args.seed is not None else random.SystemRandom()
    key = ZoneKey.generate(args.algorithm, rng)
    records = [RR(domain, 1, IN, 3600, ARecord(args.address))]
    if not args.no_httpreq:
        flags = 1 if args.include_subdomains else 0
        records.append(RR(domain, HTTPREQ, IN, 3600, HTTPREQRecord(flags)))
    inception = args.inception if args.inception is not None else int(time.time()) - 3600
    zone = sign_zone(apex, records, [key], inception=inception,
                     expiration=inception + args.days * DAY)
    lines = [f"$ORIGIN {apex}"]
    lines += [rr.to_text() for rr in zone.all_rrs()]
    ds = ds_record(apex, key.dnskey)
    lines.append("; DS for the parent zone")
    lines.append(RR(apex, 43, IN, 3600, ds).to_text())
    anchor = format_anchor(TrustAnchor(apex, AnchorKind.CUSTOM, dnskey=key.dnskey))
    lines.append("; custom trust anchor")
    lines.append(f"; {anchor}")
    return "\n".join(lines) + "\n", anchor


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        domain = Name.from_text(args.domain)
        apex = Name.from_text(args.zone) if args.zone else domain
        if apex.is_root:
            raise ValueError("refusing to sign the root zone")
        if not domain.is_subdomain_of(apex):
            raise ValueError(f"{domain} is not inside zone {apex}")
        text, anchor = render(domain, apex, args)
    except (BadName, SigningError, ValueError) as exc:
        print(f"hreq-zone: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(text)
    if args.anchor_out:
        with open(args.anchor_out, "w", encoding="utf-8") as fh:
            fh.write(anchor + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
