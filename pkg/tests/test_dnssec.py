import random

import dns.dnssec
import dns.message
import dns.name
import dns.rdatatype
import pytest
from hypothesis import given, settings, strategies as st

from hsts_enforced.dns.dnssec import (SignedRRset, UnsupportedAlgorithm, canonical_rrset_wire,
                                      make_ds, verify_rrset)
from hsts_enforced.dns.name import Name
from hsts_enforced.dns.rdata import (DNSKEY, DS, HTTPREQ, IN, ARecord, DNSKEYRecord,
                                     HTTPREQRecord)
from hsts_enforced.dns.wire import RR, RRset, encode_message, make_query
from hsts_enforced.sim.signer import ED25519, ZoneKey, resign, sign_zone

from conftest import NOW, n


def _answer(zone, name, rtype):
    return zone.signed(n(name), rtype)


class TestVerifyRrset:
    def test_valid_signature(self, signed_apex):
        zone, key = signed_apex
        assert verify_rrset(_answer(zone, "example.test", HTTPREQ), key.dnskey, NOW)

    def test_tampered_rdata(self, signed_apex):
        zone, key = signed_apex
        good = _answer(zone, "example.test", HTTPREQ)
        forged = SignedRRset(RRset(good.name, HTTPREQ, IN, good.rrset.ttl, (HTTPREQRecord(0),)),
                             good.rrsigs)
        assert not verify_rrset(forged, key.dnskey, NOW)

    def test_tampered_signature(self, signed_apex):
        zone, key = signed_apex
        good = _answer(zone, "example.test", HTTPREQ)
        sig = good.rrsigs[0]
        raw = bytearray(sig.signature)
        raw[5] ^= 0x40
        bad = type(sig)(sig.type_covered, sig.algorithm, sig.labels, sig.original_ttl,
                        sig.expiration, sig.inception, sig.key_tag, sig.signer, bytes(raw))
        assert not verify_rrset(SignedRRset(good.rrset, (bad,)), key.dnskey, NOW)

    def test_expired_and_not_yet_valid(self, signed_apex):
        zone, key = signed_apex
        good = _answer(zone, "example.test", HTTPREQ)
        assert not verify_rrset(good, key.dnskey, NOW + 1001)
        assert not verify_rrset(good, key.dnskey, NOW - 11)
        assert verify_rrset(good, key.dnskey, NOW + 1001, skew=5)

    def test_wrong_key(self, signed_apex):
        zone, _ = signed_apex
        other = ZoneKey.generate(rng=random.Random(99))
        assert not verify_rrset(_answer(zone, "example.test", HTTPREQ), other.dnskey, NOW)

    def test_ttl_is_not_signed(self, signed_apex):
        zone, key = signed_apex
        good = _answer(zone, "example.test", HTTPREQ)
        stale = SignedRRset(good.rrset.with_ttl(5), good.rrsigs)
        assert verify_rrset(stale, key.dnskey, NOW)

    def test_unsupported_algorithm_raises(self, signed_apex):
        zone, key = signed_apex
        dsa = DNSKEYRecord(257, 3, 3, key.dnskey.public_key)
        with pytest.raises(UnsupportedAlgorithm):
            verify_rrset(_answer(zone, "example.test", HTTPREQ), dsa, NOW)

    def test_ed25519(self):
        key = ZoneKey.generate(ED25519, random.Random(3))
        zone = sign_zone(n("ed.test"), [RR(n("ed.test"), HTTPREQ, IN, 60, HTTPREQRecord(0))],
                         [key], inception=NOW - 1, expiration=NOW + 60)
        assert verify_rrset(zone.signed(n("ed.test"), HTTPREQ), key.dnskey, NOW)


class TestCanonicalForm:
    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(1, 254), min_size=1, max_size=6, unique=True),
           st.randoms(use_true_random=False), st.booleans())
    def test_reorder_and_case_do_not_change_signed_bytes(self, octets, rnd, upper):
        name = n("txt.example.test")
        rdatas = [ARecord(f"192.0.2.{o}") for o in octets]
        base = RRset(name, 1, IN, 300, tuple(rdatas))
        shuffled = list(rdatas)
        rnd.shuffle(shuffled)
        owner = Name.from_text("TXT.Example.TEST" if upper else "txt.example.test")
        other = RRset(owner, 1, IN, 300, tuple(shuffled))
        assert canonical_rrset_wire(base, 300) == canonical_rrset_wire(other, 300)

    def test_reordered_set_still_verifies(self, signed_apex):
        _, key = signed_apex
        name = n("multi.example.test")
        rrset = RRset(name, 1, IN, 60, (ARecord("192.0.2.9"), ARecord("192.0.2.3")))
        sig = resign(rrset, key, n("example.test"), NOW - 1, NOW + 60)
        flipped = RRset(n("MULTI.example.test"), 1, IN, 60, tuple(reversed(rrset.rdatas)))
        assert verify_rrset(SignedRRset(flipped, (sig,)), key.dnskey, NOW)


def _dnspython_rrsets(world, name, rtype):
    wire = world.handle_wire(encode_message(make_query(n(name), rtype, 1)))
    msg = dns.message.from_wire(wire)
    data = [r for r in msg.answer if r.rdtype != dns.rdatatype.RRSIG]
    sigs = [r for r in msg.answer if r.rdtype == dns.rdatatype.RRSIG]
    return data[0], sigs[0]


class TestCrossCheck:
    """dnspython validates what our signer produces."""

    @pytest.mark.parametrize("name,rtype,zone", [
        ("example.tld", HTTPREQ, "example.tld"),
        ("example.tld", DNSKEY, "example.tld"),
        ("example.tld", DS, "tld"),
        ("tld", DNSKEY, "tld"),
        (".", DNSKEY, "."),
    ])
    def test_dnspython_validates_signatures(self, world, name, rtype, zone):
        rrset, sigs = _dnspython_rrsets(world, name, rtype)
        keys, _ = _dnspython_rrsets(world, zone, DNSKEY)
        dns.dnssec.validate(rrset, sigs, {dns.name.from_text(zone): keys}, now=NOW)

    def test_ds_digest_matches_dnspython(self, world):
        key = world.keys[n("example.tld")].dnskey
        ours = make_ds(n("example.tld"), key)
        keys, _ = _dnspython_rrsets(world, "example.tld", DNSKEY)
        theirs = dns.dnssec.make_ds("example.tld.", next(iter(keys)), "SHA256")
        assert ours.digest == theirs.digest and ours.key_tag == theirs.key_tag

    def test_parent_publishes_matching_ds(self, world):
        ds = world.zones[n("tld")].signed(n("example.tld"), DS).rrset.rdatas[0]
        assert ds == make_ds(n("example.tld"), world.keys[n("example.tld")].dnskey)
