import random

import pytest
from hypothesis import given, settings, strategies as st

from hsts_enforced.dns.chain import (IANA_ROOT_ANCHOR, AnchorFileError, AnchorKind, DnsChain,
                                     TrustAnchor, ValidationState, ZoneLink, format_anchor,
                                     load_anchors, parse_anchor_line, select_anchors,
                                     validate_chain)
from hsts_enforced.dns.dnssec import SignedRRset, make_ds
from hsts_enforced.dns.name import ROOT
from hsts_enforced.dns.rdata import DNSKEY, DS, HTTPREQ, IN, NS, HTTPREQRecord, NSRecord
from hsts_enforced.dns.wire import RR, RRset
from hsts_enforced.sim.dnsworld import build_dns_world
from hsts_enforced.sim.signer import SigningError, ZoneKey, sign_zone

from conftest import NOW, chain_from_world, mutate_chain, n

S = ValidationState


@pytest.fixture(scope="module")
def corp():
    return build_dns_world("corp.internal", httpreq_flags=1, custom_anchor=True, seed=4)


class TestValidateChain:
    def test_root_anchored_presence(self, world):
        result = validate_chain(chain_from_world(world), world.anchors, NOW)
        assert result.state is S.SECURE_PRESENT
        assert result.anchor_kind is AnchorKind.ROOT
        assert result.include_subdomains is False

    def test_root_anchored_absence(self, world_absent):
        result = validate_chain(chain_from_world(world_absent), world_absent.anchors, NOW)
        assert result.state is S.SECURE_ABSENT

    def test_nxdomain_absence(self, world):
        result = validate_chain(chain_from_world(world, "nope.example.tld"), world.anchors, NOW)
        assert result.state is S.SECURE_ABSENT
        assert result.reason == "name does not exist"

    def test_custom_anchor_presence(self, corp):
        chain = chain_from_world(corp, start="corp.internal")
        result = validate_chain(chain, corp.anchors, NOW)
        assert result.state is S.SECURE_PRESENT
        assert result.anchor_kind is AnchorKind.CUSTOM
        assert result.include_subdomains is True

    def test_unsigned_delegation_is_insecure_under_root(self, corp):
        root_only = [a for a in corp.anchors if a.kind is AnchorKind.ROOT]
        result = validate_chain(chain_from_world(corp), root_only, NOW)
        assert result.state is S.INSECURE

    def test_out_of_scope_custom_anchor_is_bogus(self, corp):
        custom = next(a for a in corp.anchors if a.kind is AnchorKind.CUSTOM)
        elsewhere = TrustAnchor(n("other.internal"), AnchorKind.CUSTOM, dnskey=custom.dnskey)
        chain = chain_from_world(corp, start="corp.internal")
        result = validate_chain(chain, [elsewhere], NOW)
        assert result.state is S.BOGUS
        assert "no trust anchor in scope" in result.reason

    def test_custom_anchor_cannot_vouch_for_foreign_zone(self, world):
        attacker = ZoneKey.generate(rng=random.Random(66))
        anchor = TrustAnchor(n("evil.tld"), AnchorKind.CUSTOM, dnskey=attacker.dnskey)
        assert select_anchors([anchor], n("example.tld")) == []

    def test_wrong_root_key_is_bogus(self, world):
        other = build_dns_world("example.tld", httpreq_flags=0, seed=1)
        result = validate_chain(chain_from_world(world), other.anchors, NOW)
        assert result.state is S.BOGUS

    def test_ds_form_anchor(self, world):
        key = world.keys[ROOT].dnskey
        anchor = TrustAnchor(ROOT, AnchorKind.ROOT, ds=make_ds(ROOT, key))
        assert validate_chain(chain_from_world(world), [anchor], NOW).state is S.SECURE_PRESENT

    def test_expired_signatures_are_bogus(self, world):
        later = NOW + 91 * 86400
        assert validate_chain(chain_from_world(world), world.anchors, later).state is S.BOGUS

    def test_missing_ds_is_bogus(self, world):
        chain = chain_from_world(world)
        top = chain.links[1]
        links = (chain.links[0], ZoneLink(top.zone, top.dnskey), chain.links[2])
        result = validate_chain(DnsChain(chain.target, links, chain.answer), world.anchors, NOW)
        assert result.state is S.BOGUS

    def test_answer_for_other_name_is_bogus(self, world):
        chain = chain_from_world(world)
        moved = SignedRRset(RRset(n("www.example.tld"), HTTPREQ, IN, 3600, (HTTPREQRecord(0),)),
                            chain.answer.rrsigs)
        result = validate_chain(DnsChain(chain.target, chain.links, moved), world.anchors, NOW)
        assert result.state is S.BOGUS

    def test_stripped_signatures_are_bogus(self, world):
        chain = chain_from_world(world)
        bare = SignedRRset(chain.answer.rrset, ())
        result = validate_chain(DnsChain(chain.target, chain.links, bare), world.anchors, NOW)
        assert result.state is S.BOGUS

    def test_neither_answer_nor_denial(self, world):
        chain = chain_from_world(world)
        result = validate_chain(DnsChain(chain.target, chain.links), world.anchors, NOW)
        assert result.state is S.BOGUS

    def test_unsupported_algorithm_anchor_is_bogus(self, world):
        key = world.keys[ROOT].dnskey
        odd = TrustAnchor(ROOT, AnchorKind.ROOT,
                          dnskey=type(key)(key.flags, key.protocol, 3, key.public_key))
        assert validate_chain(chain_from_world(world), [odd], NOW).state is S.BOGUS


class TestSelectAnchors:
    def test_deepest_custom_first_root_last(self, world):
        root = world.anchors[0]
        key = world.keys[ROOT].dnskey
        a = TrustAnchor(n("tld"), AnchorKind.CUSTOM, dnskey=key)
        b = TrustAnchor(n("example.tld"), AnchorKind.CUSTOM, dnskey=key)
        c = TrustAnchor(n("other.tld"), AnchorKind.CUSTOM, dnskey=key)
        assert select_anchors([root, a, b, c], n("www.example.tld")) == [b, a, root]

    def test_anchor_kind_scope_rules(self, world):
        key = world.keys[ROOT].dnskey
        with pytest.raises(ValueError):
            TrustAnchor(ROOT, AnchorKind.CUSTOM, dnskey=key)
        with pytest.raises(ValueError):
            TrustAnchor(n("tld"), AnchorKind.ROOT, dnskey=key)
        with pytest.raises(ValueError):
            TrustAnchor(ROOT, AnchorKind.ROOT)


class TestAnchorFiles:
    def test_round_trip_key_and_ds(self, world, tmp_path):
        key_anchor = TrustAnchor(n("example.tld"), AnchorKind.CUSTOM,
                                 dnskey=world.keys[n("example.tld")].dnskey)
        path = tmp_path / "anchors.txt"
        path.write_text("# comment\n\n" + format_anchor(key_anchor) + "\n"
                        + format_anchor(IANA_ROOT_ANCHOR) + "  # trailing\n")
        assert load_anchors(path) == [key_anchor, IANA_ROOT_ANCHOR]

    @pytest.mark.parametrize("line", [
        "example.tld 13 abcd",
        "example.tld x abcd custom",
        "example.tld 13 zz custom",
        "example.tld 13 abcd sideways",
        ". 13 abcd custom",
        "example.tld 13 ds:0001 custom",
        "example.tld 13 ds:4f660802aa custom",
    ])
    def test_rejects_bad_lines(self, line):
        with pytest.raises((AnchorFileError, ValueError)):
            parse_anchor_line(line)

    def test_error_carries_location(self, tmp_path):
        path = tmp_path / "a.txt"
        path.write_text("\nbroken line\n")
        with pytest.raises(AnchorFileError, match=r"a.txt:2:"):
            load_anchors(path)


class TestSigner:
    def test_apex_only_zone_has_self_loop_nsec(self):
        key = ZoneKey.generate(rng=random.Random(5))
        zone = sign_zone(n("solo.test"), [], [key], inception=NOW, expiration=NOW + 10)
        nsec = zone.nsec_for(n("solo.test")).rrset.rdatas[0]
        assert nsec.next_name == n("solo.test")
        assert HTTPREQ not in nsec.types

    def test_nsec_chain_is_closed_and_ordered(self, world):
        zone = world.zones[n("example.tld")]
        owners = [rr.name for rr in zone.nsec_chain]
        assert owners == sorted(owners)
        nexts = [rr.rdata.next_name for rr in zone.nsec_chain]
        assert nexts == owners[1:] + owners[:1]

    def test_nsec_lists_httpreq(self, world):
        nsec = world.zones[n("example.tld")].nsec_for(n("example.tld")).rrset.rdatas[0]
        assert HTTPREQ in nsec.types and DNSKEY in nsec.types

    def test_rejects_out_of_zone_records(self):
        key = ZoneKey.generate(rng=random.Random(5))
        with pytest.raises(SigningError):
            sign_zone(n("a.test"), [RR(n("b.test"), 1, IN, 5, NSRecord(n("x.test")))], [key],
                      inception=NOW, expiration=NOW + 1)

    def test_deterministic_per_seed(self):
        a = build_dns_world("example.tld", httpreq_flags=0, seed=3)
        b = build_dns_world("example.tld", httpreq_flags=0, seed=3)
        assert a.zones[n("example.tld")].all_rrs() == b.zones[n("example.tld")].all_rrs()


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), present=st.booleans())
def test_single_byte_mutation_never_secure_present(world, world_absent, seed, present):
    base = world if present else world_absent
    mutated = mutate_chain(chain_from_world(base), random.Random(seed))
    if mutated is not None:
        assert validate_chain(mutated, base.anchors, NOW).state is not S.SECURE_PRESENT
