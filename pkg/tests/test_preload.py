import random
import struct
import zlib

import pytest
from hypothesis import given, settings, strategies as st

from hsts_enforced.preload import (DAY, DEFAULT_VALIDITY, EXPIRED, MISS, BadMagic, BuildError,
                                   ChecksumMismatch, CorruptTrie, DecodeError, LookupResult,
                                   LookupStatus, PreloadEntry, Truncated, UnknownVersion, build,
                                   canonical_codes, decode, dump_jsonl, encode, huffman_lengths,
                                   load, parse_jsonl)

from preload_oracle import naive_lookup, random_entries, random_probe

T0 = 1_760_000_000
HIT_SUB = LookupResult(LookupStatus.HIT, True)
HIT = LookupResult(LookupStatus.HIT, False)


class TestExamples:
    def test_empty_list_always_misses(self):
        a = build([], T0, DEFAULT_VALIDITY)
        assert a.lookup("example.test", T0) == MISS
        assert a.expires_at - a.issued_at == 42 * DAY
        # header (21) + empty table (2) + bit count (4) + empty root node (1) + CRC (4)
        assert len(a.encoded) == 32

    def test_include_subdomains_hit(self):
        a = build([PreloadEntry("example.test", True)], T0)
        assert a.lookup("sub.example.test", T0) == HIT_SUB
        assert str(a.lookup("sub.example.test", T0)) == "HIT include_subdomains=true"

    def test_exact_hit(self):
        a = build([PreloadEntry("example.test")], T0)
        assert str(a.lookup("EXAMPLE.test.", T0)) == "HIT include_subdomains=false"

    def test_deep_name_without_flag_misses(self):
        a = build([PreloadEntry("example.test", False)], T0)
        assert a.lookup("deep.a.example.test", T0) == MISS

    def test_label_boundary(self):
        a = build([PreloadEntry("example.test", True)], T0)
        assert a.lookup("badexample.test", T0) == MISS
        assert a.lookup("test", T0) == MISS

    def test_expired(self):
        a = build([PreloadEntry("example.test")], T0, 10)
        assert a.lookup("example.test", T0 + 9) == HIT
        assert a.lookup("example.test", T0 + 10) == EXPIRED
        assert a.lookup("missing.test", T0 + 10) == EXPIRED

    def test_public_suffix_entry(self):
        a = build([PreloadEntry("internal", True, public_suffix=True)], T0)
        assert a.lookup("host.internal", T0) == HIT_SUB

    def test_thousand_random_domains_round_trip(self):
        rng = random.Random(1000)
        names = {f"{rng.getrandbits(40):x}.{rng.choice(['com', 'net', 'test'])}"
                 for _ in range(1000)}
        entries = [PreloadEntry(d, rng.random() < 0.3) for d in names]
        a = decode(encode(build(entries, T0)))
        assert a.entries == frozenset(entries)


class TestBuildErrors:
    def test_duplicate_listed(self):
        with pytest.raises(BuildError) as exc:
            build([PreloadEntry("a.test"), PreloadEntry("A.test.")], T0)
        assert exc.value.offenders == ("'a.test': duplicate",) or \
            list(exc.value.offenders) == ["'a.test': duplicate"]

    @pytest.mark.parametrize("domain", ["", "single", "bad..name", "ünï.test", "sp ace.test",
                                        "x" * 64 + ".test"])
    def test_malformed(self, domain):
        with pytest.raises(BuildError):
            build([PreloadEntry(domain)], T0)

    def test_all_offenders_reported(self):
        with pytest.raises(BuildError) as exc:
            build([PreloadEntry("single"), PreloadEntry("ok.test"), PreloadEntry("a..b")], T0)
        assert len(exc.value.offenders) == 2

    def test_validity_must_be_positive(self):
        with pytest.raises(BuildError):
            build([], T0, 0)


class TestDecodeErrors:
    @pytest.fixture
    def blob(self):
        return build([PreloadEntry("example.test", True), PreloadEntry("b.test")], T0).encoded

    def test_layout(self, blob):
        magic, fmt, issued, expires = struct.unpack("!4sBQQ", blob[:21])
        assert (magic, fmt, issued, expires) == (b"HRPL", 1, T0, T0 + 42 * DAY)
        assert struct.unpack("!I", blob[-4:])[0] == zlib.crc32(blob[:-4])

    def test_flipped_payload_byte(self, blob):
        raw = bytearray(blob)
        raw[30] ^= 0x01
        with pytest.raises(ChecksumMismatch) as exc:
            decode(bytes(raw))
        assert exc.value.code == "checksum-mismatch"

    def test_truncated_header(self, blob):
        with pytest.raises(Truncated):
            decode(blob[:12])

    @pytest.mark.parametrize("cut", [1, 3, 4, 10])
    def test_truncated_tail(self, blob, cut):
        with pytest.raises(Truncated):
            decode(blob[:-cut])

    def test_bad_magic(self, blob):
        with pytest.raises(BadMagic):
            decode(b"XRPL" + blob[4:])

    def test_unknown_version(self, blob):
        with pytest.raises(UnknownVersion):
            decode(blob[:4] + b"\x02" + blob[5:])

    def test_trailing_bytes(self, blob):
        with pytest.raises(DecodeError):
            decode(blob + b"\x00")

    def test_corrupt_trie_with_valid_crc(self, blob):
        body = bytearray(blob[:-4])
        body[-1] ^= 0xFF
        with pytest.raises(CorruptTrie):
            decode(bytes(body) + struct.pack("!I", zlib.crc32(bytes(body))))

    def test_distinct_codes(self):
        codes = {cls.code for cls in (BadMagic, Truncated, ChecksumMismatch, UnknownVersion,
                                      CorruptTrie)}
        assert len(codes) == 5

    def test_load_from_file(self, blob, tmp_path):
        path = tmp_path / "x.hrpl"
        path.write_bytes(blob)
        assert load(path).lookup("sub.example.test", T0) == HIT_SUB


class TestHuffman:
    def test_frequent_symbols_get_short_codes(self):
        lengths = huffman_lengths({"a": 100, "b": 10, "c": 1, "d": 1})
        assert lengths["a"] < lengths["c"]

    def test_single_symbol_gets_one_bit(self):
        assert huffman_lengths({"a": 5}) == {"a": 1}

    @given(st.dictionaries(st.sampled_from("abcdefgh.-\x00\x01"), st.integers(1, 1000),
                           min_size=1))
    def test_canonical_codes_are_prefix_free(self, freq):
        codes = canonical_codes(huffman_lengths(freq))
        words = [format(c, f"0{l}b") for c, l in codes.values()]
        for x in words:
            for y in words:
                assert x == y or not y.startswith(x)


class TestJsonl:
    def test_round_trip(self):
        entries = [PreloadEntry("b.test", True), PreloadEntry("a.test")]
        text = dump_jsonl(entries)
        assert text.splitlines()[0] == '{"domain": "a.test", "include_subdomains": false}'
        assert parse_jsonl(text.splitlines()) == sorted(entries)

    @pytest.mark.parametrize("line", ['{"domain": 3}', "[1]", "nope",
                                      '{"domain": "a.test", "include_subdomains": "yes"}'])
    def test_errors_carry_line_numbers(self, line):
        with pytest.raises(BuildError, match=r"src:2:"):
            parse_jsonl(["# header", line], "src")


@settings(max_examples=400, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_lookup_matches_naive_scan(seed):
    rng = random.Random(seed)
    entries = random_entries(rng, rng.randint(0, 25))
    artifact = build(entries, T0, 1000)
    decoded = decode(artifact.encoded)
    assert decoded.entries == artifact.entries and decoded.encoded == artifact.encoded
    for _ in range(10):
        probe = random_probe(rng, entries)
        now = T0 + rng.choice([0, 999, 1000, 5000])
        assert decoded.lookup(probe, now) == naive_lookup(entries, probe, now, T0 + 1000), probe


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 100 * DAY), st.integers(0, 100 * DAY))
def test_monotone_expiry(seed, d1, d2):
    rng = random.Random(seed)
    entries = random_entries(rng, 8)
    a = build(entries, T0)
    t1, t2 = sorted((T0 + d1, T0 + d2))
    probe = random_probe(rng, entries)
    if a.lookup(probe, t1) == EXPIRED:
        assert a.lookup(probe, t2) == EXPIRED


def test_hundred_thousand_entries_compress():
    rng = random.Random(5)
    tlds = ["com", "net", "org", "de", "test", "co.uk"]
    words = ["shop", "mail", "cdn", "api", "blog", "static", "app", "img"]
    names = set()
    while len(names) < 100_000:
        names.add(f"{rng.choice(words)}{rng.randrange(10**6)}.{rng.choice(tlds)}")
    entries = [PreloadEntry(d, rng.random() < 0.5) for d in names]
    artifact = build(entries, T0)
    plaintext = "\n".join(sorted(names)).encode()
    assert len(artifact.encoded) < len(plaintext)
    probe = next(iter(names))
    assert artifact.lookup(probe, T0).status is LookupStatus.HIT
