"""HTTP-Required preload list: an expiring, Huffman-coded trie of opt-out domains.

Binary layout (all integers big-endian)::

    "HRPL"            magic, 4 bytes
    format version    u8 (= 1)
    issued_at         u64, epoch seconds
    expires_at        u64, epoch seconds
    table entries     u16, then per entry: symbol u8, code length u8
    trie bits         u32, then ceil(bits / 8) bytes, zero padded
    CRC-32            u32 over everything before it

The trie stores domains with their characters reversed so that shared
suffixes (TLDs, registrable domains) share a path.  Each node is::

    gamma(len(prefix) + 1)  prefix symbols
    gamma(len(children) + 1)
    per child: symbol [gamma(child_bits + 1) unless the symbol is terminal]
    child bitstrings, in table order

``gamma`` is Elias-gamma coding.  END and SUBTREE are terminal symbols: an
entry ends at this node, without or with include_subdomains.  Lookups read
the child tables only along the probe's path, so the work is linear in the
length of the domain.
"""

from __future__ import annotations

import enum
import heapq
import json
import struct
import zlib
from collections import Counter
from dataclasses import dataclass, field

MAGIC = b"HRPL"
FORMAT_VERSION = 1
DAY = 86400
DEFAULT_VALIDITY = 42 * DAY

ALPHABET = "abcdefghijklmnopqrstuvwxyz0123456789-_."
END = "\x00"
SUBTREE = "\x01"
TERMINALS = (END, SUBTREE)

_HEADER = struct.Struct("!4sBQQ")
_LABEL_CHARS = frozenset(ALPHABET) - {"."}


class PreloadError(ValueError):
    code = "preload-error"


class BuildError(PreloadError):
    code = "build-error"

    def __init__(self, message: str, offenders=()):
        super().__init__(message)
        self.offenders = list(offenders)


class DecodeError(PreloadError):
    code = "decode-error"


class BadMagic(DecodeError):
    code = "bad-magic"


class Truncated(DecodeError):
    code = "truncated"


class ChecksumMismatch(DecodeError):
    code = "checksum-mismatch"


class UnknownVersion(DecodeError):
    code = "unknown-version"


class CorruptTrie(DecodeError):
    code = "corrupt-trie"


@dataclass(frozen=True, order=True)
class PreloadEntry:
    domain: str
    include_subdomains: bool = False
    public_suffix: bool = False

    def to_json(self) -> str:
        return json.dumps({"domain": self.domain, "include_subdomains": self.include_subdomains},
                          separators=(", ", ": "))


class LookupStatus(enum.Enum):
    HIT = "HIT"
    MISS = "MISS"
    EXPIRED = "EXPIRED"


@dataclass(frozen=True)
class LookupResult:
    status: LookupStatus
    include_subdomains: bool = False

    def __str__(self) -> str:
        if self.status is LookupStatus.HIT:
            return f"HIT include_subdomains={str(self.include_subdomains).lower()}"
        return self.status.value


MISS = LookupResult(LookupStatus.MISS)
EXPIRED = LookupResult(LookupStatus.EXPIRED)


@dataclass(frozen=True)
class PreloadArtifact:
    version: int
    issued_at: int
    expires_at: int
    entries: frozenset
    encoded: bytes = field(repr=False)
    _codes: dict = field(repr=False, compare=False, default_factory=dict)
    _trie: bytes = field(repr=False, compare=False, default=b"")
    _trie_bits: int = field(repr=False, compare=False, default=0)

    @property
    def validity(self) -> int:
        return self.expires_at - self.issued_at

    def lookup(self, domain: str, now: int) -> LookupResult:
        return lookup(self, domain, now)


# --- entry validation -----------------------------------------------------------

def normalize_domain(domain: str) -> str:
    domain = domain.strip().lower()
    return domain[:-1] if domain.endswith(".") else domain


def _entry_problem(entry: PreloadEntry) -> str | None:
    name = entry.domain
    if not name or len(name) > 253:
        return "name must be 1-253 characters"
    labels = name.split(".")
    if any(not 1 <= len(label) <= 63 for label in labels):
        return "labels must be 1-63 characters"
    if any(ch not in _LABEL_CHARS for ch in name.replace(".", "")):
        return "characters outside a-z 0-9 - _ (use punycode)"
    if len(labels) < 2 and not entry.public_suffix:
        return "single-label entries must be flagged public_suffix"
    return None


def _canonical_entries(entries) -> list[PreloadEntry]:
    seen: dict = {}
    offenders = []
    out = []
    for entry in entries:
        entry = PreloadEntry(normalize_domain(entry.domain), bool(entry.include_subdomains),
                             bool(entry.public_suffix))
        problem = _entry_problem(entry)
        if problem:
            offenders.append(f"{entry.domain!r}: {problem}")
            continue
        if entry.domain in seen:
            offenders.append(f"{entry.domain!r}: duplicate")
            continue
        seen[entry.domain] = entry
        out.append(entry)
    if offenders:
        raise BuildError("invalid preload entries: " + "; ".join(offenders), offenders)
    return out


# --- Huffman coding -------------------------------------------------------------

def huffman_lengths(freq: dict) -> dict:
    """Code length per symbol; ties broken by symbol value for determinism."""
    if not freq:
        return {}
    if len(freq) == 1:
        return {next(iter(freq)): 1}
    heap = [(count, sym, (sym,)) for sym, count in sorted(freq.items())]
    heapq.heapify(heap)
    lengths = dict.fromkeys(freq, 0)
    while len(heap) > 1:
        c1, k1, s1 = heapq.heappop(heap)
        c2, k2, s2 = heapq.heappop(heap)
        for sym in s1 + s2:
            lengths[sym] += 1
        heapq.heappush(heap, (c1 + c2, min(k1, k2), s1 + s2))
    return lengths


def canonical_codes(lengths: dict) -> dict:
    """Map symbol -> (code, length) under canonical Huffman assignment."""
    codes = {}
    code = 0
    prev_len = 0
    for sym, length in sorted(lengths.items(), key=lambda kv: (kv[1], kv[0])):
        code <<= length - prev_len
        codes[sym] = (code, length)
        code += 1
        prev_len = length
    return codes


# --- bit I/O --------------------------------------------------------------------

class _Bits:
    __slots__ = ("value", "length")

    def __init__(self):
        self.value = 0
        self.length = 0

    def put(self, value: int, nbits: int):
        self.value = (self.value << nbits) | value
        self.length += nbits

    def gamma(self, x: int):
        n = x.bit_length() - 1
        self.put(0, n)
        self.put(x, n + 1)

    def extend(self, other: "_Bits"):
        self.put(other.value, other.length)

    def to_bytes(self) -> bytes:
        pad = (-self.length) % 8
        return (self.value << pad).to_bytes((self.length + pad) // 8, "big")


class _Reader:
    __slots__ = ("data", "pos", "limit", "decode")

    def __init__(self, data: bytes, limit: int, codes: dict):
        self.data = data
        self.pos = 0
        self.limit = limit
        self.decode = {(length, code): sym for sym, (code, length) in codes.items()}

    def bit(self) -> int:
        if self.pos >= self.limit:
            raise CorruptTrie("read past end of trie")
        b = (self.data[self.pos >> 3] >> (7 - (self.pos & 7))) & 1
        self.pos += 1
        return b

    def gamma(self) -> int:
        n = 0
        while self.bit() == 0:
            n += 1
            if n > 40:
                raise CorruptTrie("gamma code too long")
        value = 1
        for _ in range(n):
            value = (value << 1) | self.bit()
        return value

    def symbol(self) -> str:
        code = 0
        for length in range(1, 33):
            code = (code << 1) | self.bit()
            sym = self.decode.get((length, code))
            if sym is not None:
                return sym
        raise CorruptTrie("invalid Huffman code")


# --- trie -----------------------------------------------------------------------

def _build_trie(entries):
    root: dict = {}
    for entry in entries:
        node = root
        for ch in reversed(entry.domain):
            node = node.setdefault(ch, {})
        node[SUBTREE if entry.include_subdomains else END] = None
    return root


def _encode_node(node: dict, codes: dict) -> _Bits:
    prefix = []
    # path compression: absorb single non-terminal children into the prefix
    while len(node) == 1:
        (sym, child), = node.items()
        if child is None:
            break
        prefix.append(sym)
        node = child
    bits = _Bits()
    bits.gamma(len(prefix) + 1)
    for ch in prefix:
        bits.put(*codes[ch])
    children = sorted(node.items())
    bits.gamma(len(children) + 1)
    encoded = []
    for sym, child in children:
        bits.put(*codes[sym])
        if child is not None:
            sub = _encode_node(child, codes)
            bits.gamma(sub.length + 1)
            encoded.append(sub)
    for sub in encoded:
        bits.extend(sub)
    return bits


def _walk(reader: _Reader, path: str, out: list):
    plen = reader.gamma() - 1
    path += "".join(reader.symbol() for _ in range(plen))
    count = reader.gamma() - 1
    table = []
    for _ in range(count):
        sym = reader.symbol()
        table.append((sym, None if sym in TERMINALS else reader.gamma() - 1))
    cursor = reader.pos
    for sym, length in table:
        if length is None:
            out.append((path[::-1], sym == SUBTREE))
            continue
        reader.pos = cursor
        _walk(reader, path + sym, out)
        if reader.pos != cursor + length:
            raise CorruptTrie("child length does not match its contents")
        cursor += length
    reader.pos = cursor


# --- public operations ----------------------------------------------------------

def build(entries, issued_at: int, validity: int = DEFAULT_VALIDITY) -> PreloadArtifact:
    if validity <= 0:
        raise BuildError("validity must be positive")
    entries = _canonical_entries(entries)
    freq = Counter()
    for entry in entries:
        freq.update(entry.domain)
        freq[SUBTREE if entry.include_subdomains else END] += 1
    codes = canonical_codes(huffman_lengths(freq))
    trie = _encode_node(_build_trie(entries), codes)

    table = sorted(codes.items(), key=lambda kv: kv[0])
    out = bytearray(_HEADER.pack(MAGIC, FORMAT_VERSION, issued_at, issued_at + validity))
    out += struct.pack("!H", len(table))
    for sym, (_, length) in table:
        out += bytes([ord(sym), length])
    trie_bytes = trie.to_bytes()
    out += struct.pack("!I", trie.length) + trie_bytes
    out += struct.pack("!I", zlib.crc32(out))
    return PreloadArtifact(FORMAT_VERSION, issued_at, issued_at + validity,
                           frozenset(_with_suffix_flag(e) for e in entries), bytes(out),
                           codes, trie_bytes, trie.length)


def _with_suffix_flag(entry: PreloadEntry) -> PreloadEntry:
    # the encoding does not store the flag; it is implied by a single label
    return PreloadEntry(entry.domain, entry.include_subdomains, "." not in entry.domain)


def encode(artifact: PreloadArtifact) -> bytes:
    return artifact.encoded


def decode(data: bytes) -> PreloadArtifact:
    data = bytes(data)
    if len(data) < 4:
        raise Truncated("shorter than magic")
    if data[:4] != MAGIC:
        raise BadMagic(f"bad magic {data[:4]!r}")
    if len(data) < 5:
        raise Truncated("missing format version")
    if data[4] != FORMAT_VERSION:
        raise UnknownVersion(f"unknown format version {data[4]}")
    pos = _HEADER.size
    if len(data) < pos + 2:
        raise Truncated("header truncated")
    _, version, issued_at, expires_at = _HEADER.unpack(data[:pos])
    (entries,) = struct.unpack("!H", data[pos:pos + 2])
    pos += 2
    if len(data) < pos + 2 * entries + 4:
        raise Truncated("code table truncated")
    lengths = {}
    for i in range(entries):
        sym, length = chr(data[pos]), data[pos + 1]
        pos += 2
        if sym not in ALPHABET and sym not in TERMINALS or not 1 <= length <= 32 or sym in lengths:
            raise CorruptTrie(f"bad code table entry {i}")
        lengths[sym] = length
    (bits,) = struct.unpack("!I", data[pos:pos + 4])
    pos += 4
    nbytes = (bits + 7) // 8
    if len(data) < pos + nbytes + 4:
        raise Truncated("trie or checksum truncated")
    trie = data[pos:pos + nbytes]
    pos += nbytes
    if len(data) != pos + 4:
        raise DecodeError("trailing bytes after checksum")
    (crc,) = struct.unpack("!I", data[pos:])
    if zlib.crc32(data[:pos]) != crc:
        raise ChecksumMismatch("CRC-32 mismatch")
    if expires_at <= issued_at:
        raise DecodeError("expires_at must be after issued_at")

    codes = canonical_codes(lengths)
    reader = _Reader(trie, bits, codes)
    found: list = []
    _walk(reader, "", found)
    if reader.pos != bits:
        raise CorruptTrie("unused trie bits")
    entry_set = frozenset(PreloadEntry(d, sub, "." not in d) for d, sub in found)
    return PreloadArtifact(version, issued_at, expires_at, entry_set, data, codes, trie, bits)


def lookup(artifact: PreloadArtifact, domain: str, now: int) -> LookupResult:
    if now >= artifact.expires_at:
        return EXPIRED
    probe = normalize_domain(domain)[::-1]
    if not probe or artifact._trie_bits == 0:
        return MISS
    reader = _Reader(artifact._trie, artifact._trie_bits, artifact._codes)
    i = 0
    best = MISS
    while True:
        for _ in range(reader.gamma() - 1):
            if i >= len(probe) or reader.symbol() != probe[i]:
                return best
            i += 1
        table = []
        for _ in range(reader.gamma() - 1):
            sym = reader.symbol()
            table.append((sym, None if sym in TERMINALS else reader.gamma() - 1))
        cursor = reader.pos
        target = None
        for sym, length in table:
            if length is None:
                if i == len(probe):
                    return LookupResult(LookupStatus.HIT, sym == SUBTREE)
                if sym == SUBTREE and probe[i] == ".":
                    best = LookupResult(LookupStatus.HIT, True)
                continue
            if target is None and i < len(probe) and sym == probe[i]:
                target = cursor
            cursor += length
        if target is None:
            return best
        reader.pos = target
        i += 1


# --- JSON-lines source format ----------------------------------------------------

def parse_jsonl(lines, source: str = "<input>") -> list[PreloadEntry]:
    entries = []
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict) or not isinstance(obj.get("domain"), str):
                raise ValueError("expected an object with a string 'domain'")
            sub = obj.get("include_subdomains", False)
            if not isinstance(sub, bool):
                raise ValueError("'include_subdomains' must be a boolean")
            entries.append(PreloadEntry(obj["domain"], sub, bool(obj.get("public_suffix", False))))
        except ValueError as exc:
            raise BuildError(f"{source}:{lineno}: {exc}") from None
    return entries


def load_jsonl(path) -> list[PreloadEntry]:
    with open(path, encoding="utf-8") as fh:
        return parse_jsonl(fh, str(path))


def dump_jsonl(entries) -> str:
    return "".join(e.to_json() + "\n" for e in sorted(entries))


def load(path) -> PreloadArtifact:
    with open(path, "rb") as fh:
        return decode(fh.read())
