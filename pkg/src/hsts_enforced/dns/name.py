"""Absolute domain names with DNS wire encoding and canonical ordering."""

from __future__ import annotations

from functools import total_ordering

MAX_LABEL = 63
MAX_WIRE = 255


class BadName(ValueError):
    """Raised for syntactically invalid domain names."""


@total_ordering
class Name:
    """An absolute domain name stored as a tuple of raw labels (root excluded).

    Comparison and hashing are case-insensitive; the original spelling is kept
    so owner-name case changes survive a round trip through the codec.
    """

    __slots__ = ("labels", "_key")

    def __init__(self, labels):
        labels = tuple(bytes(label) for label in labels)
        wire_len = 1
        for label in labels:
            if not label:
                raise BadName("empty label")
            if len(label) > MAX_LABEL:
                raise BadName(f"label longer than {MAX_LABEL} octets")
            wire_len += len(label) + 1
        if wire_len > MAX_WIRE:
            raise BadName(f"name longer than {MAX_WIRE} octets")
        self.labels = labels
        self._key = tuple(label.lower() for label in labels)

    @classmethod
    def from_text(cls, text: str) -> "Name":
        if isinstance(text, Name):
            return text
        text = text.strip()
        if text in ("", "."):
            return ROOT
        if text.endswith("."):
            text = text[:-1]
        try:
            raw = text.encode("ascii")
        except UnicodeEncodeError as exc:
            raise BadName(f"non-ASCII name {text!r}; use punycode") from exc
        return cls(raw.split(b"."))

    def to_text(self, omit_final_dot: bool = False) -> str:
        if not self.labels:
            return "."
        text = ".".join(label.decode("ascii", "backslashreplace") for label in self.labels)
        return text if omit_final_dot else text + "."

    def __str__(self) -> str:
        return self.to_text()

    def __repr__(self) -> str:
        return f"Name({self.to_text()!r})"

    def to_wire(self, canonical: bool = False) -> bytes:
        out = bytearray()
        for label in self.labels:
            label = label.lower() if canonical else label
            out.append(len(label))
            out += label
        out.append(0)
        return bytes(out)

    def canonicalize(self) -> "Name":
        return Name(self._key)

    def __len__(self) -> int:
        return len(self.labels)

    def __eq__(self, other) -> bool:
        if isinstance(other, str):
            other = Name.from_text(other)
        return isinstance(other, Name) and self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __lt__(self, other: "Name") -> bool:
        # canonical DNS order: compare right-to-left label by label
        return self.sort_key() < other.sort_key()

    def sort_key(self) -> tuple:
        return tuple(reversed(self._key))

    @property
    def is_root(self) -> bool:
        return not self.labels

    def parent(self) -> "Name":
        if not self.labels:
            raise BadName("root has no parent")
        return Name(self.labels[1:])

    def is_subdomain_of(self, other: "Name") -> bool:
        """True when ``self`` equals ``other`` or lies beneath it."""
        n = len(other._key)
        return n <= len(self._key) and (n == 0 or self._key[-n:] == other._key)

    def ancestors(self) -> list["Name"]:
        """Self first, root last."""
        return [Name(self.labels[i:]) for i in range(len(self.labels) + 1)]

    def prepend(self, label: str | bytes) -> "Name":
        if isinstance(label, str):
            label = label.encode("ascii")
        return Name((label,) + self.labels)


ROOT = Name(())


def read_name(data: bytes, offset: int) -> tuple[Name, int]:
    """Decode a possibly compressed name; returns ``(name, offset_after)``."""
    labels = []
    end = None
    jumps = 0
    pos = offset
    while True:
        if pos >= len(data):
            raise BadName("truncated name")
        length = data[pos]
        if length & 0xC0 == 0xC0:
            if pos + 1 >= len(data):
                raise BadName("truncated compression pointer")
            if end is None:
                end = pos + 2
            jumps += 1
            if jumps > 64:
                raise BadName("compression loop")
            pos = ((length & 0x3F) << 8) | data[pos + 1]
            continue
        if length & 0xC0:
            raise BadName("unsupported label type")
        pos += 1
        if length == 0:
            break
        if pos + length > len(data):
            raise BadName("truncated label")
        labels.append(data[pos:pos + length])
        pos += length
    return Name(labels), (end if end is not None else pos)
