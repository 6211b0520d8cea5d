"""Reference semantics for preload lookups: a plain scan over the entry set."""

import random

from hsts_enforced.preload import EXPIRED, MISS, LookupResult, LookupStatus, PreloadEntry

LABELS = ["a", "b", "ab", "x-1", "z_", "0", "example", "test"]


def naive_lookup(entries, domain: str, now: int, expires_at: int) -> LookupResult:
    if now >= expires_at:
        return EXPIRED
    domain = domain.strip().lower().rstrip(".")
    by_name = {e.domain: e for e in entries}
    if domain in by_name:
        return LookupResult(LookupStatus.HIT, by_name[domain].include_subdomains)
    labels = domain.split(".")
    for i in range(1, len(labels)):
        entry = by_name.get(".".join(labels[i:]))
        if entry is not None and entry.include_subdomains:
            return LookupResult(LookupStatus.HIT, True)
    return MISS


def random_domain(rng: random.Random, min_labels=1, max_labels=4) -> str:
    return ".".join(rng.choice(LABELS) for _ in range(rng.randint(min_labels, max_labels)))


def random_entries(rng: random.Random, size: int) -> list[PreloadEntry]:
    out = {}
    for _ in range(size):
        name = random_domain(rng)
        single = "." not in name
        out[name] = PreloadEntry(name, rng.random() < 0.5, public_suffix=single)
    return list(out.values())


def random_probe(rng: random.Random, entries) -> str:
    roll = rng.random()
    if entries and roll < 0.4:
        base = rng.choice(entries).domain
    elif entries and roll < 0.7:
        base = random_domain(rng, 1, 2) + "." + rng.choice(entries).domain
    else:
        base = random_domain(rng)
    if rng.random() < 0.1:
        base = base.upper()
    if rng.random() < 0.1:
        base += "."
    return base
